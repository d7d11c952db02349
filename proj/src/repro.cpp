// Copyright 2026 The PlanNetX Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "plannetx/repro.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <filesystem>
#include <map>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "plannetx/dataset_io.hpp"
#include "plannetx/pipeline.hpp"
#include "weights_json.hpp"

namespace plannetx {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format_criterion(const CriterionResult& c) {
  return std::string(c.pass ? "[PASS] " : "[FAIL] ") + std::to_string(c.id) + ". " + c.name +
         ": " + c.detail;
}

namespace {

std::string join(const std::string& a, const std::string& b) { return (fs::path(a) / b).string(); }

double median(std::vector<double> v) {
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

std::string fmt(double v, const char* f = "%.4g") {
  if (!std::isfinite(v)) return "-";
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// A stage is reusable when it finished (`artifact` exists) under the same
// configuration.
bool reusable(const std::string& dir, const RunConfig& cfg, const std::string& artifact) {
  const std::string rc = join(dir, "run_config.json");
  return fs::exists(join(dir, artifact)) && fs::exists(rc) &&
         detail::read_file(rc) == run_config_json(cfg);
}

class Log {
 public:
  explicit Log(std::ostream& os) : os_(os), t0_(std::chrono::steady_clock::now()) {}
  void operator()(const std::string& msg) {
    std::lock_guard<std::mutex> lock(m_);
    const double s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
    char buf[32];
    std::snprintf(buf, sizeof buf, "[%7.1f s] ", s);
    os_ << buf << msg << std::endl;
  }

 private:
  std::ostream& os_;
  std::chrono::steady_clock::time_point t0_;
  std::mutex m_;
};

// Runs jobs 0..n-1 on `workers` threads; the first exception is rethrown.
template <class F>
void parallel_for(int n, int workers, F&& f) {
  std::atomic<int> next{0};
  std::exception_ptr err;
  std::mutex m;
  const auto work = [&] {
    for (int i; (i = next++) < n;) {
      try {
        f(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(m);
        if (!err) err = std::current_exception();
      }
    }
  };
  const int t = std::max(1, std::min(workers, n));
  std::vector<std::thread> pool;
  for (int k = 1; k < t; ++k) pool.emplace_back(work);
  work();
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
}

struct ModelSpec {
  std::string name;
  std::string label;  // table row
  Arch arch;
  LossKind loss;
};

const std::vector<ModelSpec>& model_specs() {
  static const std::vector<ModelSpec> specs{
      {"plannetx", "PlanNetX", Arch::kPlanNetX, LossKind::kStateTraj},
      {"plannetx-u", "PlanNetX with L^u", Arch::kPlanNetX, LossKind::kControlTraj},
      {"plannetx-enc", "PlanNetXEnc", Arch::kPlanNetXEnc, LossKind::kStateTraj},
      {"bc", "BC", Arch::kBc, LossKind::kBc}};
  return specs;
}

struct Model {
  const ModelSpec* spec = nullptr;
  int seed_index = 0;
  RunConfig cfg;
  std::string dir;
  NetworkParams net;
  OpenLoopMetrics open;
  ClosedLoopResult closed;
};

bool same_bytes(const std::string& a, const std::string& b) {
  return fs::exists(a) && fs::exists(b) && detail::read_file(a) == detail::read_file(b);
}

json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

ReproReport run_repro(const RunConfig& cfg, const std::string& out, int workers,
                      std::ostream& os) {
  cfg.validate();
  Log log(os);
  fs::create_directories(out);
  ReproReport report;
  report.dir = out;

  // ---- data -----------------------------------------------------------------
  const std::string data_dir = join(out, "data");
  const int n_data = cfg.train.train_size + cfg.train.valid_size + cfg.train.test_size;
  Dataset data;
  if (reusable(data_dir, cfg, "dataset.bin")) {
    data = load_dataset(join(data_dir, "dataset.bin"), &cfg.ocp);
    log("reusing dataset (" + std::to_string(data.samples.size()) + " samples)");
  } else {
    log("generating " + std::to_string(n_data) + " samples");
    data = stage_generate(cfg, n_data, data_dir, workers, {"generate", {}, {}});
  }
  const std::string data_path = join(data_dir, "dataset.bin");
  const DatasetSplit split = split_dataset(data, cfg.train);

  const std::string suite_dir = join(out, "suite");
  std::vector<Scenario> suite;
  if (reusable(suite_dir, cfg, "scenarios.json")) {
    suite = scenarios_from_json(detail::read_file(join(suite_dir, "scenarios.json")));
    log("reusing scenario suite (" + std::to_string(suite.size()) + ")");
  } else {
    log("generating " + std::to_string(cfg.suite_size) + " filtered scenarios");
    suite = stage_generate_suite(cfg, cfg.suite_size, suite_dir, workers, {"generate", {}, {}});
  }

  // ---- train ----------------------------------------------------------------
  std::vector<Model> models;
  for (int s = 0; s < cfg.repro_seeds; ++s)
    for (const auto& spec : model_specs()) {
      Model m;
      m.spec = &spec;
      m.seed_index = s;
      m.cfg = cfg;
      m.cfg.arch.arch = spec.arch;
      m.cfg.loss.kind = spec.loss;
      m.cfg.seed = cfg.seed + static_cast<std::uint64_t>(s);
      m.cfg.train.seed = m.cfg.seed;
      m.dir = join(join(out, "models"), spec.name + "_s" + std::to_string(s));
      models.push_back(std::move(m));
    }
  parallel_for(static_cast<int>(models.size()), workers, [&](int i) {
    Model& m = models[static_cast<std::size_t>(i)];
    if (reusable(m.dir, m.cfg, "weights_best.json")) {
      m.net = load_weights(join(m.dir, "weights_best.json"));
      log("reusing " + m.spec->name + " seed " + std::to_string(m.seed_index));
      return;
    }
    log("training " + m.spec->name + " seed " + std::to_string(m.seed_index));
    TrainOptions opt;
    opt.resume = true;
    m.net = stage_train(m.cfg, data, m.dir, opt, {"train", {}, {{"dataset", data_path}}}).best;
    log("trained " + m.spec->name + " seed " + std::to_string(m.seed_index));
  });
  for (auto& m : models) m.open = open_loop_metrics(m.net, split.test);

  // ---- closed loop ----------------------------------------------------------
  log("closed loop: MPC (warm and cold start)");
  const auto mpc = run_mpc_suite(cfg, suite, true, workers);
  const auto mpc_cold = run_mpc_suite(cfg, suite, false, workers);
  ClosedLoopResult mpc_res{mpc, compute_metrics(mpc, mpc)};
  write_closed_loop(join(out, "closed_loop/mpc"), mpc_res, suite, mpc);
  ClosedLoopResult mpc_cold_res{mpc_cold, compute_metrics(mpc_cold, mpc)};
  write_closed_loop(join(out, "closed_loop/mpc-cold"), mpc_cold_res, suite, mpc);
  long warm_iters = 0, cold_iters = 0;
  for (const auto& l : mpc) warm_iters += l.total_sqp_iterations;
  for (const auto& l : mpc_cold) cold_iters += l.total_sqp_iterations;

  log("closed loop: learned models");
  for (auto& m : models) {
    const NetworkParams net = m.net;
    const std::string name = m.spec->name;
    m.closed = closed_loop([net, name] { return std::make_unique<LearnedController>(net, name); },
                           suite, mpc, cfg.ocp, workers);
    write_closed_loop(join(join(out, "closed_loop"), name + "_s" + std::to_string(m.seed_index)),
                      m.closed, suite, mpc);
  }

  // ---- compress -------------------------------------------------------------
  const Model& base = models.front();  // PlanNetX, first seed
  const std::string prune_dir = join(out, "compress/prune");
  NetworkParams pruned;
  double prune_valid_before = 0.0, prune_valid_after = 0.0;
  if (reusable(prune_dir, base.cfg, "weights.json")) {
    pruned = load_weights(join(prune_dir, "weights.json"));
    log("reusing pruned model");
  } else {
    log("pruning " + base.spec->name);
    pruned = stage_prune(base.cfg, base.net, data, prune_dir,
                         {"compress", {}, {{"weights", join(base.dir, "weights_best.json")},
                                           {"dataset", data_path}}})
                 .params;
  }
  {
    const json pr = json::parse(detail::read_file(join(prune_dir, "prune_report.json")));
    prune_valid_before = pr.at("valid_loss_before").get<double>();
    prune_valid_after = pr.at("valid_loss_after").get<double>();
  }
  log("quantizing " + base.spec->name);
  const QuantModel quant = stage_quantize(
      base.cfg, base.net, data, join(out, "compress/quant"),
      {"compress", {}, {{"weights", join(base.dir, "weights_best.json")}, {"dataset", data_path}}});

  const OpenLoopMetrics pruned_open = open_loop_metrics(pruned, split.test);
  const OpenLoopMetrics quant_open = open_loop_metrics(quant_planner(quant), split.test);
  const ClosedLoopResult pruned_cl = closed_loop(
      [pruned] { return std::make_unique<LearnedController>(pruned, "plannetx-pruned"); }, suite,
      mpc, cfg.ocp, workers);
  write_closed_loop(join(out, "closed_loop/plannetx-pruned"), pruned_cl, suite, mpc);
  const ClosedLoopResult quant_cl =
      closed_loop([quant] { return std::make_unique<QuantController>(quant, "plannetx-quant"); },
                  suite, mpc, cfg.ocp, workers);
  write_closed_loop(join(out, "closed_loop/plannetx-quant"), quant_cl, suite, mpc);

  QuantStats qstats;
  {
    std::vector<Sample> probe(split.test.begin(),
                              split.test.begin() + std::min<std::size_t>(64, split.test.size()));
    quant.forward(collect_policy_inputs(base.net, probe), &qstats);
  }

  // ---- determinism ----------------------------------------------------------
  log("determinism: repeated generate, train and episodes");
  const std::string det = join(out, "determinism");
  fs::remove_all(det);
  RunConfig dcfg = base.cfg;
  dcfg.train.epochs = 3;
  dcfg.train.batch_size = 16;
  const int n_det = 64;
  const Dataset da = stage_generate(dcfg, n_det, join(det, "gen_a"), workers, {"generate", {}, {}});
  stage_generate(dcfg, n_det, join(det, "gen_b"), 1, {"generate", {}, {}});
  bool gen_same = true;
  for (const char* f : {"dataset.bin", "manifest.json", "run_config.json"})
    gen_same = gen_same && same_bytes(join(join(det, "gen_a"), f), join(join(det, "gen_b"), f));
  stage_train(dcfg, da, join(det, "train_a"), {}, {"train", {}, {}});
  stage_train(dcfg, da, join(det, "train_b"), {}, {"train", {}, {}});
  bool train_same = true;
  for (const char* f : {"weights_best.json", "weights_final.json", "curve.csv", "summary.json",
                        "train_state.json"})
    train_same =
        train_same && same_bytes(join(join(det, "train_a"), f), join(join(det, "train_b"), f));
  bool episode_same = true;
  for (std::size_t i = 0; i < std::min<std::size_t>(3, suite.size()); ++i) {
    MpcController c1(cfg.ocp), c2(cfg.ocp);
    LearnedController l1(base.net), l2(base.net);
    episode_same = episode_same &&
                   episode_json(run_episode(suite[i], c1, cfg.ocp), false) ==
                       episode_json(run_episode(suite[i], c2, cfg.ocp), false) &&
                   episode_json(run_episode(suite[i], l1, cfg.ocp), false) ==
                       episode_json(run_episode(suite[i], l2, cfg.ocp), false);
  }

  // ---- bench ----------------------------------------------------------------
  log("timing (single thread, " + std::to_string(cfg.bench.inputs) + " inputs x " +
      std::to_string(cfg.bench.repeats) + " repeats)");
  const std::string bench_dir = join(out, "bench");
  const auto inputs = bench_inputs(split.test, static_cast<std::size_t>(cfg.bench.inputs));
  const int rep = cfg.bench.repeats, wu = cfg.bench.warmup;
  std::map<std::string, std::pair<double, double>> times;  // policy, planning p95
  const auto record = [&](const TimingResult& r) {
    write_timing(bench_dir, r);
    auto& t = times[r.target];
    (r.mode == TimingMode::kPolicy ? t.first : t.second) = r.p95_ms;
  };
  {
    const TimingResult r = bench_mpc(cfg.ocp, inputs, rep, wu);
    write_timing(bench_dir, r);
    times["mpc"] = {r.p95_ms, r.p95_ms};  // one solve answers both
    times["mpc-warm"] = {std::nan(""), std::nan("")};  // no independent warm start
  }
  for (const auto& m : models) {
    if (m.seed_index != 0) continue;
    record(bench_network(m.net, inputs, TimingMode::kPolicy, rep, wu, m.spec->name));
    if (m.spec->arch != Arch::kBc)
      record(bench_network(m.net, inputs, TimingMode::kPlanning, rep, wu, m.spec->name));
    else
      times[m.spec->name].second = std::nan("");
  }
  record(bench_network(pruned, inputs, TimingMode::kPolicy, rep, wu, "plannetx-pruned"));
  record(bench_network(pruned, inputs, TimingMode::kPlanning, rep, wu, "plannetx-pruned"));
  record(bench_quant(quant, inputs, TimingMode::kPolicy, rep, wu, "plannetx-quant"));
  record(bench_quant(quant, inputs, TimingMode::kPlanning, rep, wu, "plannetx-quant"));
  const MachineInfo machine = machine_info();

  // ---- criteria -------------------------------------------------------------
  const auto per_seed = [&](const std::string& name, auto&& get) {
    std::vector<double> v;
    for (const auto& m : models)
      if (m.spec->name == name) v.push_back(get(m));
    return v;
  };
  const auto traj = [](const Model& m) { return m.open.trajectory_mse; };
  const auto jump = [](const Model& m) { return m.open.jump_trajectory_mse; };
  const auto ds = [](const Model& m) { return m.closed.metrics.avg_ds; };
  const auto dv = [](const Model& m) { return m.closed.metrics.avg_dv; };
  const auto da_ = [](const Model& m) { return m.closed.metrics.avg_da; };
  const auto pol = [](const Model& m) { return m.open.policy_mse; };

  auto& C = report.criteria;
  {
    const auto x = per_seed("plannetx", traj), u = per_seed("plannetx-u", traj);
    std::vector<double> ratio;
    for (std::size_t i = 0; i < x.size(); ++i) ratio.push_back(u[i] / x[i]);
    const double r = median(ratio);
    C.push_back({4, "loss ordering (L^u vs L^x trajectory MSE)", r >= 10.0,
                 "median ratio " + fmt(r, "%.3g") + " (need >= 10); L^x " + fmt(median(x)) +
                     ", L^u " + fmt(median(u))});
  }
  {
    const double px = median(per_seed("plannetx", ds)), bc = median(per_seed("bc", ds));
    const bool big = static_cast<int>(suite.size()) >= 200;
    C.push_back({5, "closed-loop ordering (avg |ds| PlanNetX < BC)", px < bc && big,
                 "PlanNetX " + fmt(px) + " m, BC " + fmt(bc) + " m over " +
                     std::to_string(suite.size()) + " scenarios" +
                     (big ? "" : " (suite below 200)")});
  }
  {
    const double enc = median(per_seed("plannetx-enc", jump)),
                 px = median(per_seed("plannetx", jump));
    C.push_back({6, "encoder jump test (PlanNetXEnc < PlanNetX on jump samples)", enc < px,
                 "trajectory MSE " + fmt(enc) + " vs " + fmt(px) + " on " +
                     std::to_string(base.open.jump_samples) + " held-out jump samples"});
  }
  {
    const double red = 1.0 - static_cast<double>(pruned.policy.parameter_count()) /
                                 static_cast<double>(base.net.policy.parameter_count());
    const double a = pruned_cl.metrics.avg_ds, b = base.closed.metrics.avg_ds;
    C.push_back({7, "pruning retention", red >= 0.85 && a <= 3.0 * b,
                 "parameters -" + fmt(100 * red, "%.1f") + "% (need >= 85%), avg |ds| " + fmt(a) +
                     " vs " + fmt(b) + " m (need <= 3x)"});
  }
  {
    const double a = quant_cl.metrics.avg_ds, b = base.closed.metrics.avg_ds;
    const bool integer = qstats.float_ops_hidden == 0 && qstats.int_macs > 0;
    C.push_back({8, "quantization direction", a > b && integer,
                 "INT8 avg |ds| " + fmt(a) + " vs FP32 " + fmt(b) + " m; hidden float ops " +
                     std::to_string(qstats.float_ops_hidden) + ", int MACs " +
                     std::to_string(qstats.int_macs)});
  }
  {
    const double mpc_t = times["mpc"].second, px_t = times["plannetx"].second,
                 pr_t = times["plannetx-pruned"].second;
    C.push_back({9, "timing directions", px_t < mpc_t && pr_t < px_t && warm_iters < cold_iters,
                 "planning p95 PlanNetX " + fmt(px_t) + " ms vs MPC " + fmt(mpc_t) +
                     " ms, pruned " + fmt(pr_t) + " ms; SQP iterations warm " +
                     std::to_string(warm_iters) + " vs cold " + std::to_string(cold_iters)});
  }
  {
    int learned = 0;
    std::string where;
    for (const auto& m : models)
      if (m.spec->name == "plannetx" && m.closed.metrics.collisions > 0) {
        learned += m.closed.metrics.collisions;
        where += " closed_loop/plannetx_s" + std::to_string(m.seed_index) + "/collisions.json";
      }
    int mpc_coll = 0;
    for (const auto& l : mpc) mpc_coll += l.outcome == Outcome::kCollision;
    if (mpc_coll > 0) where += " closed_loop/mpc/collisions.json";
    C.push_back({10, "safety (no collisions, MPC and PlanNetX)", learned == 0 && mpc_coll == 0,
                 "MPC " + std::to_string(mpc_coll) + ", PlanNetX " + std::to_string(learned) +
                     " collisions over " + std::to_string(suite.size()) + " scenarios x " +
                     std::to_string(cfg.repro_seeds) + " seeds" +
                     (where.empty() ? "" : "; serialized:" + where)});
  }
  C.push_back({11, "determinism", gen_same && train_same && episode_same,
               std::string("generate ") + (gen_same ? "identical" : "DIFFERS") + ", train " +
                   (train_same ? "identical" : "DIFFERS") + ", run_episode " +
                   (episode_same ? "identical" : "DIFFERS")});

  // ---- tables and report ----------------------------------------------------
  std::string t1 = "method,policy_mse,trajectory_mse,jump_trajectory_mse\n";
  for (const auto& spec : model_specs())
    t1 += spec.label + "," + fmt(median(per_seed(spec.name, pol)), "%.6g") + "," +
          fmt(median(per_seed(spec.name, traj)), "%.6g") + "," +
          fmt(median(per_seed(spec.name, jump)), "%.6g") + "\n";
  t1 += "PlanNetX quant.," + fmt(quant_open.policy_mse, "%.6g") + "," +
        fmt(quant_open.trajectory_mse, "%.6g") + "," +
        fmt(quant_open.jump_trajectory_mse, "%.6g") + "\n";
  t1 += "PlanNetX l1-str," + fmt(pruned_open.policy_mse, "%.6g") + "," +
        fmt(pruned_open.trajectory_mse, "%.6g") + "," +
        fmt(pruned_open.jump_trajectory_mse, "%.6g") + "\n";
  detail::write_file(join(out, "table1.csv"), t1);

  std::string t2 =
      "method,avg_ds,avg_dv,avg_da,policy_time_p95_ms,planning_time_p95_ms,collisions,"
      "sqp_iterations\n";
  const auto row = [&](const std::string& label, double a, double b, double c,
                       const std::string& timing, int coll, const std::string& sqp) {
    const auto& t = times[timing];
    t2 += label + "," + fmt(a, "%.6g") + "," + fmt(b, "%.6g") + "," + fmt(c, "%.6g") + "," +
          fmt(t.first, "%.6g") + "," + fmt(t.second, "%.6g") + "," + std::to_string(coll) + "," +
          sqp + "\n";
  };
  const auto nan = std::nan("");
  int mpc_coll = 0, mpc_cold_coll = 0;
  for (const auto& l : mpc) mpc_coll += l.outcome == Outcome::kCollision;
  for (const auto& l : mpc_cold) mpc_cold_coll += l.outcome == Outcome::kCollision;
  row("MPC", nan, nan, nan, "mpc", mpc_cold_coll, std::to_string(cold_iters));
  row("MPC warm start", nan, nan, nan, "mpc-warm", mpc_coll, std::to_string(warm_iters));
  for (const auto& spec : model_specs()) {
    int coll = 0;
    for (const auto& m : models)
      if (m.spec == &spec) coll += m.closed.metrics.collisions;
    row(spec.label, median(per_seed(spec.name, ds)), median(per_seed(spec.name, dv)),
        median(per_seed(spec.name, da_)), spec.name, coll, "");
  }
  row("PlanNetX quant.", quant_cl.metrics.avg_ds, quant_cl.metrics.avg_dv,
      quant_cl.metrics.avg_da, "plannetx-quant", quant_cl.metrics.collisions, "");
  row("PlanNetX l1-str", pruned_cl.metrics.avg_ds, pruned_cl.metrics.avg_dv,
      pruned_cl.metrics.avg_da, "plannetx-pruned", pruned_cl.metrics.collisions, "");
  detail::write_file(join(out, "table2.csv"), t2);

  json crit = json::array();
  std::string md = "# Reproduction report\n\nScale: " + to_string(cfg.scale) + ", seeds " +
                   std::to_string(cfg.repro_seeds) + ", " + std::to_string(split.train.size()) +
                   "/" + std::to_string(split.valid.size()) + "/" +
                   std::to_string(split.test.size()) + " samples, " +
                   std::to_string(suite.size()) + " scenarios.\n\n";
  md += "Machine: " + machine.cpu + ", " + machine.compiler + ", SIMD " + machine.simd + ".\n\n";
  for (const auto& c : C) {
    crit.push_back({{"id", c.id}, {"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
    md += "- " + format_criterion(c) + "\n";
  }
  md += "\nCriteria 1-3 (dynamics, solver, gradients) are exact numerical checks run by the "
        "acceptance test binary.\n\n";
  md += "Closed-loop distances: " + mpc_res.metrics.convention + "\n\n";
  md += "## Open loop (test set)\n\n```\n" + t1 + "```\n\n## Closed loop and timing\n\n```\n" +
        t2 + "```\n";
  const json summary{{"scale", to_string(cfg.scale)},
                 {"seeds", cfg.repro_seeds},
                 {"samples",
                  {{"train", split.train.size()},
                   {"valid", split.valid.size()},
                   {"test", split.test.size()}}},
                 {"scenarios", suite.size()},
                 {"criteria", crit},
                 {"prune_valid_loss", {{"before", num(prune_valid_before)},
                                       {"after", num(prune_valid_after)}}},
                 {"sqp_iterations", {{"warm", warm_iters}, {"cold", cold_iters}}},
                 {"machine",
                  {{"cpu", machine.cpu},
                   {"compiler", machine.compiler},
                   {"simd", machine.simd},
                   {"hardware_threads", machine.hardware_threads}}}};
  detail::write_file(join(out, "report.json"), summary.dump(2) + "\n");
  detail::write_file(join(out, "report.md"), md);
  write_provenance(out, cfg, {"repro", {}, {}});
  log("report written to " + join(out, "report.md"));
  return report;
}

}  // namespace plannetx
