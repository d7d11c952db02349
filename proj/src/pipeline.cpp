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

#include "plannetx/pipeline.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <set>

#include <json.hpp>

#include "config_json.hpp"
#include "plannetx/dataset_io.hpp"
#include "plannetx/policy.hpp"
#include "rng.hpp"
#include "weights_json.hpp"

namespace plannetx {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string join(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

// Written next to the target and renamed, so a reader never sees half a file.
void write_atomic(const std::string& path, const std::string& text) {
  const std::string tmp = path + ".tmp";
  detail::write_file(tmp, text);
  fs::rename(tmp, path);
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

json parse(const std::string& text) { return json::parse(text); }

}  // namespace

std::string resolve_output(const std::string& path) {
  const char* root = std::getenv("PLANNETX_OUTPUT_ROOT");
  if (root == nullptr || *root == '\0' || fs::path(path).is_absolute()) return path;
  return (fs::path(root) / path).string();
}

void write_provenance(const std::string& dir, const RunConfig& cfg, const Provenance& prov) {
  fs::create_directories(dir);
  detail::write_file(join(dir, "run_config.json"), run_config_json(cfg));
  json inputs = json::array();
  for (const auto& [role, path] : prov.inputs) {
    const std::string bytes = detail::read_file(path);
    inputs.push_back({{"role", role},
                      {"path", path},
                      {"bytes", bytes.size()},
                      {"fnv1a64", hex(fnv1a(bytes))}});
  }
  const json j{{"command", prov.command},
               {"argv", prov.argv},
               {"seed", cfg.seed},
               {"scale", to_string(cfg.scale)},
               {"inputs", inputs},
               {"config", "run_config.json"}};
  detail::write_file(join(dir, "provenance.json"), j.dump(2) + "\n");
}

DatasetSplit split_dataset(const Dataset& d, const TrainConfig& t) {
  const double total = static_cast<double>(t.train_size) + t.valid_size + t.test_size;
  const auto n = d.samples.size();
  const auto nv = static_cast<std::size_t>(std::floor(n * (t.valid_size / total)));
  const auto nt = static_cast<std::size_t>(std::floor(n * (t.test_size / total)));
  const std::size_t ntr = n - nv - nt;
  DatasetSplit s;
  s.train.assign(d.samples.begin(), d.samples.begin() + ntr);
  s.valid.assign(d.samples.begin() + ntr, d.samples.begin() + ntr + nv);
  s.test.assign(d.samples.begin() + ntr + nv, d.samples.end());
  return s;
}

// ---- generate ---------------------------------------------------------------

Dataset stage_generate(const RunConfig& cfg, int n, const std::string& out, int workers,
                       const Provenance& prov) {
  if (n < 1) throw ConfigError("generate: the sample count must be >= 1");
  Dataset d = sample_dataset(n, cfg.ocp, cfg.seed, cfg.sampling, workers);
  write_provenance(out, cfg, prov);
  save_dataset(d, join(out, "dataset.bin"));
  const json manifest{{"samples", d.samples.size()},
                      {"seed", d.seed},
                      {"attempts", d.stats.attempts},
                      {"rejected_crash", d.stats.rejected_crash},
                      {"rejected_solver", d.stats.rejected_solver},
                      {"speed_changes", d.stats.speed_changes},
                      {"cut_ins", d.stats.cut_ins}};
  detail::write_file(join(out, "manifest.json"), manifest.dump(2) + "\n");
  return d;
}

std::vector<Scenario> stage_generate_suite(const RunConfig& cfg, int n, const std::string& out,
                                           int workers, const Provenance& prov) {
  if (n < 1) throw ConfigError("generate: the scenario count must be >= 1");
  auto suite = generate_suite(n, cfg.seed, cfg.scenarios, cfg.ocp, workers);
  write_provenance(out, cfg, prov);
  detail::write_file(join(out, "scenarios.json"), scenarios_json(suite));
  std::map<std::string, int> families;
  for (const auto& s : suite) ++families[to_string(s.family)];
  const json manifest{{"scenarios", suite.size()},
                      {"seed", cfg.seed},
                      {"families", families},
                      {"crash_filter", cfg.scenarios.filter},
                      {"crash_slack", cfg.scenarios.crash_slack}};
  detail::write_file(join(out, "manifest.json"), manifest.dump(2) + "\n");
  return suite;
}

// ---- train ------------------------------------------------------------------

namespace {

std::string curve_csv(const TrainCurve& c) {
  std::string s = "epoch,train,valid\n";
  char buf[96];
  for (std::size_t e = 0; e < c.train.size(); ++e) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", e + 1, c.train[e], c.valid[e]);
    s += buf;
  }
  return s;
}

}  // namespace

TrainResult stage_train(const RunConfig& cfg, const Dataset& data, const std::string& out,
                        const TrainOptions& opt, const Provenance& prov) {
  check_ocp_compatible(data.ocp, cfg.ocp);
  const DatasetSplit split = split_dataset(data, cfg.train);
  if (split.train.empty() || split.valid.empty())
    throw ConfigError("train: dataset too small for a train/valid split");
  const std::string state_path = join(out, "train_state.json");

  std::optional<TrainState> resume;
  if (opt.resume && fs::exists(state_path)) {
    const std::string stored = detail::read_file(join(out, "run_config.json"));
    if (stored != run_config_json(cfg))
      throw ConfigError("train: cannot resume, the configuration changed:\n" +
                        detail::json_diff(parse(stored), parse(run_config_json(cfg))));
    resume = load_train_state_json(detail::read_file(state_path));
  }
  write_provenance(out, cfg, prov);

  const EpochHook hook = [&](const TrainState& st) {
    write_atomic(state_path, save_train_state_json(st));
    write_atomic(join(out, "curve.csv"), curve_csv(st.curve));
    return !(opt.stop_after > 0 && st.epoch >= opt.stop_after);
  };
  TrainResult r;
  if (resume) {
    const NetworkParams init = resume->params;
    r = train_from(init, split.train, split.valid, cfg.loss, cfg.train, hook, std::move(resume));
  } else {
    r = train(split.train, split.valid, cfg.arch, cfg.loss, cfg.train, cfg.ocp, hook);
  }

  detail::write_file(join(out, "curve.csv"), curve_csv(r.curve));
  const int done = static_cast<int>(r.curve.train.size());
  const json summary{
      {"arch", to_string(r.final.arch)},
      {"loss", to_string(cfg.loss.kind)},
      {"epochs_completed", done},
      {"complete", done == cfg.train.epochs && !r.diverged},
      {"best_epoch", r.curve.best_epoch + 1},
      {"best_valid", r.curve.best_epoch >= 0 ? r.curve.valid[r.curve.best_epoch] : NAN},
      {"parameters", r.final.parameter_count()},
      {"train_samples", split.train.size()},
      {"valid_samples", split.valid.size()},
      {"diverged", r.diverged},
      {"divergence", r.divergence}};
  detail::write_file(join(out, "summary.json"), summary.dump(2) + "\n");
  if (r.diverged) throw NumericalFailure("train: " + r.divergence);
  save_weights(r.best, join(out, "weights_best.json"));
  save_weights(r.final, join(out, "weights_final.json"));
  return r;
}

// ---- evaluate ---------------------------------------------------------------

Planner network_planner(const NetworkParams& net) {
  return [net](const Sample& s) { return rollout(net, s.x0, s.params); };
}

Planner quant_planner(const QuantModel& q) {
  auto model = std::make_shared<PolicyModel<float>>(q.base);
  auto qm = std::make_shared<QuantModel>(q);
  return [model, qm](const Sample& s) {
    Eigen::MatrixXf X, U;
    model->plan_with([&](const Eigen::MatrixXf& in) { return qm->forward(in); }, s.x0, s.params,
                     model->horizon(), X, U);
    return Rollout{X.cast<double>(), U.cast<double>()};
  };
}

Planner expert_planner(double td) {
  const DiscreteDynamics dyn = discretize<double>(td);
  return [dyn](const Sample& s) {
    Rollout r;
    r.U = controls_from_states(dyn, s.X_star);
    r.X.resize(4, r.U.size() + 1);
    r.X.col(0) = s.x0;
    for (Eigen::Index k = 0; k < r.U.size(); ++k)
      r.X.col(k + 1) = step(dyn, State(r.X.col(k)), r.U(k));
    return r;
  };
}

OpenLoopMetrics open_loop_metrics(const Planner& plan, const std::vector<Sample>& data) {
  if (data.empty()) throw std::invalid_argument("open_loop_metrics: empty dataset");
  LossConfig undiscounted;
  undiscounted.gamma = 1.0;
  OpenLoopMetrics m;
  double traj = 0.0, pol = 0.0, jump = 0.0;
  bool has_plan = true;
  for (const Sample& s : data) {
    const Rollout r = plan(s);
    pol += loss_bc(r.U(0), s.U_star(0));
    if (r.U.size() != s.U_star.size()) {
      has_plan = false;
      continue;
    }
    const double l = loss_state_traj(r.X, s.X_star, undiscounted);
    traj += l;
    if (s.cut_in_stage >= 0) {
      jump += l;
      ++m.jump_samples;
    }
  }
  m.samples = static_cast<int>(data.size());
  m.policy_mse = pol / m.samples;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  m.trajectory_mse = has_plan ? traj / m.samples : nan;
  m.jump_trajectory_mse = has_plan && m.jump_samples > 0 ? jump / m.jump_samples : nan;
  if (!has_plan) m.jump_samples = 0;
  return m;
}

OpenLoopMetrics open_loop_metrics(const NetworkParams& net, const std::vector<Sample>& data) {
  if (data.empty()) throw std::invalid_argument("open_loop_metrics: empty dataset");
  OpenLoopMetrics m;
  m.samples = static_cast<int>(data.size());
  m.policy_mse = policy_mse(net, data);
  m.trajectory_mse = trajectory_mse(net, data);
  std::vector<Sample> jumps;
  for (const Sample& s : data)
    if (s.cut_in_stage >= 0) jumps.push_back(s);
  m.jump_samples = net.arch == Arch::kBc ? 0 : static_cast<int>(jumps.size());
  m.jump_trajectory_mse = m.jump_samples > 0 ? trajectory_mse(net, jumps)
                                             : std::numeric_limits<double>::quiet_NaN();
  return m;
}

std::string open_loop_json(const OpenLoopMetrics& m) {
  const auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  return json{{"trajectory_mse", num(m.trajectory_mse)},
              {"policy_mse", num(m.policy_mse)},
              {"samples", m.samples},
              {"jump_trajectory_mse", num(m.jump_trajectory_mse)},
              {"jump_samples", m.jump_samples},
              {"trajectory_mse_definition",
               "mean over samples of (1/N) sum_k |x_hat_k - x*_k|^2, undiscounted, W = I"}}
      .dump(2);
}

std::vector<EpisodeLog> run_mpc_suite(const RunConfig& cfg, const std::vector<Scenario>& suite,
                                      bool warm, int workers) {
  const OcpConfig ocp = cfg.ocp;
  return run_suite(
      suite, [ocp, warm] { return std::make_unique<MpcController>(ocp, warm); }, ocp, workers);
}

ClosedLoopResult closed_loop(const ControllerFactory& make, const std::vector<Scenario>& suite,
                             const std::vector<EpisodeLog>& mpc, const OcpConfig& ocp,
                             int workers) {
  ClosedLoopResult r;
  r.logs = run_suite(suite, make, ocp, workers);
  r.metrics = compute_metrics(r.logs, mpc);
  return r;
}

void write_closed_loop(const std::string& dir, const ClosedLoopResult& r,
                       const std::vector<Scenario>& suite, const std::vector<EpisodeLog>& mpc) {
  fs::create_directories(join(dir, "plots"));
  const std::string controller = r.logs.empty() ? "" : r.logs.front().controller;
  json failed = json::array();
  long sqp = 0, fallback = 0;
  std::vector<Scenario> bad;
  std::vector<EpisodeLog> bad_logs;
  std::string csv = "scenario_id,family,outcome,steps,ds,dv,da,sqp_iterations,fallback_steps\n";
  std::set<ScenarioFamily> plotted;
  char buf[256];
  for (std::size_t i = 0; i < r.logs.size(); ++i) {
    const EpisodeLog& l = r.logs[i];
    sqp += l.total_sqp_iterations;
    fallback += l.fallback_steps;
    if (l.outcome == Outcome::kFailed) failed.push_back(l.scenario_id);
    if (l.outcome != Outcome::kCompleted) {
      bad.push_back(suite[i]);
      bad_logs.push_back(l);
    }
    std::string ds = "", dv = "", da = "";
    if (l.outcome == Outcome::kCompleted && mpc[i].outcome == Outcome::kCompleted) {
      const auto d = episode_distance(l, mpc[i]);
      std::snprintf(buf, sizeof buf, "%.9g", d.ds);
      ds = buf;
      std::snprintf(buf, sizeof buf, "%.9g", d.dv);
      dv = buf;
      std::snprintf(buf, sizeof buf, "%.9g", d.da);
      da = buf;
      if (plotted.insert(suite[i].family).second)
        detail::write_file(join(join(dir, "plots"), l.scenario_id + ".csv"), plot_csv(mpc[i], l));
    }
    std::snprintf(buf, sizeof buf, "%s,%s,%s,%d,%s,%s,%s,%d,%d\n", l.scenario_id.c_str(),
                  to_string(suite[i].family).c_str(), to_string(l.outcome).c_str(),
                  static_cast<int>(l.steps.size()), ds.c_str(), dv.c_str(), da.c_str(),
                  l.total_sqp_iterations, l.fallback_steps);
    csv += buf;
  }
  detail::write_file(join(dir, "episodes.csv"), csv);
  json j{{"controller", controller},
         {"baseline", mpc.empty() ? "" : mpc.front().controller},
         {"metrics", parse(metrics_json(r.metrics))},
         {"failed", failed},
         {"total_sqp_iterations", sqp},
         {"fallback_steps", fallback}};
  detail::write_file(join(dir, "closed_loop.json"), j.dump(2) + "\n");
  if (!bad.empty()) {
    json c{{"scenarios", parse(scenarios_json(bad))}, {"episodes", json::array()}};
    for (const auto& l : bad_logs) c["episodes"].push_back(parse(episode_json(l, false)));
    detail::write_file(join(dir, "collisions.json"), c.dump(1) + "\n");
  }
}

// ---- compress ---------------------------------------------------------------

namespace {

LossConfig loss_for(const RunConfig& cfg, const NetworkParams& net) {
  LossConfig l = cfg.loss;
  if ((net.arch == Arch::kBc) != (l.kind == LossKind::kBc))
    throw ConfigError("the configured loss '" + to_string(l.kind) +
                      "' does not fit the weights' architecture '" + to_string(net.arch) + "'");
  return l;
}

}  // namespace

PruneResult stage_prune(const RunConfig& cfg, const NetworkParams& net, const Dataset& data,
                        const std::string& out, const Provenance& prov) {
  check_ocp_compatible(data.ocp, cfg.ocp);
  const LossConfig loss = loss_for(cfg, net);
  const DatasetSplit split = split_dataset(data, cfg.train);
  if (split.train.empty() || split.valid.empty())
    throw ConfigError("prune: dataset too small for a train/valid split");
  const FineTune finetune = [&](const NetworkParams& p, int round) {
    if (cfg.prune.finetune_epochs == 0) return p;
    TrainConfig t = cfg.train;
    t.epochs = cfg.prune.finetune_epochs;
    t.seed = derive_seed(cfg.seed, 0x9a7e, static_cast<std::uint64_t>(round));
    TrainResult r = train_from(p, split.train, split.valid, loss, t);
    if (r.diverged) throw NumericalFailure("prune: fine-tuning diverged: " + r.divergence);
    return r.best;
  };
  PruneResult res = prune_structured(net, cfg.prune, finetune);
  write_provenance(out, cfg, prov);
  save_weights(res.params, join(out, "weights.json"));
  json rounds = json::array();
  for (const auto& r : res.rounds)
    rounds.push_back({{"round", r.round}, {"params", r.params}, {"widths", r.widths}});
  const json report{{"original_params", res.original_params},
                    {"final_params", res.params.policy.parameter_count()},
                    {"reduction", 1.0 - static_cast<double>(res.params.policy.parameter_count()) /
                                            static_cast<double>(res.original_params)},
                    {"valid_loss_before", dataset_loss(net, split.valid, loss)},
                    {"valid_loss_after", dataset_loss(res.params, split.valid, loss)},
                    {"rounds", rounds}};
  detail::write_file(join(out, "prune_report.json"), report.dump(2) + "\n");
  return res;
}

QuantModel stage_quantize(const RunConfig& cfg, const NetworkParams& net, const Dataset& data,
                          const std::string& out, const Provenance& prov) {
  check_ocp_compatible(data.ocp, cfg.ocp);
  const DatasetSplit split = split_dataset(data, cfg.train);
  const std::size_t n =
      std::min<std::size_t>(static_cast<std::size_t>(cfg.calibration_samples), split.valid.size());
  const std::vector<Sample> calib(split.valid.begin(), split.valid.begin() + n);
  QuantModel q = calibrate_quantize(net, calib);
  write_provenance(out, cfg, prov);
  save_quant(q, join(out, "quant.json"));
  json sites = json::array();
  for (const auto& s : q.calibration)
    sites.push_back({{"min", s.min}, {"max", s.max}, {"degenerate", s.degenerate}});
  const json report{{"calibration_samples", n},
                    {"sites", sites},
                    {"diagnostics", q.diagnostics}};
  detail::write_file(join(out, "quant_report.json"), report.dump(2) + "\n");
  return q;
}

// ---- bench ------------------------------------------------------------------

void write_timing(const std::string& dir, const TimingResult& r) {
  fs::create_directories(dir);
  const std::string stem = "timing_" + r.target + "_" + to_string(r.mode);
  detail::write_file(join(dir, stem + ".json"), timing_json(r) + "\n");
  detail::write_file(join(dir, stem + ".csv"), timing_csv(r));
}

}  // namespace plannetx
