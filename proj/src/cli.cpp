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

#include "plannetx/cli.hpp"

#include <cmath>
#include <filesystem>
#include <optional>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "config_json.hpp"
#include "plannetx/dataset_io.hpp"
#include "plannetx/errors.hpp"
#include "plannetx/pipeline.hpp"
#include "plannetx/repro.hpp"
#include "weights_json.hpp"

namespace plannetx {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  int workers = 0;  // 0: available cores
  std::string scale;
  std::string arch;
  std::string loss;
};

void add_common(CLI::App* app, Common& c, bool out_required = true) {
  app->add_option("--config", c.config, "run configuration (JSON)")->check(CLI::ExistingFile);
  app->add_option("--seed", c.seed, "seed for every stage");
  auto* o = app->add_option("--out", c.out, "output directory ($PLANNETX_OUTPUT_ROOT prefixes "
                                            "relative paths)");
  if (out_required) o->required();
  app->add_option("--workers", c.workers, "worker threads (default: available cores)")
      ->check(CLI::PositiveNumber);
  app->add_option("--scale", c.scale, "default configuration")
      ->check(CLI::IsMember({"desk", "full"}));
  app->add_option("--arch", c.arch, "architecture")
      ->check(CLI::IsMember({"plannetx", "plannetx-enc", "bc"}));
  app->add_option("--loss", c.loss, "training loss")
      ->check(CLI::IsMember({"x", "u", "bc", "combined"}));
}

RunConfig resolve(const Common& c) {
  RunConfig cfg;
  if (!c.config.empty()) {
    json j;
    try {
      j = json::parse(detail::read_file(c.config));
    } catch (const json::exception& e) {
      throw ConfigError("config: not valid JSON: " + std::string(e.what()));
    }
    if (!c.scale.empty()) {
      if (j.is_object() && j.contains("scale") && j["scale"] != c.scale)
        throw ConfigError("--scale " + c.scale + " contradicts the config's scale");
      j["scale"] = c.scale;
    }
    cfg = run_config_from_json(j.dump());
  } else {
    cfg = default_config(c.scale.empty() ? Scale::kDesk : scale_from_string(c.scale));
  }
  if (c.seed) cfg.seed = *c.seed;
  cfg.train.seed = cfg.seed;
  if (!c.arch.empty()) {
    cfg.arch.arch = arch_from_string(c.arch);
    if (c.loss.empty())
      cfg.loss.kind = cfg.arch.arch == Arch::kBc ? LossKind::kBc
                      : cfg.loss.kind == LossKind::kBc ? LossKind::kStateTraj
                                                       : cfg.loss.kind;
  }
  if (!c.loss.empty()) cfg.loss.kind = loss_from_string(c.loss);
  cfg.validate();
  return cfg;
}

int workers_of(const Common& c) {
  return c.workers > 0 ? c.workers : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

std::string dataset_file(const std::string& path) {
  return fs::is_directory(path) ? (fs::path(path) / "dataset.bin").string() : path;
}

std::string suite_file(const std::string& path) {
  return fs::is_directory(path) ? (fs::path(path) / "scenarios.json").string() : path;
}

void check_horizon(const NetworkParams& net, const OcpConfig& ocp) {
  if (net.horizon != ocp.horizon || net.td != ocp.td)
    throw ConfigError("weights were trained for horizon " + std::to_string(net.horizon) +
                      " at td " + std::to_string(net.td) + ", the data uses horizon " +
                      std::to_string(ocp.horizon) + " at td " + std::to_string(ocp.td));
}

const std::vector<Sample>& pick_split(const DatasetSplit& s, const std::vector<Sample>& all,
                                      const std::string& which) {
  if (which == "train") return s.train;
  if (which == "valid") return s.valid;
  if (which == "all") return all;
  return s.test;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"PlanNetX: MPC expert, plan imitation learning and closed-loop benchmark",
               "plannetx"};
  app.require_subcommand(1);
  Provenance prov;
  prov.argv = args;

  // generate
  Common gen;
  int gen_n = -1;
  bool gen_suite = false;
  auto* g = app.add_subcommand("generate", "sample expert plans or a closed-loop scenario suite");
  add_common(g, gen);
  g->add_option("-n,--count", gen_n, "samples (default: train+valid+test) or scenarios");
  g->add_flag("--suite", gen_suite, "generate scenarios instead of a dataset");

  // train
  Common tr;
  std::string tr_data;
  TrainOptions tr_opt;
  auto* t = app.add_subcommand("train", "train a planner on a dataset");
  add_common(t, tr);
  t->add_option("--dataset", tr_data, "dataset file or generate output directory")->required();
  t->add_flag("--resume", tr_opt.resume, "continue from the checkpoint in --out");
  t->add_option("--stop-after", tr_opt.stop_after, "stop after this many epochs")
      ->check(CLI::PositiveNumber);

  // eval
  Common ev;
  std::string ev_weights, ev_quant, ev_data, ev_suite, ev_split = "test";
  auto* e = app.add_subcommand("eval", "open-loop and closed-loop metrics");
  add_common(e, ev);
  auto* ew = e->add_option("--weights", ev_weights, "weights file, or 'expert' for the replayed "
                                                    "expert plans");
  auto* eq = e->add_option("--quant", ev_quant, "quantized model file")->check(CLI::ExistingFile);
  ew->excludes(eq);
  e->add_option("--dataset", ev_data, "dataset for open-loop metrics");
  e->add_option("--suite", ev_suite, "scenario suite for closed-loop metrics");
  e->add_option("--split", ev_split, "dataset part")
      ->check(CLI::IsMember({"train", "valid", "test", "all"}));

  // compress
  Common co;
  std::string co_weights, co_data, co_mode;
  auto* c = app.add_subcommand("compress", "structured pruning or INT8 quantization");
  add_common(c, co);
  c->add_option("--weights", co_weights, "weights file")->required();
  c->add_option("--dataset", co_data, "fine-tuning / calibration data")->required();
  c->add_option("--mode", co_mode, "compression")
      ->required()
      ->check(CLI::IsMember({"prune", "quantize"}));

  // bench
  Common be;
  std::string be_target, be_weights, be_quant, be_data, be_mode = "both";
  int be_inputs = 0;
  auto* b = app.add_subcommand("bench", "worst-case inference time (p95 of per-input minima)");
  add_common(b, be);
  b->add_option("--target", be_target, "mpc or learned")
      ->required()
      ->check(CLI::IsMember({"mpc", "learned"}));
  auto* bw = b->add_option("--weights", be_weights, "weights file (learned)");
  auto* bq = b->add_option("--quant", be_quant, "quantized model file (learned)");
  bw->excludes(bq);
  b->add_option("--dataset", be_data, "inputs are drawn from the test part")->required();
  b->add_option("--mode", be_mode, "timing mode")
      ->check(CLI::IsMember({"policy", "planning", "both"}));
  b->add_option("--inputs", be_inputs, "number of inputs (default from config)")
      ->check(CLI::PositiveNumber);

  // repro
  Common re;
  auto* r = app.add_subcommand("repro", "full pipeline and acceptance report");
  add_common(r, re);

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend() - 1);
    app.parse(std::move(rev));
  } catch (const CLI::ParseError& ex) {
    const int code = app.exit(ex, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*g) {
      prov.command = "generate";
      const RunConfig cfg = resolve(gen);
      const std::string dir = resolve_output(gen.out);
      if (gen_suite) {
        const int n = gen_n < 0 ? cfg.suite_size : gen_n;
        if (n < 1) throw ConfigError("generate: -n must be >= 1");
        const auto s = stage_generate_suite(cfg, n, dir, workers_of(gen), prov);
        out << "wrote " << s.size() << " scenarios to " << dir << "\n";
      } else {
        const int n = gen_n < 0
                          ? cfg.train.train_size + cfg.train.valid_size + cfg.train.test_size
                          : gen_n;
        if (n < 1) throw ConfigError("generate: -n must be >= 1");
        const Dataset d = stage_generate(cfg, n, dir, workers_of(gen), prov);
        out << "wrote " << d.samples.size() << " samples to " << dir << " (" << d.stats.attempts
            << " draws, " << d.stats.rejected_crash << " crash-filtered, "
            << d.stats.rejected_solver << " solver rejects)\n";
      }
    } else if (*t) {
      prov.command = "train";
      const RunConfig cfg = resolve(tr);
      const std::string path = dataset_file(tr_data);
      prov.inputs = {{"dataset", path}};
      const Dataset d = load_dataset(path);
      const std::string dir = resolve_output(tr.out);
      const TrainResult res = stage_train(cfg, d, dir, tr_opt, prov);
      out << "trained " << to_string(cfg.arch.arch) << " (" << to_string(cfg.loss.kind) << ") for "
          << res.curve.train.size() << " epochs, best epoch " << res.curve.best_epoch + 1
          << ", weights in " << dir << "\n";
    } else if (*e) {
      prov.command = "eval";
      const RunConfig cfg = resolve(ev);
      if (ev_weights.empty() && ev_quant.empty())
        throw ConfigError("eval: --weights or --quant is required");
      if (ev_data.empty() && ev_suite.empty())
        throw ConfigError("eval: --dataset or --suite is required");
      const bool expert = ev_weights == "expert";
      std::optional<NetworkParams> net;
      std::optional<QuantModel> quant;
      if (!ev_quant.empty()) {
        quant = load_quant(ev_quant);
        prov.inputs.push_back({"quant", ev_quant});
      } else if (!expert) {
        net = load_weights(ev_weights);
        prov.inputs.push_back({"weights", ev_weights});
      }
      const std::string dir = resolve_output(ev.out);
      json metrics{{"open_loop", nullptr}, {"closed_loop", nullptr}};
      if (!ev_data.empty()) {
        const std::string path = dataset_file(ev_data);
        prov.inputs.push_back({"dataset", path});
        const Dataset d = load_dataset(path);
        const auto split = split_dataset(d, cfg.train);
        const auto& samples = pick_split(split, d.samples, ev_split);
        if (samples.empty()) throw ConfigError("eval: the selected dataset part is empty");
        OpenLoopMetrics m;
        if (net) {
          check_horizon(*net, d.ocp);
          m = open_loop_metrics(*net, samples);
        } else if (quant) {
          check_horizon(quant->base, d.ocp);
          m = open_loop_metrics(quant_planner(*quant), samples);
        } else {
          m = open_loop_metrics(expert_planner(d.ocp.td), samples);
        }
        metrics["open_loop"] = json::parse(open_loop_json(m));
        metrics["open_loop"]["split"] = ev_split;
        out << "open loop (" << ev_split << ", " << m.samples << " samples): trajectory MSE "
            << m.trajectory_mse << ", policy MSE " << m.policy_mse << "\n";
      }
      if (!ev_suite.empty()) {
        const std::string path = suite_file(ev_suite);
        prov.inputs.push_back({"suite", path});
        const auto suite = scenarios_from_json(detail::read_file(path));
        if (net) check_horizon(*net, cfg.ocp);
        if (quant) check_horizon(quant->base, cfg.ocp);
        const int w = workers_of(ev);
        const auto mpc = run_mpc_suite(cfg, suite, true, w);
        ControllerFactory make;
        const OcpConfig ocp = cfg.ocp;
        if (net) {
          const NetworkParams n = *net;
          make = [n] { return std::make_unique<LearnedController>(n, to_string(n.arch)); };
        } else if (quant) {
          const QuantModel q = *quant;
          make = [q] { return std::make_unique<QuantController>(q); };
        } else {
          make = [ocp] { return std::make_unique<MpcController>(ocp, true); };
        }
        const ClosedLoopResult res = closed_loop(make, suite, mpc, cfg.ocp, w);
        write_closed_loop(dir, res, suite, mpc);
        metrics["closed_loop"] = json::parse(metrics_json(res.metrics));
        out << "closed loop (" << suite.size() << " scenarios): avg |ds| " << res.metrics.avg_ds
            << " m, avg |dv| " << res.metrics.avg_dv << " m/s, avg |da| " << res.metrics.avg_da
            << " m/s^2, collisions " << res.metrics.collisions << "\n";
      }
      write_provenance(dir, cfg, prov);
      detail::write_file((fs::path(dir) / "metrics.json").string(), metrics.dump(2) + "\n");
    } else if (*c) {
      prov.command = "compress";
      const RunConfig cfg = resolve(co);
      const NetworkParams net = load_weights(co_weights);
      const std::string path = dataset_file(co_data);
      prov.inputs = {{"weights", co_weights}, {"dataset", path}};
      const Dataset d = load_dataset(path);
      check_horizon(net, d.ocp);
      const std::string dir = resolve_output(co.out);
      if (co_mode == "prune") {
        RunConfig pc = cfg;
        pc.arch.arch = net.arch;
        if (co.loss.empty())
          pc.loss.kind = net.arch == Arch::kBc ? LossKind::kBc
                         : pc.loss.kind == LossKind::kBc ? LossKind::kStateTraj
                                                         : pc.loss.kind;
        pc.validate();
        const PruneResult res = stage_prune(pc, net, d, dir, prov);
        out << "pruned " << res.original_params << " -> " << res.params.policy.parameter_count()
            << " policy parameters, weights in " << dir << "\n";
      } else {
        const QuantModel q = stage_quantize(cfg, net, d, dir, prov);
        out << "quantized " << q.layers.size() << " layers, model in " << dir << "\n";
      }
    } else if (*b) {
      prov.command = "bench";
      RunConfig cfg = resolve(be);
      if (be_inputs > 0) cfg.bench.inputs = be_inputs;
      const std::string path = dataset_file(be_data);
      prov.inputs = {{"dataset", path}};
      const Dataset d = load_dataset(path);
      const auto split = split_dataset(d, cfg.train);
      const auto inputs = bench_inputs(split.test.empty() ? d.samples : split.test,
                                       static_cast<std::size_t>(cfg.bench.inputs));
      const std::string dir = resolve_output(be.out);
      std::vector<TimingMode> modes;
      if (be_mode != "planning") modes.push_back(TimingMode::kPolicy);
      if (be_mode != "policy") modes.push_back(TimingMode::kPlanning);
      std::vector<TimingResult> results;
      if (be_target == "mpc") {
        check_ocp_compatible(d.ocp, cfg.ocp);
        TimingResult res = bench_mpc(cfg.ocp, inputs, cfg.bench.repeats, cfg.bench.warmup);
        for (TimingMode m : modes) {
          res.mode = m;  // one solve answers both
          results.push_back(res);
        }
      } else if (!be_quant.empty()) {
        prov.inputs.push_back({"quant", be_quant});
        const QuantModel q = load_quant(be_quant);
        check_horizon(q.base, d.ocp);
        for (TimingMode m : modes)
          results.push_back(bench_quant(q, inputs, m, cfg.bench.repeats, cfg.bench.warmup,
                                        to_string(q.base.arch) + "-quant"));
      } else {
        if (be_weights.empty()) throw ConfigError("bench: learned target needs --weights or --quant");
        prov.inputs.push_back({"weights", be_weights});
        const NetworkParams net = load_weights(be_weights);
        check_horizon(net, d.ocp);
        for (TimingMode m : modes)
          results.push_back(bench_network(net, inputs, m, cfg.bench.repeats, cfg.bench.warmup,
                                          to_string(net.arch)));
      }
      write_provenance(dir, cfg, prov);
      for (const auto& res : results) {
        write_timing(dir, res);
        out << res.target << " " << to_string(res.mode) << ": p95 " << res.p95_ms
            << " ms, median " << res.median_ms << " ms (" << res.per_input_ms.size()
            << " inputs x " << res.repeats << " repeats, " << res.machine.cpu << ")\n";
      }
    } else if (*r) {
      prov.command = "repro";
      const RunConfig cfg = resolve(re);
      const std::string dir = resolve_output(re.out);
      const ReproReport rep = run_repro(cfg, dir, workers_of(re), err);
      for (const auto& cr : rep.criteria) out << format_criterion(cr) << "\n";
      out << "report: " << (fs::path(dir) / "report.md").string() << "\n";
    }
  } catch (const ConfigError& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitUsage;
  } catch (const NumericalFailure& ex) {
    err << "numerical failure: " << ex.what() << "\n";
    return kExitNumerical;
  } catch (const std::logic_error& ex) {  // ContractViolation, invalid_argument
    err << "contract violation: " << ex.what() << "\n";
    return kExitContract;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitError;
  }
  return kExitOk;
}

}  // namespace plannetx
