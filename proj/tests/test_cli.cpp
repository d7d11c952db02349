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

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <json.hpp>
#include <sstream>
#include <unistd.h>

#include "plannetx/cli.hpp"
#include "plannetx/config.hpp"
#include "plannetx/nn.hpp"

using namespace plannetx;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "plannetx");
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void spit(const fs::path& p, const std::string& s) { std::ofstream(p) << s; }

struct TempDir {
  fs::path p = fs::temp_directory_path() / ("plannetx_cli_" + std::to_string(getpid()));
  TempDir() {
    fs::remove_all(p);
    fs::create_directories(p);
  }
  ~TempDir() { fs::remove_all(p); }
};

const fs::path& root() {
  static const TempDir t;
  return t.p;
}

std::string path(const std::string& name) { return (root() / name).string(); }

// Small sizes keep each command to about a second.
const std::string& tiny_config() {
  static const std::string p = [] {
    const std::string f = path("tiny.json");
    spit(f, R"({"train": {"epochs": 5, "train_size": 80, "valid_size": 10, "test_size": 10,
                          "batch_size": 16},
               "model": {"width": 32},
               "bench": {"inputs": 12, "repeats": 2, "warmup": 1},
               "scenarios": {"suite_size": 6},
               "prune": {"rounds": 2, "finetune_epochs": 1, "target_fraction": 0.5}})");
    return f;
  }();
  return p;
}

const std::string& dataset_dir() {
  static const std::string d = [] {
    const std::string out = path("gen");
    const Run r = cli({"generate", "--config", tiny_config(), "--out", out, "-n", "100"});
    REQUIRE(r.code == 0);
    return out;
  }();
  return d;
}

const std::string& weights() {
  static const std::string w = [] {
    const std::string out = path("train");
    const Run r = cli({"train", "--config", tiny_config(), "--dataset", dataset_dir(), "--out", out});
    REQUIRE(r.code == 0);
    return out + "/weights_best.json";
  }();
  return w;
}

std::set<std::string> keys(const json& j) {
  std::set<std::string> k;
  for (const auto& [key, v] : j.items()) k.insert(key);
  return k;
}

}  // namespace

TEST_CASE("run configuration round trip and scale defaults") {
  const RunConfig desk = default_config(Scale::kDesk);
  CHECK(desk.arch.width == 128);
  CHECK(desk.train.epochs == 50);
  CHECK(desk.train.train_size == 10000);
  const RunConfig full = default_config(Scale::kFull);
  CHECK(full.arch.width == 512);
  CHECK(full.train.epochs == 300);
  CHECK(full.train.train_size == 100000);
  for (const RunConfig& c : {desk, full})
    CHECK(run_config_json(run_config_from_json(run_config_json(c))) == run_config_json(c));

  const RunConfig o = run_config_from_json(R"({"scale": "full", "seed": 7, "model": {"depth": 2}})");
  CHECK(o.arch.width == 512);
  CHECK(o.arch.depth == 2);
  CHECK(o.seed == 7);
  CHECK(o.train.seed == 7);
  CHECK_THROWS_AS(run_config_from_json(R"({"train": {"seed": 3}})"), ConfigError);
  CHECK_THROWS_AS(run_config_from_json(R"({"ocp": {"horizon": -1}})"), ConfigError);
  CHECK_THROWS_AS(run_config_from_json(R"({"model": {"arch": "bc"}})"), ConfigError);
  CHECK_THROWS_AS(run_config_from_json("[1]"), ConfigError);
  CHECK_THROWS_AS(run_config_from_json(R"({"scale": "huge"})"), ConfigError);
}

TEST_CASE("zero samples is a usage error") {
  const Run r = cli({"generate", "--config", tiny_config(), "--out", path("g0"), "-n", "0"});
  CHECK(r.code == kExitUsage);
  CHECK(!fs::exists(path("g0") + "/dataset.bin"));
}

TEST_CASE("argument errors exit with the usage code") {
  CHECK(cli({}).code == kExitUsage);
  CHECK(cli({"train", "--dataset", "x"}).code == kExitUsage);  // no --out
  CHECK(cli({"train", "--out", "x", "--dataset", "x", "--arch", "mlp"}).code == kExitUsage);
  CHECK(cli({"--help"}).code == kExitOk);
}

TEST_CASE("generate is reproducible and reports its rejections") {
  const std::string a = path("gen_a"), b = path("gen_b");
  REQUIRE(cli({"generate", "--config", tiny_config(), "--out", a, "-n", "20", "--seed", "4"}).code ==
          0);
  REQUIRE(cli({"generate", "--config", tiny_config(), "--out", b, "-n", "20", "--seed", "4",
               "--workers", "2"})
              .code == 0);
  CHECK(slurp(a + "/dataset.bin") == slurp(b + "/dataset.bin"));
  CHECK(slurp(a + "/manifest.json") == slurp(b + "/manifest.json"));
  const json m = json::parse(slurp(a + "/manifest.json"));
  CHECK(m.at("samples") == 20);
  CHECK(m.at("attempts").get<int>() >=
        20 + m.at("rejected_crash").get<int>() + m.at("rejected_solver").get<int>());
  const json rc = json::parse(slurp(a + "/run_config.json"));
  CHECK(rc.at("seed") == 4);
  const json pv = json::parse(slurp(a + "/provenance.json"));
  CHECK(pv.at("command") == "generate");
  CHECK(pv.at("seed") == 4);
}

TEST_CASE("unknown configuration keys are rejected") {
  const std::string f = path("bad.json");
  spit(f, R"({"train": {"epochs": 2, "epoch": 3}})");
  const Run r = cli({"generate", "--config", f, "--out", path("bad"), "-n", "2"});
  CHECK(r.code == kExitUsage);
  CHECK(r.err.find("epoch") != std::string::npos);
  spit(f, R"({"trian": {}})");
  CHECK(cli({"generate", "--config", f, "--out", path("bad"), "-n", "2"}).code == kExitUsage);
  CHECK(cli({"train", "--config", tiny_config(), "--dataset", dataset_dir(), "--out",
             path("bad"), "--arch", "bc", "--loss", "x"})
            .code == kExitUsage);
}

TEST_CASE("smoke training run lowers the training loss") {
  weights();
  const std::string curve = slurp(root() / "train/curve.csv");
  std::istringstream in(curve);
  std::string line;
  std::getline(in, line);
  CHECK(line == "epoch,train,valid");
  std::vector<double> train;
  while (std::getline(in, line)) train.push_back(std::stod(line.substr(line.find(',') + 1)));
  REQUIRE(train.size() == 5);
  CHECK(train.back() < train.front());
  const json s = json::parse(slurp(root() / "train/summary.json"));
  CHECK(s.at("complete") == true);
  CHECK(fs::exists(root() / "train/weights_final.json"));
  CHECK(fs::exists(root() / "train/run_config.json"));
}

TEST_CASE("interrupted training resumes onto the uninterrupted curve") {
  weights();
  const std::string out = path("resume");
  const Run part = cli({"train", "--config", tiny_config(), "--dataset", dataset_dir(), "--out",
                        out, "--stop-after", "2"});
  REQUIRE(part.code == 0);
  CHECK(json::parse(slurp(out + "/summary.json")).at("complete") == false);
  const Run rest =
      cli({"train", "--config", tiny_config(), "--dataset", dataset_dir(), "--out", out, "--resume"});
  REQUIRE(rest.code == 0);
  CHECK(slurp(out + "/curve.csv") == slurp(root() / "train/curve.csv"));
  CHECK(slurp(out + "/weights_final.json") == slurp(root() / "train/weights_final.json"));
  CHECK(slurp(out + "/weights_best.json") == slurp(root() / "train/weights_best.json"));

  // A changed configuration cannot be resumed.
  const Run other = cli({"train", "--config", tiny_config(), "--dataset", dataset_dir(), "--out",
                         out, "--resume", "--seed", "3"});
  CHECK(other.code == kExitUsage);
  CHECK(other.err.find("seed") != std::string::npos);
}

TEST_CASE("training refuses a dataset built for another OCP") {
  const std::string f = path("other_ocp.json");
  spit(f, R"({"ocp": {"d_min": 7.5}, "train": {"epochs": 1}})");
  const Run r = cli({"train", "--config", f, "--dataset", dataset_dir(), "--out", path("mismatch")});
  CHECK(r.code == kExitUsage);
  CHECK(r.err.find("d_min") != std::string::npos);
}

TEST_CASE("bc architecture trains a first-control head") {
  const std::string out = path("bc");
  const Run r = cli({"train", "--config", tiny_config(), "--dataset", dataset_dir(), "--out", out,
                     "--arch", "bc"});
  REQUIRE(r.code == 0);
  const NetworkParams net = load_weights(out + "/weights_best.json");
  CHECK(net.arch == Arch::kBc);
  CHECK(json::parse(slurp(out + "/summary.json")).at("loss") == "bc");
  const Run e = cli({"eval", "--config", tiny_config(), "--weights", out + "/weights_best.json",
                     "--dataset", dataset_dir(), "--out", path("bc_eval")});
  REQUIRE(e.code == 0);
  const json m = json::parse(slurp(root() / "bc_eval/metrics.json"));
  CHECK(m.at("open_loop").at("trajectory_mse").is_null());
  CHECK(m.at("open_loop").at("policy_mse").get<double>() >= 0.0);
}

TEST_CASE("divergent training exits with the numerical failure code") {
  const std::string f = path("diverge.json");
  spit(f, R"({"train": {"epochs": 3, "train_size": 80, "valid_size": 10, "test_size": 10,
                        "batch_size": 16, "lr": 1e6}, "model": {"width": 32}})");
  const Run r = cli({"train", "--config", f, "--dataset", dataset_dir(), "--out", path("div")});
  CHECK(r.code == kExitNumerical);
  CHECK(fs::exists(root() / "div/curve.csv"));
}

TEST_CASE("replayed expert plans have zero trajectory error") {
  const Run r = cli({"eval", "--config", tiny_config(), "--weights", "expert", "--dataset",
                     dataset_dir(), "--split", "all", "--out", path("expert")});
  REQUIRE(r.code == 0);
  const json m = json::parse(slurp(root() / "expert/metrics.json"));
  CHECK(m.at("open_loop").at("samples") == 100);
  CHECK(m.at("open_loop").at("trajectory_mse").get<double>() < 1e-10);
  CHECK(m.at("open_loop").at("policy_mse").get<double>() < 1e-10);
}

TEST_CASE("evaluation reports every table column and refuses missing weights") {
  const std::string suite = path("suite");
  REQUIRE(cli({"generate", "--config", tiny_config(), "--suite", "--out", suite}).code == 0);
  const Run r = cli({"eval", "--config", tiny_config(), "--weights", weights(), "--dataset",
                     dataset_dir(), "--suite", suite, "--out", path("eval")});
  REQUIRE(r.code == 0);
  const json m = json::parse(slurp(root() / "eval/metrics.json"));
  for (const char* k : {"trajectory_mse", "policy_mse", "jump_trajectory_mse"})
    CHECK(m.at("open_loop").contains(k));
  for (const char* k : {"avg_ds", "avg_dv", "avg_da", "collisions", "convention"})
    CHECK(m.at("closed_loop").contains(k));
  CHECK(m.at("closed_loop").at("episodes") == 6);
  CHECK(fs::exists(root() / "eval/episodes.csv"));
  CHECK(!fs::is_empty(root() / "eval/plots"));

  const Run miss = cli({"eval", "--config", tiny_config(), "--weights", path("none.json"),
                        "--dataset", dataset_dir(), "--out", path("eval_miss")});
  CHECK(miss.code == kExitUsage);
  CHECK(miss.err.find("none.json") != std::string::npos);
}

TEST_CASE("weights for another horizon are refused") {
  const std::string f = path("h20.json");
  spit(f, R"({"ocp": {"horizon": 20}})");
  const std::string d20 = path("gen20");
  REQUIRE(cli({"generate", "--config", f, "--out", d20, "-n", "3"}).code == 0);
  const Run r = cli({"eval", "--config", f, "--weights", weights(), "--dataset", d20, "--split",
                     "all", "--out", path("h20_eval")});
  CHECK(r.code == kExitUsage);
  CHECK(r.err.find("horizon") != std::string::npos);
}

TEST_CASE("prune then evaluate runs end to end") {
  const std::string out = path("pruned");
  const Run p = cli({"compress", "--config", tiny_config(), "--weights", weights(), "--dataset",
                     dataset_dir(), "--mode", "prune", "--out", out});
  REQUIRE(p.code == 0);
  const json rep = json::parse(slurp(out + "/prune_report.json"));
  CHECK(rep.at("final_params").get<int>() <= rep.at("original_params").get<int>() / 2);
  const Run e = cli({"eval", "--config", tiny_config(), "--weights", out + "/weights.json",
                     "--dataset", dataset_dir(), "--out", path("pruned_eval")});
  CHECK(e.code == 0);
}

TEST_CASE("quantized model loads and drives the closed loop in integer mode") {
  const std::string out = path("quant");
  REQUIRE(cli({"compress", "--config", tiny_config(), "--weights", weights(), "--dataset",
               dataset_dir(), "--mode", "quantize", "--out", out})
              .code == 0);
  const Run e = cli({"eval", "--config", tiny_config(), "--quant", out + "/quant.json", "--suite",
                     path("suite"), "--dataset", dataset_dir(), "--out", path("quant_eval")});
  REQUIRE(e.code == 0);
  const json c = json::parse(slurp(root() / "quant_eval/closed_loop.json"));
  CHECK(c.at("controller") == "learned-quant");
}

TEST_CASE("mpc and learned timings share one schema") {
  const Run a = cli({"bench", "--config", tiny_config(), "--target", "mpc", "--dataset",
                     dataset_dir(), "--out", path("bench_mpc")});
  const Run b = cli({"bench", "--config", tiny_config(), "--target", "learned", "--weights",
                     weights(), "--dataset", dataset_dir(), "--out", path("bench_net")});
  REQUIRE(a.code == 0);
  REQUIRE(b.code == 0);
  const json ja = json::parse(slurp(root() / "bench_mpc/timing_mpc_planning.json"));
  const json jb = json::parse(slurp(root() / "bench_net/timing_plannetx_planning.json"));
  CHECK(keys(ja) == keys(jb));
  CHECK(keys(ja.at("machine")) == keys(jb.at("machine")));
  CHECK(ja.at("inputs") == 12);
  CHECK(jb.at("p95_ms").get<double>() >= jb.at("median_ms").get<double>());
  CHECK(fs::exists(root() / "bench_net/timing_plannetx_policy.csv"));
  CHECK(fs::exists(root() / "bench_net/provenance.json"));
}

TEST_CASE("output root variable prefixes relative paths") {
  const std::string r = path("outroot");
  setenv("PLANNETX_OUTPUT_ROOT", r.c_str(), 1);
  const Run g = cli({"generate", "--config", tiny_config(), "--out", "rel", "-n", "2"});
  unsetenv("PLANNETX_OUTPUT_ROOT");
  REQUIRE(g.code == 0);
  CHECK(fs::exists(fs::path(r) / "rel/dataset.bin"));
  CHECK(fs::exists(fs::path(r) / "rel/run_config.json"));
}
