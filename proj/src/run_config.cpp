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

#include "plannetx/config.hpp"

#include "config_json.hpp"
#include "weights_json.hpp"

namespace plannetx {

using detail::json;
using detail::StrictReader;

std::string to_string(Scale s) { return s == Scale::kDesk ? "desk" : "full"; }

Scale scale_from_string(const std::string& s) {
  if (s == "desk") return Scale::kDesk;
  if (s == "full") return Scale::kFull;
  throw ConfigError("unknown scale '" + s + "' (desk | full)");
}

void RunConfig::validate() const {
  // Module validators raise invalid_argument; for user configuration that is
  // a usage error.
  try {
    ocp.validate();
    sampling.validate();
    loss.validate();
    train.validate();
    scenarios.validate();
    prune.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if ((arch.arch == Arch::kBc) != (loss.kind == LossKind::kBc))
    throw ConfigError("the bc loss goes with the bc architecture and only with it");
  if (suite_size < 1) throw ConfigError("scenarios.suite_size must be >= 1");
  if (calibration_samples < 1) throw ConfigError("quant.calibration_samples must be >= 1");
  if (bench.inputs < 1 || bench.repeats < 1 || bench.warmup < 0)
    throw ConfigError("bench: inputs and repeats must be >= 1, warmup >= 0");
  if (repro_seeds < 1) throw ConfigError("repro.seeds must be >= 1");
}

RunConfig default_config(Scale s) {
  RunConfig c;
  c.scale = s;
  if (s == Scale::kDesk) {
    c.arch.width = 128;
    c.train.epochs = 50;
    c.train.train_size = 10000;
    c.train.valid_size = 3333;
    c.train.test_size = 3333;
  } else {
    c.arch.width = 512;
    c.train.epochs = 300;
    c.train.train_size = 100000;
    c.train.valid_size = 33333;
    c.train.test_size = 33333;
    c.suite_size = 600;
  }
  return c;
}

namespace {

json scenarios_to_json(const ScenarioConfig& c, int suite_size) {
  return {{"duration", {c.duration_min, c.duration_max}},
          {"ego_v", {c.ego_v_min, c.ego_v_max}},
          {"filter", c.filter},
          {"crash_slack", c.crash_slack},
          {"max_attempts", c.max_attempts},
          {"suite_size", suite_size}};
}

void read_pair(StrictReader& r, const char* key, double& lo, double& hi) {
  std::array<double, 2> v{lo, hi};
  r.get(key, v);
  lo = v[0];
  hi = v[1];
}

json to_json(const RunConfig& c) {
  json train = detail::to_json(c.train);
  train.erase("seed");  // the top-level seed drives every stage
  return {{"scale", to_string(c.scale)},
          {"seed", c.seed},
          {"ocp", detail::to_json(c.ocp)},
          {"sampling", detail::to_json(c.sampling)},
          {"model", detail::to_json(c.arch)},
          {"loss", detail::to_json(c.loss)},
          {"train", train},
          {"scenarios", scenarios_to_json(c.scenarios, c.suite_size)},
          {"prune",
           {{"target_fraction", c.prune.target_fraction},
            {"rounds", c.prune.rounds},
            {"finetune_epochs", c.prune.finetune_epochs}}},
          {"quant", {{"calibration_samples", c.calibration_samples}}},
          {"bench",
           {{"inputs", c.bench.inputs}, {"repeats", c.bench.repeats}, {"warmup", c.bench.warmup}}},
          {"repro", {{"seeds", c.repro_seeds}}}};
}

// Merges `over` into `base` key by key; keys absent from `base` are kept so
// that the strict readers can reject them.
void overlay(json& base, const json& over) {
  for (const auto& [k, v] : over.items()) {
    if (v.is_object() && base.contains(k) && base[k].is_object())
      overlay(base[k], v);
    else
      base[k] = v;
  }
}

}  // namespace

std::string run_config_json(const RunConfig& c) { return to_json(c).dump(2) + "\n"; }

RunConfig run_config_from_json(const std::string& text) {
  json user;
  try {
    user = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: not valid JSON: ") + e.what());
  }
  if (!user.is_object()) throw ConfigError("config: expected an object");
  Scale scale = Scale::kDesk;
  if (user.contains("scale")) {
    if (!user["scale"].is_string()) throw ConfigError("config.scale: wrong type");
    scale = scale_from_string(user["scale"].get<std::string>());
  }
  const RunConfig base = default_config(scale);
  json j = to_json(base);
  overlay(j, user);

  RunConfig c = base;
  StrictReader r(j, "config");
  std::string s;
  r.get("scale", s);
  r.get("seed", c.seed);
  c.ocp = detail::ocp_from_json(r.sub("ocp"));
  c.sampling = detail::sampling_from_json(r.sub("sampling"));
  c.arch = detail::arch_from_json(r.sub("model"));
  c.loss = detail::loss_from_json(r.sub("loss"));
  if (r.sub("train").contains("seed"))
    throw ConfigError("config.train: unknown key 'seed' (use the top-level seed)");
  c.train = detail::train_from_json(r.sub("train"));
  {
    StrictReader sr(r.sub("scenarios"), "config.scenarios");
    read_pair(sr, "duration", c.scenarios.duration_min, c.scenarios.duration_max);
    read_pair(sr, "ego_v", c.scenarios.ego_v_min, c.scenarios.ego_v_max);
    sr.get("filter", c.scenarios.filter);
    sr.get("crash_slack", c.scenarios.crash_slack);
    sr.get("max_attempts", c.scenarios.max_attempts);
    sr.get("suite_size", c.suite_size);
    sr.finish();
  }
  {
    StrictReader pr(r.sub("prune"), "config.prune");
    pr.get("target_fraction", c.prune.target_fraction);
    pr.get("rounds", c.prune.rounds);
    pr.get("finetune_epochs", c.prune.finetune_epochs);
    pr.finish();
  }
  {
    StrictReader qr(r.sub("quant"), "config.quant");
    qr.get("calibration_samples", c.calibration_samples);
    qr.finish();
  }
  {
    StrictReader br(r.sub("bench"), "config.bench");
    br.get("inputs", c.bench.inputs);
    br.get("repeats", c.bench.repeats);
    br.get("warmup", c.bench.warmup);
    br.finish();
  }
  {
    StrictReader rr(r.sub("repro"), "config.repro");
    rr.get("seeds", c.repro_seeds);
    rr.finish();
  }
  r.finish();
  c.train.seed = c.seed;
  c.validate();
  return c;
}

RunConfig load_run_config(const std::string& path) {
  return run_config_from_json(detail::read_file(path));
}

}  // namespace plannetx
