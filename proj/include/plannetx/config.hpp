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

#pragma once

#include <cstdint>
#include <string>

#include "plannetx/compression.hpp"
#include "plannetx/nn.hpp"
#include "plannetx/ocp.hpp"
#include "plannetx/simulation.hpp"
#include "plannetx/training.hpp"

namespace plannetx {

enum class Scale { kDesk, kFull };
std::string to_string(Scale s);
Scale scale_from_string(const std::string& s);

struct BenchConfig {
  int inputs = 1000;
  int repeats = 20;
  int warmup = 10;
};

// Everything a command needs to regenerate its outputs.
struct RunConfig {
  Scale scale = Scale::kDesk;
  std::uint64_t seed = 0;
  OcpConfig ocp;
  SamplingConfig sampling;
  ArchConfig arch;
  LossConfig loss;
  TrainConfig train;
  ScenarioConfig scenarios;
  int suite_size = 200;
  PruneConfig prune;
  int calibration_samples = 1024;
  BenchConfig bench;
  int repro_seeds = 3;

  void validate() const;
};

// Desk: 10^4 / 3.3 10^3 / 3.3 10^3 samples, width 128, 50 epochs.
// Full: 10^5 / 33333 / 33333 samples, width 512, 300 epochs.
RunConfig default_config(Scale s);

std::string run_config_json(const RunConfig& c);
// Overlays `text` on the defaults of the scale it names (desk if absent).
// Unknown keys are rejected.
RunConfig run_config_from_json(const std::string& text);
RunConfig load_run_config(const std::string& path);

}  // namespace plannetx
