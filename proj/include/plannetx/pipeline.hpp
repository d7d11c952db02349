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

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "plannetx/compression.hpp"
#include "plannetx/config.hpp"
#include "plannetx/simulation.hpp"
#include "plannetx/timing.hpp"
#include "plannetx/training.hpp"

// The stages behind the command-line tool. Each writes into its own output
// directory together with the resolved RunConfig and a provenance record.

namespace plannetx {

struct Provenance {
  std::string command;
  std::vector<std::string> argv;
  std::vector<std::pair<std::string, std::string>> inputs;  // role, path
};

// Writes run_config.json and provenance.json (inputs fingerprinted by size
// and FNV-1a hash).
void write_provenance(const std::string& dir, const RunConfig& cfg, const Provenance& prov);

// Prefixes relative paths with $PLANNETX_OUTPUT_ROOT when it is set.
std::string resolve_output(const std::string& path);

// Train / valid / test in the proportions of the TrainConfig sizes; the
// dataset order is kept.
struct DatasetSplit {
  std::vector<Sample> train, valid, test;
};
DatasetSplit split_dataset(const Dataset& d, const TrainConfig& t);

// ---- generate ---------------------------------------------------------------

Dataset stage_generate(const RunConfig& cfg, int n, const std::string& out, int workers,
                       const Provenance& prov);
std::vector<Scenario> stage_generate_suite(const RunConfig& cfg, int n, const std::string& out,
                                           int workers, const Provenance& prov);

// ---- train ------------------------------------------------------------------

struct TrainOptions {
  bool resume = false;  // continue from out/train_state.json
  int stop_after = -1;  // stop once this many epochs are complete
};

// Writes weights_best.json, weights_final.json, curve.csv, train_state.json
// and summary.json. Divergence raises NumericalFailure after the curve is
// written.
TrainResult stage_train(const RunConfig& cfg, const Dataset& data, const std::string& out,
                        const TrainOptions& opt, const Provenance& prov);

// ---- evaluate ---------------------------------------------------------------

struct OpenLoopMetrics {
  double trajectory_mse = 0.0;  // NaN for first-control-only models
  double policy_mse = 0.0;
  int samples = 0;
  double jump_trajectory_mse = 0.0;  // samples whose forward prediction jumps
  int jump_samples = 0;
};

// Full plan for one sample: X is 4 x (N+1), U is 1 x N (1 x 1 without a plan).
using Planner = std::function<Rollout(const Sample&)>;

Planner network_planner(const NetworkParams& net);
Planner quant_planner(const QuantModel& q);
// Replays the expert's controls recovered from its state trajectory.
Planner expert_planner(double td);

OpenLoopMetrics open_loop_metrics(const Planner& plan, const std::vector<Sample>& data);
OpenLoopMetrics open_loop_metrics(const NetworkParams& net, const std::vector<Sample>& data);

std::vector<EpisodeLog> run_mpc_suite(const RunConfig& cfg, const std::vector<Scenario>& suite,
                                      bool warm, int workers);

struct ClosedLoopResult {
  std::vector<EpisodeLog> logs;
  ClosedLoopMetrics metrics;
};

ClosedLoopResult closed_loop(const ControllerFactory& make, const std::vector<Scenario>& suite,
                             const std::vector<EpisodeLog>& mpc, const OcpConfig& ocp,
                             int workers);

// closed_loop.json, episodes.csv, plots/<scenario>.csv for the first
// scenario of each family, and collisions.json with the offending scenarios.
void write_closed_loop(const std::string& dir, const ClosedLoopResult& r,
                       const std::vector<Scenario>& suite, const std::vector<EpisodeLog>& mpc);

std::string open_loop_json(const OpenLoopMetrics& m);

// ---- compress ---------------------------------------------------------------

PruneResult stage_prune(const RunConfig& cfg, const NetworkParams& net, const Dataset& data,
                        const std::string& out, const Provenance& prov);
QuantModel stage_quantize(const RunConfig& cfg, const NetworkParams& net, const Dataset& data,
                          const std::string& out, const Provenance& prov);

// ---- bench ------------------------------------------------------------------

// Writes timing_<target>_<mode>.json and .csv for each result.
void write_timing(const std::string& dir, const TimingResult& r);

}  // namespace plannetx
