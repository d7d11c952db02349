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
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "plannetx/nn.hpp"
#include "plannetx/ocp.hpp"

namespace plannetx {

struct Sample {
  State x0 = State::Zero();
  PlanParams params;
  Eigen::Matrix<double, 4, Eigen::Dynamic> X_star;  // 4 x (N+1)
  Eigen::RowVectorXd U_star;                        // 1 x N
  SolveStatus status = SolveStatus::kConverged;
  double kkt = 0.0;
  double max_dist_slack = 0.0;
  bool speed_change = false;
  int cut_in_stage = -1;  // first stage of the second lead, -1 without cut-in
};

// Ranges for the random expert problems. Positions are relative to the ego
// start (s = 0).
struct SamplingConfig {
  double gap_min = 5.0, gap_max = 150.0;
  double v_lead_min = 0.0, v_lead_max = 36.1;
  double a_lead_min = -4.0, a_lead_max = 2.0;
  double v_limit_min = 8.0, v_limit_max = 36.1;
  double s_change_min = 5.0, s_change_max = 200.0;
  double p_speed_change = 1.0 / 3.0;
  double p_cut_in = 1.0 / 3.0;
  // Cut-in vehicle appears at this fraction of the way from the ego's
  // constant-speed position to the original lead.
  double cut_in_frac_min = 0.2, cut_in_frac_max = 0.9;
  double crash_slack = 0.5;  // zeta_crash
  int max_attempts_per_sample = 100;

  void validate() const;
  bool operator==(const SamplingConfig&) const = default;
};

struct SamplingStats {
  std::int64_t attempts = 0;
  std::int64_t rejected_crash = 0;
  std::int64_t rejected_solver = 0;
  std::int64_t speed_changes = 0;
  std::int64_t cut_ins = 0;
};

struct Dataset {
  OcpConfig ocp;
  SamplingConfig sampling;
  std::uint64_t seed = 0;
  SamplingStats stats;
  std::vector<Sample> samples;
};

// Solves the expert OCP on random problems; crash-inevitable and
// non-converged draws are resampled. Deterministic in (n, configs, seed) and
// independent of `workers`.
Dataset sample_dataset(int n, const OcpConfig& cfg, std::uint64_t seed,
                       const SamplingConfig& scfg = {}, int workers = 1);

// Draws the random problem for sample `index`, attempt `attempt`.
Sample draw_problem(const OcpConfig& cfg, const SamplingConfig& scfg,
                    std::uint64_t seed, std::uint64_t index, int attempt);

// Min/max over expert states, stage parameters (k < N) and stage times.
Normalizer fit_normalizer(const std::vector<Sample>& data, const OcpConfig& cfg);

enum class LossKind { kBc, kControlTraj, kStateTraj, kCombined };
std::string to_string(LossKind k);
LossKind loss_from_string(const std::string& s);

struct LossConfig {
  LossKind kind = LossKind::kStateTraj;
  double gamma = 0.98;
  Eigen::Matrix4d W = Eigen::Matrix4d::Identity();
  double control_weight = 1.0;  // W for the scalar control
  double mix_state = 0.5;       // combined: mix_state L^x + mix_control L^u
  double mix_control = 0.5;

  void validate() const;
};

double loss_state_traj(const Eigen::Matrix<double, 4, Eigen::Dynamic>& X_hat,
                       const Eigen::Matrix<double, 4, Eigen::Dynamic>& X_star,
                       const LossConfig& cfg);
double loss_control_traj(const Eigen::RowVectorXd& U_hat,
                         const Eigen::RowVectorXd& U_star, const LossConfig& cfg);
double loss_bc(double u0_hat, double u0_star);

struct Rollout {
  Eigen::Matrix<double, 4, Eigen::Dynamic> X;  // 4 x (N+1)
  Eigen::RowVectorXd U;                        // 1 x N (1 x 1 for bc)
};

// Runs the learned planner from x0. For bc only u_0 is produced.
Rollout rollout(const NetworkParams& net, const State& x0, const PlanParams& params);

// Batch-mean loss of `kind` over `batch`. With grad != nullptr the exact
// gradient is accumulated into it (same layout as net).
double batch_loss(const NetworkParams& net, const std::vector<const Sample*>& batch,
                  const LossConfig& loss, NetworkParams* grad = nullptr);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam() = default;
  Adam(const NetworkParams& like, AdamConfig cfg);
  void step(NetworkParams& params, NetworkParams& grad);

  AdamConfig cfg;
  std::int64_t t = 0;
  std::vector<Eigen::VectorXd> m, v;
};

struct TrainConfig {
  int epochs = 300;
  int batch_size = 32;
  AdamConfig adam;
  std::uint64_t seed = 0;
  int train_size = 100000;
  int valid_size = 33333;
  int test_size = 33333;

  void validate() const;
};

struct TrainCurve {
  std::vector<double> train;
  std::vector<double> valid;
  int best_epoch = -1;
};

// Everything needed to continue a run exactly where it stopped.
struct TrainState {
  int epoch = 0;  // completed epochs
  NetworkParams params;
  NetworkParams best;
  double best_valid = 0.0;
  Adam adam;
  TrainCurve curve;
};

struct TrainResult {
  NetworkParams best;
  NetworkParams final;
  TrainCurve curve;
  bool diverged = false;
  std::string divergence;
};

// Called after every epoch; returning false stops training early.
using EpochHook = std::function<bool(const TrainState&)>;

TrainResult train(const std::vector<Sample>& train_set, const std::vector<Sample>& valid_set,
                  const ArchConfig& arch, const LossConfig& loss, const TrainConfig& tcfg,
                  const OcpConfig& ocp, const EpochHook& hook = {});

// Continues from `init` (fine-tuning) or from a saved state.
TrainResult train_from(const NetworkParams& init, const std::vector<Sample>& train_set,
                       const std::vector<Sample>& valid_set, const LossConfig& loss,
                       const TrainConfig& tcfg, const EpochHook& hook = {},
                       std::optional<TrainState> resume = std::nullopt);

double dataset_loss(const NetworkParams& net, const std::vector<Sample>& data,
                    const LossConfig& loss);

// (1/N) sum_{k=1..N} ||x_hat_k - x*_k||^2 averaged over samples.
double trajectory_mse(const NetworkParams& net, const std::vector<Sample>& data);
// Mean of (u_hat_0 - u*_0)^2.
double policy_mse(const NetworkParams& net, const std::vector<Sample>& data);

// Least-squares controls reproducing consecutive states of X.
Eigen::RowVectorXd controls_from_states(const DiscreteDynamics& dyn,
                                        const Eigen::Matrix<double, 4, Eigen::Dynamic>& X);

std::string save_train_state_json(const TrainState& s);
TrainState load_train_state_json(const std::string& text);

}  // namespace plannetx
