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

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "plannetx/dynamics.hpp"
#include "plannetx/prediction.hpp"
#include "plannetx/qp.hpp"

namespace plannetx {

struct OcpConfig {
  int horizon = 30;
  double td = 0.2;

  // Stage cost gamma^k (w_acc a^2 + w_jerk j^2 + w_snap u^2 - w_progress s).
  double w_acc = 1.0;
  double w_jerk = 0.5;
  double w_snap = 0.1;
  double w_progress = 0.5;
  double discount = 0.98;

  double v_min = 0.0, v_max = 36.1;
  double a_min = -4.0, a_max = 2.0;
  double j_min = -2.5, j_max = 2.5;
  double u_min = -10.0, u_max = 10.0;

  // Safety distance: max((v^2 - v_lead^2) / (2 brake_decel) + v t_brake,
  // d_min) <= s_lead - s.
  double d_min = 5.0;
  double t_brake = 0.5;
  double brake_decel = 4.0;
  // Duration for which the lead is predicted to keep its acceleration.
  double lead_accel_time = 1.0;

  // Quadratic slack penalties.
  double w_slack_dist = 1e3;
  double w_slack_terminal = 1e2;
  double w_slack_speed = 1e3;

  int max_sqp_iters = 30;
  double tol_step = 1e-6;
  double tol_kkt = 1e-6;
  QpOptions qp;

  void validate() const;
  bool operator==(const OcpConfig&) const;
};

// Number of per-stage parameters handed to the networks:
// [s_lead, v_lead, a_lead, v_max1, v_max2, s_change].
inline constexpr int kParamDim = 6;

struct PlanParams {
  LeadPrediction lead;  // horizon + 1 stages
  double v_max1 = 30.0;
  double v_max2 = 30.0;
  double s_change = 1e3;

  // Stage parameter vector p_k.
  Eigen::Matrix<double, kParamDim, 1> stage(int k) const;
  double speed_limit_at(double s) const { return s < s_change ? v_max1 : v_max2; }
  void validate(const OcpConfig& cfg) const;
};

PlanParams make_params(const LeadState& lead, double v_max1, double v_max2,
                       double s_change, const OcpConfig& cfg);

enum class SolveStatus { kConverged, kMaxIter, kInfeasibleQp };
std::string to_string(SolveStatus s);

struct OcpSolution {
  Eigen::Matrix<double, 4, Eigen::Dynamic> X;  // 4 x (N+1)
  Eigen::RowVectorXd U;                        // 1 x N
  Eigen::VectorXd slack_dist;   // N+1, stage 0 unused (always 0)
  Eigen::VectorXd slack_speed;  // N+1, stage 0 unused (always 0)
  double slack_terminal = 0.0;
  double objective = 0.0;
  double kkt_residual = 0.0;
  int sqp_iterations = 0;
  int qp_iterations = 0;
  bool monotone = true;  // objective non-increasing across SQP iterations
  SolveStatus status = SolveStatus::kMaxIter;

  // Decision vector and multipliers of the last subproblem, for warm starts.
  Eigen::VectorXd z;
  Eigen::VectorXd lambda;

  double u0() const { return U(0); }
};

double stage_cost(const State& x, double u, int k, const OcpConfig& cfg);

// h <= 0 means satisfied.
double dist_constraint(const State& x, const LeadState& lead,
                       const OcpConfig& cfg);
double speedlimit_constraint(const State& x, const PlanParams& params);

// Holds per-solve workspaces; one instance per thread.
class OcpSolver {
 public:
  explicit OcpSolver(OcpConfig cfg);

  const OcpConfig& config() const { return cfg_; }
  const DiscreteDynamics& dynamics() const { return dyn_; }

  OcpSolution solve(const State& x0, const PlanParams& params,
                    const OcpSolution* warm_start = nullptr);

  // Shifts a previous plan one stage forward for receding-horizon reuse.
  static OcpSolution shift(const OcpSolution& prev);

 private:
  OcpConfig cfg_;
  DiscreteDynamics dyn_;
  Eigen::MatrixXd h_state_;  // constant state/control part of the Hessian
};

}  // namespace plannetx
