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

#include "plannetx/ocp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace plannetx {

void OcpConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("OcpConfig: ") + what);
  };
  require(horizon >= 2, "horizon must be >= 2");
  require(std::isfinite(td) && td > 0, "td must be positive");
  require(w_acc > 0 && w_jerk > 0 && w_snap > 0 && w_progress > 0,
          "cost weights must be positive");
  require(w_slack_dist > 0 && w_slack_terminal > 0 && w_slack_speed > 0,
          "slack weights must be positive");
  require(discount > 0 && discount <= 1, "discount must lie in (0, 1]");
  require(v_min < v_max, "v_min < v_max");
  require(a_min < 0 && 0 < a_max, "a_min < 0 < a_max");
  require(j_min < 0 && 0 < j_max, "j_min < 0 < j_max");
  require(u_min < 0 && 0 < u_max, "u_min < 0 < u_max");
  require(d_min > 0 && t_brake >= 0 && brake_decel > 0,
          "safety distance parameters");
  require(lead_accel_time >= 0, "lead_accel_time >= 0");
  require(max_sqp_iters >= 1 && tol_step > 0 && tol_kkt > 0, "solver tolerances");
}

bool OcpConfig::operator==(const OcpConfig& o) const {
  return horizon == o.horizon && td == o.td && w_acc == o.w_acc &&
         w_jerk == o.w_jerk && w_snap == o.w_snap && w_progress == o.w_progress &&
         discount == o.discount && v_min == o.v_min && v_max == o.v_max &&
         a_min == o.a_min && a_max == o.a_max && j_min == o.j_min &&
         j_max == o.j_max && u_min == o.u_min && u_max == o.u_max &&
         d_min == o.d_min && t_brake == o.t_brake &&
         brake_decel == o.brake_decel && lead_accel_time == o.lead_accel_time &&
         w_slack_dist == o.w_slack_dist &&
         w_slack_terminal == o.w_slack_terminal &&
         w_slack_speed == o.w_slack_speed && max_sqp_iters == o.max_sqp_iters &&
         tol_step == o.tol_step && tol_kkt == o.tol_kkt &&
         qp.max_iter == o.qp.max_iter && qp.tol_residual == o.qp.tol_residual &&
         qp.tol_mu == o.qp.tol_mu;
}

Eigen::Matrix<double, kParamDim, 1> PlanParams::stage(int k) const {
  Eigen::Matrix<double, kParamDim, 1> p;
  const LeadState& l = lead.at(static_cast<size_t>(k));
  p << l.s, l.v, l.a, v_max1, v_max2, s_change;
  return p;
}

void PlanParams::validate(const OcpConfig& cfg) const {
  if (static_cast<int>(lead.size()) != cfg.horizon + 1)
    throw std::invalid_argument("PlanParams: lead prediction needs N+1 stages");
  for (const auto& l : lead)
    if (!std::isfinite(l.s) || !std::isfinite(l.v) || !std::isfinite(l.a))
      throw std::invalid_argument("PlanParams: non-finite lead state");
  auto in_box = [&](double v) { return v >= cfg.v_min && v <= cfg.v_max; };
  if (!in_box(v_max1) || !in_box(v_max2) || !std::isfinite(s_change))
    throw std::invalid_argument("PlanParams: speed limits outside [v_min, v_max]");
}

PlanParams make_params(const LeadState& lead, double v_max1, double v_max2,
                       double s_change, const OcpConfig& cfg) {
  PlanParams p;
  p.lead = forward_predict(lead, cfg.lead_accel_time, cfg.td, cfg.horizon + 1);
  p.v_max1 = v_max1;
  p.v_max2 = v_max2;
  p.s_change = s_change;
  return p;
}

std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::kConverged: return "converged";
    case SolveStatus::kMaxIter: return "max_iter";
    case SolveStatus::kInfeasibleQp: return "infeasible_qp";
  }
  return "unknown";
}

double stage_cost(const State& x, double u, int k, const OcpConfig& cfg) {
  const double a = x(kAcc), j = x(kJerk);
  return std::pow(cfg.discount, k) *
         (cfg.w_acc * a * a + cfg.w_jerk * j * j + cfg.w_snap * u * u -
          cfg.w_progress * x(kPos));
}

double dist_constraint(const State& x, const LeadState& lead,
                       const OcpConfig& cfg) {
  const double v = x(kVel);
  const double braking =
      (v * v - lead.v * lead.v) / (2.0 * cfg.brake_decel) + v * cfg.t_brake;
  return std::max(braking, cfg.d_min) - (lead.s - x(kPos));
}

double speedlimit_constraint(const State& x, const PlanParams& params) {
  return x(kVel) - params.speed_limit_at(x(kPos));
}

namespace {

// Rows per stage k = 1..N-1 and for the terminal stage N.
constexpr int kRowsPerStage = 9;
constexpr int kRowsTerminal = 11;
// Index of the linearized braking-distance row within a stage block.
constexpr int kBrakingRow = 7;

struct StageRow {
  Eigen::Vector4d a;  // coefficients on x_k
  double b = 0.0;     // a'x_k - slack <= b
  int slack = -1;     // column of the slack variable, -1 if none
};

// Inequalities of the condensed problem in z = [U; zeta_dist; zeta_speed;
// zeta_terminal]. Stage rows act on x_k = free_k + gamma_k U, bound rows on
// single entries of z.
class StageConstraints {
 public:
  StageConstraints(const std::vector<Eigen::Matrix<double, 4, Eigen::Dynamic>>& gamma,
                   int n)
      : gamma_(gamma), n_(n) {
    stage_begin_.resize(n_ + 2);
    int r = 0;
    for (int k = 1; k <= n_; ++k) {
      stage_begin_[k] = r;
      r += k < n_ ? kRowsPerStage : kRowsTerminal;
    }
    stage_begin_[n_ + 1] = r;
    rows_.resize(r);
    d_.resize(r + 4 * n_ + 1);
    // Bound rows: u upper, u lower, then zeta >= 0.
    for (int k = 0; k < n_; ++k) {
      bounds_.push_back({k, 1.0});
      bounds_.push_back({k, -1.0});
    }
    for (int c = n_; c < 3 * n_ + 1; ++c) bounds_.push_back({c, -1.0});
  }

  int rows() const { return static_cast<int>(rows_.size() + bounds_.size()); }
  int stage_rows() const { return static_cast<int>(rows_.size()); }
  int stage_begin(int k) const { return stage_begin_[k]; }
  int stage_end(int k) const { return stage_begin_[k + 1]; }
  StageRow& row(int i) { return rows_[i]; }
  const StageRow& row(int i) const { return rows_[i]; }
  Eigen::VectorXd& rhs() { return d_; }
  const Eigen::VectorXd& rhs() const { return d_; }

  void apply(const Eigen::VectorXd& z, Eigen::VectorXd& out) const {
    out.resize(rows());
    for (int k = 1; k <= n_; ++k) {
      const Eigen::Vector4d dx = gamma_[k].leftCols(k) * z.head(k);
      for (int i = stage_begin(k); i < stage_end(k); ++i) {
        const StageRow& r = rows_[i];
        out[i] = r.a.dot(dx) - (r.slack >= 0 ? z[r.slack] : 0.0);
      }
    }
    const int off = stage_rows();
    for (size_t i = 0; i < bounds_.size(); ++i)
      out[off + i] = bounds_[i].sign * z[bounds_[i].col];
  }

  void apply_transpose(const Eigen::VectorXd& w, Eigen::VectorXd& out) const {
    out.setZero(3 * n_ + 1);
    for (int k = 1; k <= n_; ++k) {
      Eigen::Vector4d y = Eigen::Vector4d::Zero();
      for (int i = stage_begin(k); i < stage_end(k); ++i) {
        const StageRow& r = rows_[i];
        y += w[i] * r.a;
        if (r.slack >= 0) out[r.slack] -= w[i];
      }
      out.head(k).noalias() += gamma_[k].leftCols(k).transpose() * y;
    }
    const int off = stage_rows();
    for (size_t i = 0; i < bounds_.size(); ++i)
      out[bounds_[i].col] += bounds_[i].sign * w[off + i];
  }

  void add_normal(const Eigen::VectorXd& sigma, Eigen::MatrixXd& m) const {
    for (int k = 1; k <= n_; ++k) {
      Eigen::Matrix4d dk = Eigen::Matrix4d::Zero();
      const auto g = gamma_[k].leftCols(k);
      for (int i = stage_begin(k); i < stage_end(k); ++i) {
        const StageRow& r = rows_[i];
        dk.noalias() += sigma[i] * r.a * r.a.transpose();
        if (r.slack >= 0) {
          const Eigen::VectorXd cross = g.transpose() * (sigma[i] * r.a);
          m.col(r.slack).head(k) -= cross;
          m.row(r.slack).head(k) -= cross.transpose();
          m(r.slack, r.slack) += sigma[i];
        }
      }
      const Eigen::Matrix<double, 4, Eigen::Dynamic> dg = dk * g;
      m.topLeftCorner(k, k).noalias() += g.transpose() * dg;
    }
    const int off = stage_rows();
    for (size_t i = 0; i < bounds_.size(); ++i)
      m(bounds_[i].col, bounds_[i].col) += sigma[off + i];
  }

 private:
  struct BoundRow {
    int col;
    double sign;
  };
  const std::vector<Eigen::Matrix<double, 4, Eigen::Dynamic>>& gamma_;
  int n_;
  std::vector<int> stage_begin_;
  std::vector<StageRow> rows_;
  std::vector<BoundRow> bounds_;
  Eigen::VectorXd d_;
};

Eigen::Vector4d unit(int i) { return Eigen::Vector4d::Unit(i); }

}  // namespace

OcpSolver::OcpSolver(OcpConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  dyn_ = discretize(cfg_.td);
  const int n = cfg_.horizon;
  const int nz = 3 * n + 1;
  const CondensedDynamics c = condense(dyn_, State::Zero(), n);
  h_state_ = Eigen::MatrixXd::Zero(nz, nz);
  Eigen::Matrix4d q = Eigen::Matrix4d::Zero();
  q(kAcc, kAcc) = 2.0 * cfg_.w_acc;
  q(kJerk, kJerk) = 2.0 * cfg_.w_jerk;
  double disc = 1.0;
  for (int k = 0; k < n; ++k) {
    if (k > 0) {
      const auto g = c.gamma[k].leftCols(k);
      h_state_.topLeftCorner(k, k).noalias() += disc * g.transpose() * q * g;
    }
    h_state_(k, k) += 2.0 * disc * cfg_.w_snap;
    disc *= cfg_.discount;
  }
  for (int i = 0; i < n; ++i) {
    h_state_(n + i, n + i) = 2.0 * cfg_.w_slack_dist;
    h_state_(2 * n + i, 2 * n + i) = 2.0 * cfg_.w_slack_speed;
  }
  h_state_(3 * n, 3 * n) = 2.0 * cfg_.w_slack_terminal;
}

OcpSolution OcpSolver::shift(const OcpSolution& prev) {
  OcpSolution s = prev;
  const int n = static_cast<int>(prev.U.size());
  if (n < 2 || prev.z.size() != 3 * n + 1) return s;
  for (int k = 0; k + 1 < n; ++k) s.U(k) = prev.U(k + 1);
  s.z.head(n) = s.U.transpose();
  for (int block = 1; block <= 2; ++block)
    for (int k = 0; k + 1 < n; ++k)
      s.z(block * n + k) = prev.z(block * n + k + 1);
  if (prev.lambda.size() > 0) {
    // Stage rows are laid out in equal blocks except the terminal one.
    for (int k = 1; k + 1 < n; ++k)
      s.lambda.segment((k - 1) * kRowsPerStage, kRowsPerStage) =
          prev.lambda.segment(k * kRowsPerStage, kRowsPerStage);
    const int srows = (n - 1) * kRowsPerStage + kRowsTerminal;
    for (int k = 0; k + 1 < n; ++k)
      s.lambda.segment(srows + 2 * k, 2) = prev.lambda.segment(srows + 2 * (k + 1), 2);
  }
  return s;
}

OcpSolution OcpSolver::solve(const State& x0, const PlanParams& params,
                             const OcpSolution* warm_start) {
  const OcpConfig& cfg = cfg_;
  const int n = cfg.horizon;
  const int nz = 3 * n + 1;
  if (!x0.allFinite()) throw std::invalid_argument("solve: non-finite x0");
  params.validate(cfg);

  const CondensedDynamics cd = condense(dyn_, x0, n);
  StageConstraints cons(cd.gamma, n);

  // Linear cost term.
  Eigen::VectorXd g_f = Eigen::VectorXd::Zero(nz);
  {
    Eigen::Matrix4d q = Eigen::Matrix4d::Zero();
    q(kAcc, kAcc) = 2.0 * cfg.w_acc;
    q(kJerk, kJerk) = 2.0 * cfg.w_jerk;
    double disc = cfg.discount;
    for (int k = 1; k < n; ++k) {
      Eigen::Vector4d grad = disc * q * cd.free.col(k);
      grad(kPos) -= disc * cfg.w_progress;
      g_f.head(k).noalias() += cd.gamma[k].leftCols(k).transpose() * grad;
      disc *= cfg.discount;
    }
  }

  auto states = [&](const Eigen::VectorXd& z) {
    Eigen::Matrix<double, 4, Eigen::Dynamic> x(4, n + 1);
    x.col(0) = x0;
    for (int k = 0; k < n; ++k)
      x.col(k + 1) = dyn_.A * x.col(k) + dyn_.B * z(k);
    return x;
  };

  // A stage that has seen the stricter speed limit keeps it for the rest of
  // the solve, so the regime cannot cycle between iterations.
  const double strict_limit = std::min(params.v_max1, params.v_max2);
  std::vector<char> strict(static_cast<size_t>(n + 1), 0);
  auto limit_at = [&](int k, double s) {
    const double v = params.speed_limit_at(s);
    if (v == strict_limit) strict[static_cast<size_t>(k)] = 1;
    return strict[static_cast<size_t>(k)] ? strict_limit : v;
  };

  // Rebuilds all stage rows around the iterate z: speed regime from its
  // positions, braking term linearized at its velocities.
  auto linearize = [&](const Eigen::VectorXd& z) {
    const auto x = states(z);
    Eigen::VectorXd& d = cons.rhs();
    for (int k = 1; k <= n; ++k) {
      const LeadState& lead = params.lead[k];
      const double vbar = x(kVel, k);
      const int dist_slack = n + k - 1;
      const int speed_slack = 2 * n + k - 1;
      StageRow rows[kRowsTerminal];
      rows[0] = {unit(kVel), cfg.v_max, -1};
      rows[1] = {-unit(kVel), -cfg.v_min, -1};
      rows[2] = {unit(kAcc), cfg.a_max, -1};
      rows[3] = {-unit(kAcc), -cfg.a_min, -1};
      rows[4] = {unit(kJerk), cfg.j_max, -1};
      rows[5] = {-unit(kJerk), -cfg.j_min, -1};
      rows[6] = {unit(kVel), limit_at(k, x(kPos, k)), speed_slack};
      Eigen::Vector4d brake = unit(kPos);
      brake(kVel) = vbar / cfg.brake_decel + cfg.t_brake;
      rows[kBrakingRow] = {brake,
                           lead.s + (lead.v * lead.v + vbar * vbar) /
                                        (2.0 * cfg.brake_decel),
                           dist_slack};
      rows[8] = {unit(kPos), lead.s - cfg.d_min, dist_slack};
      rows[9] = {unit(kAcc), 0.0, 3 * n};
      rows[10] = {-unit(kAcc), 0.0, 3 * n};
      const int b = cons.stage_begin(k);
      for (int i = 0; i < cons.stage_end(k) - b; ++i) {
        cons.row(b + i) = rows[i];
        d[b + i] = rows[i].b - rows[i].a.dot(cd.free.col(k));
      }
    }
    const int off = cons.stage_rows();
    for (int k = 0; k < n; ++k) {
      d[off + 2 * k] = cfg.u_max;
      d[off + 2 * k + 1] = -cfg.u_min;
    }
    d.tail(2 * n + 1).setZero();
  };

  auto objective = [&](const Eigen::VectorXd& z) {
    const auto x = states(z);
    double f = 0.0;
    for (int k = 0; k < n; ++k) f += stage_cost(x.col(k), z(k), k, cfg);
    f += cfg.w_slack_dist * z.segment(n, n).squaredNorm();
    f += cfg.w_slack_speed * z.segment(2 * n, n).squaredNorm();
    f += cfg.w_slack_terminal * z(3 * n) * z(3 * n);
    return f;
  };

  // Lagrangian Hessian contribution of the convex braking term.
  auto curvature = [&](const Eigen::VectorXd& lam) {
    Eigen::MatrixXd hl = Eigen::MatrixXd::Zero(nz, nz);
    if (lam.size() == 0) return hl;
    for (int k = 1; k <= n; ++k) {
      const double w = lam(cons.stage_begin(k) + kBrakingRow) / cfg.brake_decel;
      if (w == 0.0) continue;
      const auto gv = cd.gamma[k].row(kVel).head(k);
      hl.topLeftCorner(k, k).noalias() += w * gv.transpose() * gv;
    }
    return hl;
  };

  Eigen::VectorXd z = Eigen::VectorXd::Zero(nz);
  Eigen::VectorXd lam;
  if (warm_start && warm_start->z.size() == nz) {
    z = warm_start->z;
    if (warm_start->lambda.size() == cons.rows()) lam = warm_start->lambda;
  }

  OcpSolution sol;
  linearize(z);
  double f_prev = objective(z);
  Eigen::VectorXd cz, jt;

  for (int it = 1; it <= cfg.max_sqp_iters; ++it) {
    const Eigen::MatrixXd hl = curvature(lam);
    const Eigen::MatrixXd h = h_state_ + hl;
    const Eigen::VectorXd g = g_f - hl * z;
    QpResult qp = solve_qp(h, g, cons, cons.rhs(), cfg.qp, &z);
    sol.sqp_iterations = it;
    sol.qp_iterations += qp.iterations;
    if ((qp.status != QpStatus::kSolved && qp.status != QpStatus::kAcceptable) ||
        !qp.z.allFinite()) {
      sol.status = SolveStatus::kInfeasibleQp;
      break;
    }
    const double step = (qp.z - z).lpNorm<Eigen::Infinity>();
    z = qp.z;
    lam = qp.lambda;

    const double f = objective(z);
    if (f > f_prev + 1e-8 * std::max(1.0, std::abs(f_prev))) sol.monotone = false;
    f_prev = f;

    // KKT residual of the original problem at z (regime frozen at z).
    linearize(z);
    cons.apply(z, cz);
    cons.apply_transpose(lam, jt);
    // Dual and complementarity terms are scaled by the average multiplier
    // size (floored at 100), as in IPOPT's optimality error.
    const Eigen::VectorXd stat = h_state_ * z + g_f + jt;
    const double scale =
        std::max(100.0, lam.lpNorm<1>() / static_cast<double>(lam.size())) / 100.0;
    double kkt = stat.lpNorm<Eigen::Infinity>() / scale;
    for (int i = 0; i < cz.size(); ++i) {
      const double c = cz[i] - cons.rhs()[i];
      kkt = std::max({kkt, c, std::abs(lam[i] * c) / scale});
    }
    sol.kkt_residual = kkt;
    if (step < cfg.tol_step && kkt < cfg.tol_kkt) {
      sol.status = SolveStatus::kConverged;
      break;
    }
  }

  sol.z = z;
  sol.lambda = lam;
  sol.X = states(z);
  sol.U = z.head(n).transpose();
  sol.slack_dist = Eigen::VectorXd::Zero(n + 1);
  sol.slack_speed = Eigen::VectorXd::Zero(n + 1);
  sol.slack_dist.tail(n) = z.segment(n, n);
  sol.slack_speed.tail(n) = z.segment(2 * n, n);
  sol.slack_terminal = z(3 * n);
  sol.objective = objective(z);
  return sol;
}

}  // namespace plannetx
