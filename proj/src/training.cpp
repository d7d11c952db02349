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

#include "plannetx/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <thread>

#include <json.hpp>

#include "plannetx/policy.hpp"
#include "rng.hpp"
#include "weights_json.hpp"

namespace plannetx {

void SamplingConfig::validate() const {
  auto range = [](double lo, double hi, const char* what) {
    if (!(std::isfinite(lo) && std::isfinite(hi) && lo <= hi))
      throw ConfigError(std::string("SamplingConfig: bad range for ") + what);
  };
  range(gap_min, gap_max, "gap");
  range(v_lead_min, v_lead_max, "v_lead");
  range(a_lead_min, a_lead_max, "a_lead");
  range(v_limit_min, v_limit_max, "v_limit");
  range(s_change_min, s_change_max, "s_change");
  range(cut_in_frac_min, cut_in_frac_max, "cut_in_frac");
  if (gap_min <= 0) throw ConfigError("SamplingConfig: initial gap must be positive");
  if (!(p_speed_change >= 0 && p_speed_change <= 1 && p_cut_in >= 0 && p_cut_in <= 1))
    throw ConfigError("SamplingConfig: probabilities must lie in [0, 1]");
  if (!(crash_slack >= 0)) throw ConfigError("SamplingConfig: crash_slack must be >= 0");
  if (max_attempts_per_sample < 1)
    throw ConfigError("SamplingConfig: max_attempts_per_sample must be >= 1");
}

Sample draw_problem(const OcpConfig& cfg, const SamplingConfig& sc, std::uint64_t seed,
                    std::uint64_t index, int attempt) {
  Rng rng(derive_seed(seed, index, static_cast<std::uint64_t>(attempt)));
  Sample s;
  s.x0 << 0.0, rng.uniform(cfg.v_min, cfg.v_max), rng.uniform(cfg.a_min, cfg.a_max),
      rng.uniform(cfg.j_min, cfg.j_max);
  const LeadState lead{rng.uniform(sc.gap_min, sc.gap_max),
                       rng.uniform(sc.v_lead_min, sc.v_lead_max),
                       rng.uniform(sc.a_lead_min, sc.a_lead_max)};
  const double v1 = rng.uniform(sc.v_limit_min, sc.v_limit_max);
  double v2 = v1, s_change = 0.0;
  if (rng.bernoulli(sc.p_speed_change)) {
    s.speed_change = true;
    v2 = rng.uniform(sc.v_limit_min, sc.v_limit_max);
    s_change = rng.uniform(sc.s_change_min, sc.s_change_max);
  }
  s.params = make_params(lead, v1, v2, s_change, cfg);
  if (rng.bernoulli(sc.p_cut_in)) {
    const int kc = static_cast<int>(rng.uniform_int(1, cfg.horizon - 1));
    const double ego_guess = s.x0(kVel) * kc * cfg.td;
    const double old_s = s.params.lead[static_cast<size_t>(kc)].s;
    const double frac = rng.uniform(sc.cut_in_frac_min, sc.cut_in_frac_max);
    const LeadState cut{ego_guess + frac * (old_s - ego_guess),
                        rng.uniform(sc.v_lead_min, sc.v_lead_max),
                        rng.uniform(sc.a_lead_min, sc.a_lead_max)};
    const auto pred = forward_predict(cut, cfg.lead_accel_time, cfg.td, cfg.horizon + 1 - kc);
    for (int k = kc; k <= cfg.horizon; ++k)
      s.params.lead[static_cast<size_t>(k)] = pred[static_cast<size_t>(k - kc)];
    s.cut_in_stage = kc;
  }
  return s;
}

Dataset sample_dataset(int n, const OcpConfig& cfg, std::uint64_t seed,
                       const SamplingConfig& sc, int workers) {
  if (n < 1) throw std::invalid_argument("sample_dataset: n must be >= 1");
  cfg.validate();
  sc.validate();
  workers = std::max(1, std::min(workers, n));

  struct Slot {
    Sample sample;
    SamplingStats stats;
    bool ok = false;
  };
  std::vector<Slot> slots(static_cast<size_t>(n));
  auto work = [&](int w) {
    OcpSolver solver(cfg);
    for (int i = w; i < n; i += workers) {
      Slot& slot = slots[static_cast<size_t>(i)];
      for (int a = 0; a < sc.max_attempts_per_sample && !slot.ok; ++a) {
        Sample s = draw_problem(cfg, sc, seed, static_cast<std::uint64_t>(i), a);
        ++slot.stats.attempts;
        const OcpSolution sol = solver.solve(s.x0, s.params);
        if (sol.status != SolveStatus::kConverged) {
          ++slot.stats.rejected_solver;
          continue;
        }
        s.max_dist_slack = sol.slack_dist.maxCoeff();
        if (s.max_dist_slack > sc.crash_slack) {
          ++slot.stats.rejected_crash;
          continue;
        }
        s.X_star = sol.X;
        s.U_star = sol.U;
        s.status = sol.status;
        s.kkt = sol.kkt_residual;
        slot.sample = std::move(s);
        slot.ok = true;
      }
    }
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work, w);
    for (auto& t : pool) t.join();
  }

  Dataset d;
  d.ocp = cfg;
  d.sampling = sc;
  d.seed = seed;
  d.samples.reserve(static_cast<size_t>(n));
  int failed = -1;
  for (int i = 0; i < n; ++i) {
    auto& slot = slots[static_cast<size_t>(i)];
    d.stats.attempts += slot.stats.attempts;
    d.stats.rejected_crash += slot.stats.rejected_crash;
    d.stats.rejected_solver += slot.stats.rejected_solver;
    if (!slot.ok) {
      if (failed < 0) failed = i;
      continue;
    }
    d.stats.speed_changes += slot.sample.speed_change ? 1 : 0;
    d.stats.cut_ins += slot.sample.cut_in_stage >= 0 ? 1 : 0;
    d.samples.push_back(std::move(slot.sample));
  }
  if (failed >= 0)
    throw ConfigError("sample_dataset: sample " + std::to_string(failed) + " exhausted " +
                      std::to_string(sc.max_attempts_per_sample) +
                      " attempts (attempts=" + std::to_string(d.stats.attempts) +
                      ", crash-rejected=" + std::to_string(d.stats.rejected_crash) +
                      ", solver-rejected=" + std::to_string(d.stats.rejected_solver) + ")");
  return d;
}

Normalizer fit_normalizer(const std::vector<Sample>& data, const OcpConfig& cfg) {
  if (data.empty()) throw std::invalid_argument("fit_normalizer: empty dataset");
  const double inf = std::numeric_limits<double>::infinity();
  Normalizer n;
  n.state = {Eigen::VectorXd::Constant(4, inf), Eigen::VectorXd::Constant(4, -inf)};
  n.param = {Eigen::VectorXd::Constant(6, inf), Eigen::VectorXd::Constant(6, -inf)};
  for (const auto& s : data) {
    n.state.lo = n.state.lo.cwiseMin(s.X_star.rowwise().minCoeff());
    n.state.hi = n.state.hi.cwiseMax(s.X_star.rowwise().maxCoeff());
    for (int k = 0; k < cfg.horizon; ++k) {
      const auto p = s.params.stage(k);
      n.param.lo = n.param.lo.cwiseMin(p);
      n.param.hi = n.param.hi.cwiseMax(p);
    }
  }
  n.time = {Eigen::VectorXd::Zero(1), Eigen::VectorXd::Constant(1, (cfg.horizon - 1) * cfg.td)};
  n.fitted = true;
  return n;
}

std::string to_string(LossKind k) {
  switch (k) {
    case LossKind::kBc: return "bc";
    case LossKind::kControlTraj: return "u";
    case LossKind::kStateTraj: return "x";
    case LossKind::kCombined: return "combined";
  }
  return "unknown";
}

LossKind loss_from_string(const std::string& s) {
  if (s == "bc") return LossKind::kBc;
  if (s == "u" || s == "control_traj") return LossKind::kControlTraj;
  if (s == "x" || s == "state_traj") return LossKind::kStateTraj;
  if (s == "combined") return LossKind::kCombined;
  throw ConfigError("unknown loss '" + s + "'");
}

void LossConfig::validate() const {
  if (!(gamma > 0 && gamma <= 1)) throw ConfigError("LossConfig: gamma must lie in (0, 1]");
  if (!W.isApprox(W.transpose(), 0.0) || W.llt().info() != Eigen::Success)
    throw ConfigError("LossConfig: W must be symmetric positive definite");
  if (!(control_weight > 0)) throw ConfigError("LossConfig: control_weight must be > 0");
  if (!(mix_state >= 0 && mix_control >= 0 && mix_state + mix_control > 0))
    throw ConfigError("LossConfig: combination weights must be >= 0 and not both 0");
}

double loss_state_traj(const Eigen::Matrix<double, 4, Eigen::Dynamic>& X_hat,
                       const Eigen::Matrix<double, 4, Eigen::Dynamic>& X_star,
                       const LossConfig& cfg) {
  if (X_hat.cols() != X_star.cols() || X_hat.cols() < 2)
    throw std::invalid_argument("loss_state_traj: shape mismatch");
  const Eigen::Index n = X_hat.cols() - 1;
  double sum = 0.0;
  for (Eigen::Index k = 1; k <= n; ++k) {
    const Eigen::Vector4d d = X_hat.col(k) - X_star.col(k);
    sum += std::pow(cfg.gamma, static_cast<double>(k)) * d.dot(cfg.W * d);
  }
  return sum / static_cast<double>(n);
}

double loss_control_traj(const Eigen::RowVectorXd& U_hat, const Eigen::RowVectorXd& U_star,
                         const LossConfig& cfg) {
  if (U_hat.size() != U_star.size() || U_hat.size() < 1)
    throw std::invalid_argument("loss_control_traj: shape mismatch");
  double sum = 0.0;
  for (Eigen::Index k = 0; k < U_hat.size(); ++k) {
    const double d = U_hat(k) - U_star(k);
    sum += std::pow(cfg.gamma, static_cast<double>(k)) * cfg.control_weight * d * d;
  }
  return sum / static_cast<double>(U_hat.size());
}

double loss_bc(double u0_hat, double u0_star) {
  const double d = u0_hat - u0_star;
  return d * d;
}

Rollout rollout(const NetworkParams& net, const State& x0, const PlanParams& params) {
  PolicyModel<double> model(net);
  Eigen::MatrixXd X, U;
  model.plan(x0, params, net.horizon, X, U);
  return {X, U};
}

namespace {

using Mat4X = Eigen::Matrix<double, 4, Eigen::Dynamic>;

// Batched rollout with optional tapes. Column b of every stage matrix
// belongs to batch[b].
struct BatchForward {
  int n = 0;
  int b = 0;
  std::vector<Mat4X> X;            // n+1 entries, 4 x b
  Eigen::MatrixXd U;               // n x b
  Eigen::MatrixXd info;            // per-stage info, (rows) x (n*b), sequence-major
  Eigen::MatrixXd times;           // 1 x n
  std::vector<MlpTape<double>> tapes;
  EncoderTape<double> etape;
  MlpTape<double> bc_tape;
  Eigen::MatrixXd bc_in;
};

void run_forward(const NetworkParams& net, const std::vector<const Sample*>& batch,
                 const DiscreteDynamics& dyn, bool record, BatchForward& f) {
  const int n = net.horizon;
  const int nb = static_cast<int>(batch.size());
  f.n = n;
  f.b = nb;
  net.norm.require_fitted();
  Eigen::MatrixXd p(6, static_cast<Eigen::Index>(n) * nb);
  for (int s = 0; s < nb; ++s) {
    if (static_cast<int>(batch[s]->params.lead.size()) != n + 1)
      throw ContractViolation("batch_loss: sample horizon does not match the network");
    for (int k = 0; k < n; ++k) p.col(s * n + k) = batch[s]->params.stage(k);
  }
  const Eigen::MatrixXd pn = net.norm.param.apply<double>(p);
  Eigen::MatrixXd t(1, n);
  for (int k = 0; k < n; ++k) t(0, k) = k * net.td;
  f.times = net.norm.time.apply<double>(t);

  Mat4X x0(4, nb);
  for (int s = 0; s < nb; ++s) x0.col(s) = batch[s]->x0;
  f.X.assign(1, x0);
  const Eigen::Vector4d lo = net.norm.state.lo, sc = net.norm.state.scale();
  auto norm_state = [&](const Mat4X& x) -> Eigen::MatrixXd {
    return (x.colwise() - lo).array().colwise() * sc.array();
  };

  if (net.arch == Arch::kBc) {
    f.bc_in.resize(4 + 6 * n, nb);
    f.bc_in.topRows(4) = norm_state(x0);
    for (int s = 0; s < nb; ++s)
      f.bc_in.col(s).tail(6 * n) = Eigen::Map<const Eigen::VectorXd>(pn.col(s * n).data(), 6 * n);
    f.U = net.policy.forward(f.bc_in, record ? &f.bc_tape : nullptr);
    return;
  }

  if (net.encoder) {
    Eigen::MatrixXd tokens(7, pn.cols());
    tokens.topRows(6) = pn;
    for (int s = 0; s < nb; ++s) tokens.block(6, s * n, 1, n) = f.times;
    f.info = net.encoder->forward(tokens, record ? &f.etape : nullptr);
  } else {
    f.info = pn;
  }
  const Eigen::Index ni = f.info.rows();
  f.U.resize(n, nb);
  if (record) f.tapes.resize(static_cast<size_t>(n));
  Eigen::MatrixXd in(4 + ni + 1, nb);
  for (int k = 0; k < n; ++k) {
    in.topRows(4) = norm_state(f.X[k]);
    for (int s = 0; s < nb; ++s) in.col(s).segment(4, ni) = f.info.col(s * n + k);
    in.bottomRows(1).setConstant(f.times(0, k));
    const Eigen::MatrixXd u = net.policy.forward(in, record ? &f.tapes[k] : nullptr);
    f.U.row(k) = u;
    Mat4X next = dyn.A * f.X[k] + dyn.B * u;
    if (!next.allFinite())
      throw NumericalFailure("rollout diverged: non-finite state at step " + std::to_string(k + 1));
    f.X.push_back(std::move(next));
  }
}

}  // namespace

double batch_loss(const NetworkParams& net, const std::vector<const Sample*>& batch,
                  const LossConfig& loss, NetworkParams* grad) {
  if (batch.empty()) throw std::invalid_argument("batch_loss: empty batch");
  const bool is_bc = net.arch == Arch::kBc;
  if (is_bc != (loss.kind == LossKind::kBc))
    throw ConfigError("batch_loss: bc loss requires the bc architecture and vice versa");
  const DiscreteDynamics dyn = discretize<double>(net.td);
  BatchForward f;
  run_forward(net, batch, dyn, grad != nullptr, f);
  const int n = f.n, nb = f.b;
  const double inv_b = 1.0 / nb;

  if (is_bc) {
    Eigen::RowVectorXd target(nb);
    for (int s = 0; s < nb; ++s) target(s) = batch[s]->U_star(0);
    const Eigen::RowVectorXd d = f.U.row(0) - target;
    const double l = d.squaredNorm() * inv_b;
    if (grad) net.policy.backward(f.bc_tape, 2.0 * inv_b * d, grad->policy);
    return l;
  }

  const double ws = loss.kind == LossKind::kStateTraj  ? 1.0
                    : loss.kind == LossKind::kCombined ? loss.mix_state
                                                       : 0.0;
  const double wu = loss.kind == LossKind::kControlTraj ? 1.0
                    : loss.kind == LossKind::kCombined  ? loss.mix_control
                                                        : 0.0;
  const double inv_n = 1.0 / n;
  double total = 0.0;
  std::vector<Mat4X> dx(static_cast<size_t>(n + 1));
  Eigen::MatrixXd du = Eigen::MatrixXd::Zero(n, nb);
  for (int k = 0; k <= n; ++k) {
    const double g = std::pow(loss.gamma, k);
    if (k >= 1 && ws > 0) {
      Mat4X e(4, nb);
      for (int s = 0; s < nb; ++s) e.col(s) = f.X[k].col(s) - batch[s]->X_star.col(k);
      const Mat4X we = loss.W * e;
      total += ws * g * inv_n * inv_b * (e.array() * we.array()).sum();
      dx[k] = (2.0 * ws * g * inv_n * inv_b) * we;
    }
    if (k < n && wu > 0) {
      Eigen::RowVectorXd e(nb);
      for (int s = 0; s < nb; ++s) e(s) = f.U(k, s) - batch[s]->U_star(k);
      total += wu * g * inv_n * inv_b * loss.control_weight * e.squaredNorm();
      du.row(k) = (2.0 * wu * g * inv_n * inv_b * loss.control_weight) * e;
    }
  }
  if (!std::isfinite(total)) throw NumericalFailure("batch_loss: non-finite loss");
  if (!grad) return total;

  const Eigen::Index ni = f.info.rows();
  const Eigen::Vector4d sc = net.norm.state.scale();
  Eigen::MatrixXd dinfo;
  if (net.encoder) dinfo = Eigen::MatrixXd::Zero(ni, f.info.cols());
  Mat4X lam = dx[n].size() ? dx[n] : Mat4X(Mat4X::Zero(4, nb));
  for (int k = n - 1; k >= 0; --k) {
    const Eigen::MatrixXd dout = dyn.B.transpose() * lam + du.row(k);
    const Eigen::MatrixXd din = net.policy.backward(f.tapes[k], dout, grad->policy);
    lam = dyn.A.transpose() * lam;
    lam += (din.topRows(4).array().colwise() * sc.array()).matrix();
    if (k >= 1 && dx[k].size()) lam += dx[k];
    if (net.encoder)
      for (int s = 0; s < nb; ++s) dinfo.col(s * n + k) += din.col(s).segment(4, ni);
  }
  if (net.encoder) net.encoder->backward(f.etape, dinfo, *grad->encoder);
  return total;
}

Adam::Adam(const NetworkParams& like, AdamConfig c) : cfg(c) {
  NetworkParams z = like.zeros_like();
  ParamList<double> p;
  z.collect(p);
  for (const auto& x : p) {
    m.push_back(Eigen::VectorXd::Zero(x.size()));
    v.push_back(Eigen::VectorXd::Zero(x.size()));
  }
}

void Adam::step(NetworkParams& params, NetworkParams& grad) {
  ParamList<double> p, g;
  params.collect(p);
  grad.collect(g);
  if (p.size() != m.size()) throw ContractViolation("Adam::step: parameter layout changed");
  ++t;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  for (size_t i = 0; i < p.size(); ++i) {
    if (p[i].size() != m[i].size()) throw ContractViolation("Adam::step: tensor size changed");
    m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
    v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i].cwiseAbs2();
    p[i].array() -= cfg.lr * (m[i].array() / c1) / ((v[i].array() / c2).sqrt() + cfg.eps);
  }
}

void TrainConfig::validate() const {
  if (epochs < 0 || batch_size < 1 || train_size < 1 || valid_size < 1 || test_size < 0)
    throw ConfigError("TrainConfig: sizes and epochs must be positive");
  if (!(adam.lr > 0 && adam.eps > 0))
    throw ConfigError("TrainConfig: learning rate and eps must be positive");
  if (!(adam.beta1 > 0 && adam.beta1 < 1 && adam.beta2 > 0 && adam.beta2 < 1))
    throw ConfigError("TrainConfig: Adam betas must lie in (0, 1)");
}

double dataset_loss(const NetworkParams& net, const std::vector<Sample>& data,
                    const LossConfig& loss) {
  if (data.empty()) throw std::invalid_argument("dataset_loss: empty dataset");
  constexpr size_t kChunk = 512;
  double sum = 0.0;
  std::vector<const Sample*> batch;
  for (size_t i = 0; i < data.size(); i += kChunk) {
    batch.clear();
    for (size_t j = i; j < std::min(data.size(), i + kChunk); ++j) batch.push_back(&data[j]);
    sum += batch_loss(net, batch, loss) * static_cast<double>(batch.size());
  }
  return sum / static_cast<double>(data.size());
}

TrainResult train(const std::vector<Sample>& train_set, const std::vector<Sample>& valid_set,
                  const ArchConfig& arch, const LossConfig& loss, const TrainConfig& tcfg,
                  const OcpConfig& ocp, const EpochHook& hook) {
  if (train_set.empty() || valid_set.empty())
    throw std::invalid_argument("train: training and validation sets must be non-empty");
  Rng rng(derive_seed(tcfg.seed, 0x1417, 0));
  std::mt19937_64 init_rng(rng.next());
  const Normalizer norm = fit_normalizer(train_set, ocp);
  const NetworkParams init = init_network(arch, ocp.horizon, ocp.td, norm, init_rng);
  return train_from(init, train_set, valid_set, loss, tcfg, hook);
}

TrainResult train_from(const NetworkParams& init, const std::vector<Sample>& train_set,
                       const std::vector<Sample>& valid_set, const LossConfig& loss,
                       const TrainConfig& tcfg, const EpochHook& hook,
                       std::optional<TrainState> resume) {
  tcfg.validate();
  loss.validate();
  if (train_set.empty() || valid_set.empty())
    throw std::invalid_argument("train: training and validation sets must be non-empty");
  TrainState st;
  if (resume) {
    st = std::move(*resume);
  } else {
    st.params = init;
    st.best = init;
    st.best_valid = std::numeric_limits<double>::infinity();
    st.adam = Adam(init, tcfg.adam);
  }
  TrainResult res;
  std::vector<size_t> order(train_set.size());
  std::vector<const Sample*> batch;
  try {
    for (int e = st.epoch; e < tcfg.epochs; ++e) {
      for (size_t i = 0; i < order.size(); ++i) order[i] = i;
      Rng shuffle(derive_seed(tcfg.seed, 0x5eed, static_cast<std::uint64_t>(e)));
      for (size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[static_cast<size_t>(shuffle.uniform_int(0, i - 1))]);
      double sum = 0.0;
      for (size_t i = 0; i < order.size(); i += static_cast<size_t>(tcfg.batch_size)) {
        batch.clear();
        for (size_t j = i; j < std::min(order.size(), i + tcfg.batch_size); ++j)
          batch.push_back(&train_set[order[j]]);
        NetworkParams g = st.params.zeros_like();
        const double l = batch_loss(st.params, batch, loss, &g);
        if (!std::isfinite(l))
          throw NumericalFailure("non-finite training loss in epoch " + std::to_string(e));
        sum += l * static_cast<double>(batch.size());
        st.adam.step(st.params, g);
      }
      const double valid = dataset_loss(st.params, valid_set, loss);
      if (!std::isfinite(valid))
        throw NumericalFailure("non-finite validation loss in epoch " + std::to_string(e));
      st.curve.train.push_back(sum / static_cast<double>(order.size()));
      st.curve.valid.push_back(valid);
      if (valid < st.best_valid) {
        st.best_valid = valid;
        st.best = st.params;
        st.curve.best_epoch = e;
      }
      st.epoch = e + 1;
      if (hook && !hook(st)) break;
    }
  } catch (const NumericalFailure& err) {
    res.diverged = true;
    res.divergence = err.what();
  }
  res.best = st.best;
  res.final = st.params;
  res.curve = st.curve;
  return res;
}

double trajectory_mse(const NetworkParams& net, const std::vector<Sample>& data) {
  if (net.arch == Arch::kBc) return std::numeric_limits<double>::quiet_NaN();
  LossConfig l;
  l.gamma = 1.0;
  return dataset_loss(net, data, l);
}

double policy_mse(const NetworkParams& net, const std::vector<Sample>& data) {
  if (data.empty()) throw std::invalid_argument("policy_mse: empty dataset");
  const DiscreteDynamics dyn = discretize<double>(net.td);
  double sum = 0.0;
  constexpr size_t kChunk = 512;
  std::vector<const Sample*> batch;
  for (size_t i = 0; i < data.size(); i += kChunk) {
    batch.clear();
    for (size_t j = i; j < std::min(data.size(), i + kChunk); ++j) batch.push_back(&data[j]);
    BatchForward f;
    run_forward(net, batch, dyn, false, f);
    for (size_t s = 0; s < batch.size(); ++s)
      sum += loss_bc(f.U(0, static_cast<Eigen::Index>(s)), batch[s]->U_star(0));
  }
  return sum / static_cast<double>(data.size());
}

Eigen::RowVectorXd controls_from_states(const DiscreteDynamics& dyn,
                                        const Eigen::Matrix<double, 4, Eigen::Dynamic>& X) {
  if (X.cols() < 2) throw std::invalid_argument("controls_from_states: need two states");
  Eigen::RowVectorXd u(X.cols() - 1);
  const double bb = dyn.B.squaredNorm();
  for (Eigen::Index k = 0; k + 1 < X.cols(); ++k)
    u(k) = dyn.B.dot(X.col(k + 1) - dyn.A * X.col(k)) / bb;
  return u;
}

namespace {

using detail::json;

json vectors_to_json(const std::vector<Eigen::VectorXd>& vs) {
  json a = json::array();
  for (const auto& v : vs) a.push_back(std::vector<double>(v.data(), v.data() + v.size()));
  return a;
}

std::vector<Eigen::VectorXd> vectors_from_json(const json& j) {
  std::vector<Eigen::VectorXd> out;
  for (const auto& x : j) {
    const auto d = x.get<std::vector<double>>();
    out.push_back(Eigen::Map<const Eigen::VectorXd>(d.data(), static_cast<Eigen::Index>(d.size())));
  }
  return out;
}

json optional_double(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

}  // namespace

std::string save_train_state_json(const TrainState& s) {
  json j;
  j["format"] = "plannetx-train-state";
  j["version"] = 1;
  j["epoch"] = s.epoch;
  j["params"] = detail::weights_to_json(s.params);
  j["best"] = detail::weights_to_json(s.best);
  j["best_valid"] = optional_double(s.best_valid);
  j["adam"] = {{"lr", s.adam.cfg.lr},     {"beta1", s.adam.cfg.beta1},
               {"beta2", s.adam.cfg.beta2}, {"eps", s.adam.cfg.eps},
               {"t", s.adam.t},           {"m", vectors_to_json(s.adam.m)},
               {"v", vectors_to_json(s.adam.v)}};
  j["curve"] = {{"train", s.curve.train}, {"valid", s.curve.valid},
                {"best_epoch", s.curve.best_epoch}};
  return j.dump();
}

TrainState load_train_state_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    if (j.at("format") != "plannetx-train-state" || j.at("version") != 1)
      throw ConfigError("train state: unsupported format or version");
    TrainState s;
    s.epoch = j.at("epoch").get<int>();
    s.params = detail::weights_from_json(j.at("params"));
    s.best = detail::weights_from_json(j.at("best"));
    s.best_valid = j.at("best_valid").is_null() ? std::numeric_limits<double>::infinity()
                                                : j.at("best_valid").get<double>();
    const auto& a = j.at("adam");
    s.adam.cfg = {a.at("lr").get<double>(), a.at("beta1").get<double>(),
                  a.at("beta2").get<double>(), a.at("eps").get<double>()};
    s.adam.t = a.at("t").get<std::int64_t>();
    s.adam.m = vectors_from_json(a.at("m"));
    s.adam.v = vectors_from_json(a.at("v"));
    s.curve.train = j.at("curve").at("train").get<std::vector<double>>();
    s.curve.valid = j.at("curve").at("valid").get<std::vector<double>>();
    s.curve.best_epoch = j.at("curve").at("best_epoch").get<int>();
    return s;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("train state: malformed document: ") + e.what());
  }
}

}  // namespace plannetx
