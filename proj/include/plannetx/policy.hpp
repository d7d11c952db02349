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

#include <Eigen/Dense>

#include "plannetx/dynamics.hpp"
#include "plannetx/nn.hpp"
#include "plannetx/ocp.hpp"

// Inference-only view of a trained planner, instantiable in float for the
// timing benchmarks.

namespace plannetx {

template <typename Scalar>
class PolicyModel {
 public:
  using MatS = Mat<Scalar>;
  using VecS = Vec<Scalar>;

  explicit PolicyModel(const NetworkParams& p)
      : arch_(p.arch),
        horizon_(p.horizon),
        mlp_(p.policy.template cast<Scalar>()),
        dyn_(discretize<double>(p.td).template cast<Scalar>()) {
    p.norm.require_fitted();
    state_lo_ = p.norm.state.lo.cast<Scalar>();
    state_scale_ = p.norm.state.scale().cast<Scalar>();
    param_lo_ = p.norm.param.lo.cast<Scalar>();
    param_scale_ = p.norm.param.scale().cast<Scalar>();
    if (p.encoder) enc_ = p.encoder->template cast<Scalar>();
    MatS t(1, horizon_);
    for (int k = 0; k < horizon_; ++k) t(0, k) = static_cast<Scalar>(k * p.td);
    time_ = p.norm.time.apply<Scalar>(t);
  }

  Arch arch() const { return arch_; }
  int horizon() const { return horizon_; }
  const Mlp<Scalar>& mlp() const { return mlp_; }

  // Computes `steps` controls (1 = first control only, horizon = full plan)
  // using `fwd` as the policy network. X receives steps+1 states.
  template <class Forward>
  void plan_with(Forward&& fwd, const State& x0, const PlanParams& params, int steps,
                 MatS& X, MatS& U) const {
    if (arch_ == Arch::kBc) steps = 1;
    MatS pn(6, horizon_);
    for (int k = 0; k < horizon_; ++k) pn.col(k) = params.stage(k).template cast<Scalar>();
    pn = (pn.colwise() - param_lo_).array().colwise() * param_scale_.array();
    X.resize(4, steps + 1);
    U.resize(1, steps);
    X.col(0) = x0.cast<Scalar>();
    if (arch_ == Arch::kBc) {
      MatS in(4 + 6 * horizon_, 1);
      in.topRows(4) = normalized_state(X.col(0));
      in.bottomRows(6 * horizon_) = Eigen::Map<const MatS>(pn.data(), 6 * horizon_, 1);
      U(0, 0) = fwd(in)(0, 0);
      X.col(1) = dyn_.A * X.col(0) + dyn_.B * U(0, 0);
      return;
    }
    MatS info;
    if (enc_) {
      MatS tokens(7, horizon_);
      tokens << pn, time_;
      info = enc_->forward(tokens);
    } else {
      info = std::move(pn);
    }
    const Eigen::Index ni = info.rows();
    MatS in(4 + ni + 1, 1);
    for (int k = 0; k < steps; ++k) {
      in.topRows(4) = normalized_state(X.col(k));
      in.middleRows(4, ni) = info.col(k);
      in(4 + ni, 0) = time_(0, k);
      U(0, k) = fwd(in)(0, 0);
      X.col(k + 1) = dyn_.A * X.col(k) + dyn_.B * U(0, k);
    }
  }

  void plan(const State& x0, const PlanParams& params, int steps, MatS& X, MatS& U) const {
    plan_with([this](const MatS& in) { return mlp_.forward(in); }, x0, params, steps, X, U);
  }

  Scalar first_control(const State& x0, const PlanParams& params) const {
    MatS X, U;
    plan(x0, params, 1, X, U);
    return U(0, 0);
  }

 private:
  template <class Derived>
  VecS normalized_state(const Eigen::MatrixBase<Derived>& x) const {
    return (x - state_lo_).cwiseProduct(state_scale_);
  }

  Arch arch_;
  int horizon_;
  Mlp<Scalar> mlp_;
  std::optional<Encoder<Scalar>> enc_;
  DiscreteDynamicsT<Scalar> dyn_;
  VecS state_lo_, state_scale_, param_lo_, param_scale_;
  MatS time_;
};

}  // namespace plannetx
