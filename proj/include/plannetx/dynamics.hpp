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

#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>

// Longitudinal ego model: a chain of four integrators driven by snap.
//
//   d^4 s / dt^4 = u,      x = [s, v, a, j]^T
//
// With a zero-order hold on u the discrete map x+ = A x + B u is exact,
// since the continuous system matrix is nilpotent and its exponential
// terminates after four terms.

namespace plannetx {

enum StateIndex : int { kPos = 0, kVel = 1, kAcc = 2, kJerk = 3 };

template <typename Scalar>
using StateT = Eigen::Matrix<Scalar, 4, 1>;
using State = StateT<double>;

template <typename Scalar>
struct DiscreteDynamicsT {
  Scalar td{};
  Eigen::Matrix<Scalar, 4, 4> A;
  Eigen::Matrix<Scalar, 4, 1> B;

  template <typename Other>
  DiscreteDynamicsT<Other> cast() const {
    return {static_cast<Other>(td), A.template cast<Other>(),
            B.template cast<Other>()};
  }
};
using DiscreteDynamics = DiscreteDynamicsT<double>;

// Throws std::invalid_argument unless td is finite and positive.
template <typename Scalar = double>
DiscreteDynamicsT<Scalar> discretize(Scalar td) {
  if (!std::isfinite(static_cast<double>(td)) || td <= Scalar(0))
    throw std::invalid_argument("discretize: time step must be finite and > 0");
  DiscreteDynamicsT<Scalar> d;
  d.td = td;
  d.A.setZero();
  Scalar pw[5];
  pw[0] = Scalar(1);
  for (int i = 1; i < 5; ++i) pw[i] = pw[i - 1] * td / Scalar(i);  // td^i / i!
  for (int i = 0; i < 4; ++i)
    for (int k = i; k < 4; ++k) d.A(i, k) = pw[k - i];
  for (int i = 0; i < 4; ++i) d.B(i) = pw[4 - i];
  return d;
}

template <typename Scalar>
StateT<Scalar> step(const DiscreteDynamicsT<Scalar>& dyn,
                    const StateT<Scalar>& x, Scalar u) {
  return dyn.A * x + dyn.B * u;
}

// The model is linear, so the Jacobians are the system matrices themselves.
template <typename Scalar>
std::pair<Eigen::Matrix<Scalar, 4, 4>, Eigen::Matrix<Scalar, 4, 1>>
step_jacobians(const DiscreteDynamicsT<Scalar>& dyn) {
  return {dyn.A, dyn.B};
}

// Free response x_k = A^k x0 and input-to-state maps for a horizon of n
// steps: states(k) = free(k) + gamma[k] * U with gamma[k] of size 4 x n
// (columns >= k are zero).
struct CondensedDynamics {
  Eigen::Matrix<double, 4, Eigen::Dynamic> free;  // 4 x (n+1)
  std::vector<Eigen::Matrix<double, 4, Eigen::Dynamic>> gamma;  // n+1 blocks
};

CondensedDynamics condense(const DiscreteDynamics& dyn, const State& x0, int n);

bool all_finite(const State& x);

}  // namespace plannetx
