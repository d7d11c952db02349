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

#include "plannetx/dynamics.hpp"

#include <vector>

namespace plannetx {

CondensedDynamics condense(const DiscreteDynamics& dyn, const State& x0,
                           int n) {
  CondensedDynamics c;
  c.free.resize(4, n + 1);
  c.gamma.assign(n + 1, Eigen::Matrix<double, 4, Eigen::Dynamic>::Zero(4, n));
  c.free.col(0) = x0;
  for (int k = 0; k < n; ++k) {
    c.free.col(k + 1) = dyn.A * c.free.col(k);
    c.gamma[k + 1].leftCols(k) = dyn.A * c.gamma[k].leftCols(k);
    c.gamma[k + 1].col(k) = dyn.B;
  }
  return c;
}

bool all_finite(const State& x) { return x.allFinite(); }

}  // namespace plannetx
