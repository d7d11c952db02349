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

#include "plannetx/qp.hpp"

namespace plannetx {

QpResult solve_dense_qp(const Eigen::MatrixXd& h, const Eigen::VectorXd& g,
                        const Eigen::MatrixXd& c, const Eigen::VectorXd& d,
                        const QpOptions& opt) {
  return solve_qp(h, g, DenseConstraints(c), d, opt);
}

}  // namespace plannetx
