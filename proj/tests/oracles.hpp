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

// Reference computations used only by the tests. They take independent
// routes from the library code they check.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

// exp([[Ac, Bc], [0, 0]] * t) by a plain power series, where Ac is the
// continuous integrator chain. Returns the 5x5 augmented exponential; the
// top-left 4x4 block is A_d and the top-right column is B_d.
inline Eigen::Matrix<double, 5, 5> integrator_chain_expm(double t,
                                                         int terms = 25) {
  Eigen::Matrix<double, 5, 5> m = Eigen::Matrix<double, 5, 5>::Zero();
  for (int i = 0; i < 4; ++i) m(i, i + 1) = 1.0;
  m *= t;
  Eigen::Matrix<double, 5, 5> sum = Eigen::Matrix<double, 5, 5>::Identity();
  Eigen::Matrix<double, 5, 5> term = Eigen::Matrix<double, 5, 5>::Identity();
  for (int i = 1; i < terms; ++i) {
    term = term * m / static_cast<double>(i);
    sum += term;
  }
  return sum;
}

template <class F>
double central_difference(F&& f, double x, double h) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

// |a - f| / max(|a|, |f|, floor). The floor keeps round-off in tiny
// gradients from reading as large relative errors.
inline double rel_error(double a, double f, double floor) {
  return std::abs(a - f) / std::max({std::abs(a), std::abs(f), floor});
}

struct GradCheck {
  double worst = 0.0;
  int checked = 0;
};

// Compares analytic gradients against central differences of `loss` on
// `samples` coordinates drawn uniformly from the flattened parameter list.
// params and grads must have the same layout.
template <class Loss>
GradCheck check_gradients(std::vector<Eigen::Map<Eigen::VectorXd>>& params,
                          const std::vector<Eigen::Map<Eigen::VectorXd>>& grads,
                          Loss&& loss, int samples, double h, double floor,
                          unsigned seed) {
  std::vector<std::pair<size_t, Eigen::Index>> coords;
  for (size_t t = 0; t < params.size(); ++t)
    for (Eigen::Index i = 0; i < params[t].size(); ++i) coords.emplace_back(t, i);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<size_t> pick(0, coords.size() - 1);
  GradCheck out;
  for (int s = 0; s < samples; ++s) {
    const auto [t, i] = coords[pick(rng)];
    const double keep = params[t][i];
    params[t][i] = keep + h;
    const double up = loss();
    params[t][i] = keep - h;
    const double down = loss();
    params[t][i] = keep;
    const double fd = (up - down) / (2.0 * h);
    out.worst = std::max(out.worst, rel_error(grads[t][i], fd, floor));
    ++out.checked;
  }
  return out;
}

}  // namespace oracle
