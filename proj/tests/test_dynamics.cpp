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

#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "plannetx/dynamics.hpp"

using namespace plannetx;

TEST_CASE("discretize at td = 1 gives the factorial series") {
  const auto d = discretize(1.0);
  CHECK(d.A(0, 0) == 1.0);
  CHECK(d.A(0, 1) == 1.0);
  CHECK(d.A(0, 2) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(d.A(0, 3) == doctest::Approx(1.0 / 6.0).epsilon(1e-15));
  CHECK(d.B(0) == doctest::Approx(1.0 / 24.0).epsilon(1e-15));
  CHECK(d.B(1) == doctest::Approx(1.0 / 6.0).epsilon(1e-15));
  CHECK(d.B(2) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(d.B(3) == 1.0);
}

TEST_CASE("system matrices match the matrix exponential series") {
  for (double td : {0.05, 0.1, 0.2, 0.5, 1.0}) {
    const auto d = discretize(td);
    const auto e = oracle::integrator_chain_expm(td);
    CHECK((d.A - e.topLeftCorner<4, 4>()).lpNorm<Eigen::Infinity>() < 1e-12);
    CHECK((d.B - e.topRightCorner<4, 1>()).lpNorm<Eigen::Infinity>() < 1e-12);
    for (int i = 0; i < 4; ++i) {
      CHECK(d.A(i, i) == 1.0);
      for (int k = 0; k < i; ++k) CHECK(d.A(i, k) == 0.0);
    }
  }
}

TEST_CASE("discretize rejects bad time steps") {
  CHECK_THROWS_AS(discretize(0.0), std::invalid_argument);
  CHECK_THROWS_AS(discretize(-0.1), std::invalid_argument);
  CHECK_THROWS_AS(discretize(std::nan("")), std::invalid_argument);
  CHECK_THROWS_AS(discretize(INFINITY), std::invalid_argument);
}

TEST_CASE("step examples") {
  const auto d = discretize(0.2);
  const State a = step(d, State(0, 10, 0, 0), 0.0);
  CHECK((a - State(2, 10, 0, 0)).norm() < 1e-12);

  const State b = step(d, State::Zero().eval(), 24.0);
  CHECK((b - State(0.0016, 0.032, 0.48, 4.8)).norm() < 1e-12);

  const State c = step(d, State(100, 20, -1, 0), 0.0);
  CHECK((c - State(103.98, 19.8, -1, 0)).norm() < 1e-12);
}

TEST_CASE("two steps equal one step of twice the length without input") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 5.0);
  const auto d1 = discretize(0.2), d2 = discretize(0.4);
  for (int t = 0; t < 50; ++t) {
    const State x(n(rng), n(rng), n(rng), n(rng));
    const State twice = step(d1, step(d1, x, 0.0), 0.0);
    CHECK((twice - step(d2, x, 0.0)).lpNorm<Eigen::Infinity>() < 1e-12);
  }
  for (double t1 : {0.05, 0.1, 0.3}) {
    for (double t2 : {0.05, 0.2, 0.5}) {
      const auto prod = discretize(t2).A * discretize(t1).A;
      CHECK((prod - discretize(t1 + t2).A).lpNorm<Eigen::Infinity>() < 1e-12);
    }
  }
}

TEST_CASE("step is affine") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0.0, 10.0);
  const auto d = discretize(0.2);
  for (int t = 0; t < 50; ++t) {
    const State x1(n(rng), n(rng), n(rng), n(rng));
    const State x2(n(rng), n(rng), n(rng), n(rng));
    const double u1 = n(rng), u2 = n(rng);
    const State lhs = step(d, State(x1 + x2), u1 + u2);
    const State rhs = step(d, x1, u1) + step(d, x2, u2) - step(d, State::Zero().eval(), 0.0);
    CHECK((lhs - rhs).lpNorm<Eigen::Infinity>() < 1e-12 * (1.0 + lhs.norm()));
  }
}

TEST_CASE("constant unit snap reproduces the polynomial response") {
  const double td = 0.2;
  const auto d = discretize(td);
  State x = State::Zero();
  for (int k = 1; k <= 30; ++k) {
    x = step(d, x, 1.0);
    const double t = k * td;
    const State expect(std::pow(t, 4) / 24.0, std::pow(t, 3) / 6.0, t * t / 2.0, t);
    CHECK((x - expect).lpNorm<Eigen::Infinity>() < 1e-11);
  }
}

TEST_CASE("step jacobians agree with central differences") {
  const auto d = discretize(0.2);
  const auto [ja, jb] = step_jacobians(d);
  CHECK((ja - d.A).norm() == 0.0);
  const State x0(12.0, 8.0, -0.5, 0.3);
  const double u0 = 1.7, h = 1e-4;
  for (int c = 0; c < 4; ++c) {
    State xp = x0, xm = x0;
    xp(c) += h;
    xm(c) -= h;
    const State fd = (step(d, xp, u0) - step(d, xm, u0)) / (2 * h);
    CHECK((fd - ja.col(c)).lpNorm<Eigen::Infinity>() < 1e-8);
  }
  const State fdu = (step(d, x0, u0 + h) - step(d, x0, u0 - h)) / (2 * h);
  CHECK((fdu - jb).lpNorm<Eigen::Infinity>() < 1e-8);
}

TEST_CASE("condensed maps reproduce the recursion") {
  const auto d = discretize(0.2);
  const State x0(3.0, 14.0, 0.4, -0.2);
  const int n = 30;
  const auto c = condense(d, x0, n);
  Eigen::VectorXd u = Eigen::VectorXd::LinSpaced(n, -3.0, 2.0);
  State x = x0;
  for (int k = 0; k < n; ++k) {
    x = step(d, x, u(k));
    const State cx = c.free.col(k + 1) + c.gamma[k + 1] * u;
    CHECK((cx - x).lpNorm<Eigen::Infinity>() < 1e-9);
  }
}

TEST_CASE("float instantiation") {
  const auto d = discretize<float>(0.2f);
  const auto x = step(d, StateT<float>(0, 10, 0, 0), 0.0f);
  CHECK(x(0) == doctest::Approx(2.0f));
  CHECK(d.cast<double>().td == doctest::Approx(0.2));
}
