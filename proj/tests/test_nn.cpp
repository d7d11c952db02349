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

#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "oracles.hpp"
#include "plannetx/nn.hpp"

using namespace plannetx;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

MatrixXd random_matrix(int r, int c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  return MatrixXd::NullaryExpr(r, c, [&] { return n(rng); });
}

Normalizer unit_normalizer() {
  Normalizer n;
  n.state = {VectorXd::Zero(4), VectorXd::Ones(4)};
  n.param = {VectorXd::Zero(6), VectorXd::Ones(6)};
  n.time = {VectorXd::Zero(1), VectorXd::Ones(1)};
  n.fitted = true;
  return n;
}

}  // namespace

TEST_CASE("mlp with zero weights returns the output bias") {
  Mlp<double> m({5, 8, 8, 1});
  m.layers.back().bias << 0.75;
  std::mt19937_64 rng(1);
  const MatrixXd out = m.forward(random_matrix(5, 7, rng));
  CHECK(out.rows() == 1);
  for (Eigen::Index i = 0; i < out.cols(); ++i) CHECK(out(0, i) == 0.75);
}

TEST_CASE("single layer equals W x + b") {
  std::mt19937_64 rng(2);
  Mlp<double> m({3, 2});
  m.layers[0].weight << 1, 2, 3, -1, 0.5, 4;
  m.layers[0].bias << 0.1, -0.2;
  MatrixXd x(3, 1);
  x << 1, -2, 0.5;
  const MatrixXd y = m.forward(x);
  CHECK(y(0, 0) == doctest::Approx(1 - 4 + 1.5 + 0.1).epsilon(1e-15));
  CHECK(y(1, 0) == doctest::Approx(-1 - 1 + 2 - 0.2).epsilon(1e-15));
}

TEST_CASE("forward is deterministic and shape-checked") {
  std::mt19937_64 rng(3);
  auto m = Mlp<double>::init({4, 16, 16, 1}, rng);
  const MatrixXd x = random_matrix(4, 9, rng);
  CHECK((m.forward(x).array() == m.forward(x).array()).all());
  CHECK_THROWS_AS(m.forward(random_matrix(5, 2, rng)), std::invalid_argument);
}

TEST_CASE("mlp parameter gradients match central differences") {
  std::mt19937_64 rng(4);
  auto m = Mlp<double>::init({6, 24, 24, 24, 3}, rng);
  for (auto& l : m.layers) l.bias = VectorXd::Constant(l.out_dim(), 0.05);
  const MatrixXd x = random_matrix(6, 5, rng);
  const MatrixXd c = random_matrix(3, 5, rng);
  auto loss = [&] { return (m.forward(x).array() * c.array()).sum(); };

  MlpTape<double> tape;
  m.forward(x, &tape);
  auto g = m.zeros_like();
  const MatrixXd dx = m.backward(tape, c, g);

  ParamList<double> p, gp;
  m.collect(p);
  g.collect(gp);
  const auto r = oracle::check_gradients(p, gp, loss, 300, 1e-6, 1e-4, 11);
  CHECK(r.worst < 1e-6);

  // Input gradient, one coordinate at a time.
  MatrixXd xm = x;
  double worst = 0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double keep = xm(i);
    xm(i) = keep + 1e-6;
    const double up = (m.forward(xm).array() * c.array()).sum();
    xm(i) = keep - 1e-6;
    const double down = (m.forward(xm).array() * c.array()).sum();
    xm(i) = keep;
    worst = std::max(worst, oracle::rel_error(dx(i), (up - down) / 2e-6, 1e-4));
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("dead relu unit passes no gradient") {
  std::mt19937_64 rng(5);
  auto m = Mlp<double>::init({3, 4, 1}, rng);
  m.layers[0].weight.row(2).setZero();
  m.layers[0].bias(2) = -1.0;
  const MatrixXd x = random_matrix(3, 6, rng);
  MlpTape<double> tape;
  m.forward(x, &tape);
  auto g = m.zeros_like();
  m.backward(tape, MatrixXd::Ones(1, 6), g);
  CHECK(g.layers[0].weight.row(2).norm() == 0.0);
  CHECK(g.layers[0].bias(2) == 0.0);
  CHECK(g.layers[1].weight(0, 2) == 0.0);
}

TEST_CASE("linear network input gradient is W^T dy") {
  std::mt19937_64 rng(6);
  auto m = Mlp<double>::init({5, 3}, rng);
  const MatrixXd x = random_matrix(5, 4, rng);
  const MatrixXd dy = random_matrix(3, 4, rng);
  MlpTape<double> tape;
  m.forward(x, &tape);
  auto g = m.zeros_like();
  const MatrixXd dx = m.backward(tape, dy, g);
  CHECK((dx - m.layers[0].weight.transpose() * dy).norm() == 0.0);
}

TEST_CASE("backward rejects a tape from another network") {
  std::mt19937_64 rng(7);
  auto a = Mlp<double>::init({2, 4, 1}, rng);
  auto b = Mlp<double>::init({2, 4, 1}, rng);
  MlpTape<double> tape;
  a.forward(MatrixXd::Ones(2, 1), &tape);
  auto g = b.zeros_like();
  CHECK_THROWS_AS(b.backward(tape, MatrixXd::Ones(1, 1), g), ContractViolation);
  MlpTape<double> empty;
  CHECK_THROWS_AS(a.backward(empty, MatrixXd::Ones(1, 1), g), ContractViolation);
}

TEST_CASE("layer norm output statistics") {
  std::mt19937_64 rng(8);
  LayerNorm<double> ln(32);
  const MatrixXd x = random_matrix(32, 20, rng, 3.0).array() + 7.0;
  const MatrixXd y = ln.normalize(x, nullptr);
  for (Eigen::Index c = 0; c < y.cols(); ++c) {
    const double mean = y.col(c).mean();
    const double var = (y.col(c).array() - mean).square().mean();
    CHECK(std::abs(mean) < 1e-10);
    CHECK(std::abs(var - 1.0) < 1e-8);
  }
}

TEST_CASE("encoder with uniform attention maps identical tokens to identical outputs") {
  std::mt19937_64 rng(9);
  auto e = Encoder<double>::init(7, 10, 16, 4, 1, 64, 8, rng);
  e.layers[0].q.weight.setZero();
  e.layers[0].k.weight.setZero();
  e.pos.setZero();
  MatrixXd tokens = random_matrix(7, 1, rng).replicate(1, 10);
  const MatrixXd z = e.forward(tokens);
  for (Eigen::Index c = 1; c < z.cols(); ++c) CHECK((z.col(c) - z.col(0)).norm() < 1e-12);
}

TEST_CASE("encoder is equivariant to permuting tokens with their positions") {
  std::mt19937_64 rng(10);
  auto e = Encoder<double>::init(7, 12, 32, 4, 3, 128, 32, rng);
  const MatrixXd tokens = random_matrix(7, 12, rng);
  std::vector<int> perm(12);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);

  auto ep = e;
  MatrixXd tp(7, 12);
  for (int i = 0; i < 12; ++i) {
    tp.col(i) = tokens.col(perm[i]);
    ep.pos.col(i) = e.pos.col(perm[i]);
  }
  const MatrixXd z = e.forward(tokens);
  const MatrixXd zp = ep.forward(tp);
  for (int i = 0; i < 12; ++i) CHECK((zp.col(i) - z.col(perm[i])).norm() < 1e-12);
}

TEST_CASE("encoder batch columns are independent sequences") {
  std::mt19937_64 rng(11);
  auto e = Encoder<double>::init(7, 6, 16, 2, 2, 32, 4, rng);
  const MatrixXd a = random_matrix(7, 6, rng), b = random_matrix(7, 6, rng);
  MatrixXd ab(7, 12);
  ab << a, b;
  const MatrixXd z = e.forward(ab);
  CHECK((z.leftCols(6) - e.forward(a)).norm() < 1e-13);
  CHECK((z.rightCols(6) - e.forward(b)).norm() < 1e-13);
  CHECK_THROWS_AS(e.forward(random_matrix(7, 5, rng)), std::invalid_argument);
}

TEST_CASE("encoder gradients match central differences") {
  std::mt19937_64 rng(12);
  auto e = Encoder<double>::init(7, 8, 16, 4, 2, 64, 8, rng);
  for (auto& l : e.layers) {
    l.ln1.gamma = VectorXd::Constant(16, 1.1);
    l.ln2.beta = VectorXd::Constant(16, 0.05);
    l.ff1.bias = VectorXd::Constant(64, 0.02);
  }
  const MatrixXd tokens = random_matrix(7, 16, rng);  // two sequences
  const MatrixXd c = random_matrix(8, 16, rng);
  auto loss = [&] { return (e.forward(tokens).array() * c.array()).sum(); };
  EncoderTape<double> tape;
  e.forward(tokens, &tape);
  auto g = e.zeros_like();
  const MatrixXd dtok = e.backward(tape, c, g);
  ParamList<double> p, gp;
  e.collect(p);
  g.collect(gp);
  const auto r = oracle::check_gradients(p, gp, loss, 400, 1e-5, 1e-4, 13);
  CHECK(r.worst < 1e-5);

  MatrixXd tm = tokens;
  double worst = 0;
  for (Eigen::Index i = 0; i < tm.size(); i += 3) {
    const double keep = tm(i);
    tm(i) = keep + 1e-5;
    const double up = (e.forward(tm).array() * c.array()).sum();
    tm(i) = keep - 1e-5;
    const double down = (e.forward(tm).array() * c.array()).sum();
    tm(i) = keep;
    worst = std::max(worst, oracle::rel_error(dtok(i), (up - down) / 2e-5, 1e-4));
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("encoder rejects a head count that does not divide d_model") {
  CHECK_THROWS_AS(Encoder<double>(7, 4, 30, 4, 1, 8, 2), std::invalid_argument);
}

TEST_CASE("normalizer maps min, max and midpoint") {
  Normalizer n;
  n.state = {VectorXd::Zero(4), VectorXd::Zero(4)};
  n.param = {(VectorXd(6) << 0, 10, -4, 5, 5, 0).finished(),
             (VectorXd(6) << 100, 30, 2, 5, 35, 200).finished()};
  n.time = {VectorXd::Zero(1), VectorXd::Constant(1, 5.8)};
  MatrixXd p(6, 3);
  p.col(0) << 0, 10, -4, 5, 5, 0;
  p.col(1) << 100, 30, 2, 5, 35, 200;
  p.col(2) << 50, 20, -1, 5, 20, 100;
  CHECK_THROWS_AS(normalize(n, FeatureGroup::kParam, p), ContractViolation);
  n.fitted = true;
  const MatrixXd y = normalize(n, FeatureGroup::kParam, p);
  for (int r : {0, 1, 2, 4, 5}) {
    CHECK(y(r, 0) == 0.0);
    CHECK(y(r, 1) == 1.0);
    CHECK(y(r, 2) == doctest::Approx(0.5).epsilon(1e-15));
  }
  // Degenerate feature: shifted only.
  CHECK(y(3, 0) == 0.0);
  CHECK(n.param.degenerate() == 1);
  // No clamping outside the fitted range.
  MatrixXd t(1, 1);
  t << 11.6;
  CHECK(normalize(n, FeatureGroup::kTime, t)(0, 0) == doctest::Approx(2.0));
}

TEST_CASE("weights round trip is bit-identical") {
  std::mt19937_64 rng(14);
  for (Arch a : {Arch::kPlanNetX, Arch::kPlanNetXEnc, Arch::kBc}) {
    ArchConfig ac;
    ac.arch = a;
    ac.width = 24;
    ac.depth = 2;
    ac.d_model = 16;
    ac.ff_dim = 32;
    ac.latent = 8;
    const auto p = init_network(ac, 30, 0.2, unit_normalizer(), rng);
    const auto q = load_weights_json(save_weights_json(p));
    CHECK(q.arch == a);
    CHECK(q.parameter_count() == p.parameter_count());
    const MatrixXd x = random_matrix(p.policy.input_dim(), 3, rng);
    CHECK((p.policy.forward(x).array() == q.policy.forward(x).array()).all());
    if (p.encoder) {
      const MatrixXd t = random_matrix(7, 30, rng);
      CHECK((p.encoder->forward(t).array() == q.encoder->forward(t).array()).all());
    }
    CHECK(save_weights_json(q) == save_weights_json(p));
  }
}

TEST_CASE("weights loader refuses version and shape mismatches") {
  std::mt19937_64 rng(15);
  ArchConfig ac;
  ac.width = 8;
  ac.depth = 1;
  const auto p = init_network(ac, 30, 0.2, unit_normalizer(), rng);
  std::string text = save_weights_json(p);
  const auto bump = [&](const std::string& from, const std::string& to) {
    std::string t = text;
    const auto pos = t.find(from);
    REQUIRE(pos != std::string::npos);
    t.replace(pos, from.size(), to);
    return t;
  };
  CHECK_THROWS_AS(load_weights_json(bump("\"version\":1", "\"version\":2")), ConfigError);
  CHECK_THROWS_AS(load_weights_json(bump("\"dims\":[11,8,1]", "\"dims\":[11,9,1]")),
                  ConfigError);
  CHECK_THROWS_AS(load_weights_json(bump("\"name\":\"plannetx\"", "\"name\":\"bc\"")),
                  ConfigError);
  CHECK_THROWS_AS(load_weights_json("{not json"), ConfigError);
}

TEST_CASE("float instantiation runs") {
  std::mt19937_64 rng(16);
  auto m = Mlp<double>::init({4, 8, 1}, rng).cast<float>();
  Eigen::MatrixXf x = Eigen::MatrixXf::Ones(4, 2);
  CHECK(m.forward(x).allFinite());
  auto e = Encoder<double>::init(7, 5, 8, 2, 1, 16, 4, rng).cast<float>();
  CHECK(e.forward(Eigen::MatrixXf::Ones(7, 5)).allFinite());
}
