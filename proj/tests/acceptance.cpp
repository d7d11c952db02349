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

// Runs every acceptance criterion at its stated tolerance and prints one
// pass/fail line each. Criteria 1-3 use the test oracles; 4-11 run the
// desk-scale pipeline (reusing finished stages under the work directory).

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <random>
#include <thread>

#include "ocp_fixtures.hpp"
#include "oracles.hpp"
#include "plannetx/dynamics.hpp"
#include "plannetx/ocp.hpp"
#include "plannetx/repro.hpp"
#include "plannetx/training.hpp"

using namespace plannetx;

namespace {

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2e", v);
  return buf;
}

CriterionResult dynamics_exactness() {
  double expm = 0.0, semi = 0.0, lin = 0.0;
  const double tds[] = {0.05, 0.1, 0.2, 0.5};
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 10.0);
  for (double td : tds) {
    const auto d = discretize(td);
    const auto e = oracle::integrator_chain_expm(td);
    expm = std::max({expm, (d.A - e.topLeftCorner<4, 4>()).lpNorm<Eigen::Infinity>(),
                     (d.B - e.topRightCorner<4, 1>()).lpNorm<Eigen::Infinity>()});
    for (double td2 : tds) {
      const auto d2 = discretize(td2), d12 = discretize(td + td2);
      semi = std::max({semi, (d2.A * d.A - d12.A).lpNorm<Eigen::Infinity>(),
                       (d2.A * d.B + d2.B - d12.B).lpNorm<Eigen::Infinity>() /
                           std::max(1.0, d12.B.lpNorm<Eigen::Infinity>())});
    }
    for (int t = 0; t < 100; ++t) {
      const State x1(n(rng), n(rng), n(rng), n(rng)), x2(n(rng), n(rng), n(rng), n(rng));
      const double u1 = n(rng), u2 = n(rng), a = n(rng);
      const State lhs = step(d, State(x1 + a * x2), u1 + a * u2);
      const State rhs = step(d, x1, u1) + a * step(d, x2, u2);
      lin = std::max(lin, (lhs - rhs).lpNorm<Eigen::Infinity>() / (1.0 + lhs.norm()));
    }
  }
  const bool ok = expm < 1e-12 && semi < 1e-12 && lin < 1e-12;
  return {1, "dynamics exactness", ok,
          "matrix exponential " + sci(expm) + ", semigroup " + sci(semi) + ", linearity " +
              sci(lin) + " (need < 1e-12)"};
}

CriterionResult solver_correctness() {
  const OcpConfig loose = fixtures::loose_config();
  OcpSolver free_solver(loose);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> v(5, 30), a(-1, 1), j(-1, 1);
  double worst_du = 0.0;
  int unconverged_free = 0;
  for (int t = 0; t < 100; ++t) {
    const State x0(0.0, v(rng), a(rng), j(rng));
    const auto sol = free_solver.solve(x0, fixtures::free_road(loose));
    if (sol.status != SolveStatus::kConverged) {
      ++unconverged_free;
      continue;
    }
    const auto ref = fixtures::equality_qp_oracle(x0, loose);
    worst_du = std::max(worst_du, (sol.U.transpose() - ref.u).lpNorm<Eigen::Infinity>());
  }

  const OcpConfig cfg;
  OcpSolver solver(cfg);
  const SamplingConfig sc;
  int converged = 0, bad = 0;
  double worst_kkt = 0.0, worst_defect = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Sample s = draw_problem(cfg, sc, 2026, static_cast<std::uint64_t>(i), 0);
    const auto sol = solver.solve(s.x0, s.params);
    if (sol.status != SolveStatus::kConverged) continue;
    ++converged;
    const double defect = fixtures::dynamics_defect(sol, solver.dynamics());
    worst_kkt = std::max(worst_kkt, sol.kkt_residual);
    worst_defect = std::max(worst_defect, defect);
    if (!(sol.kkt_residual < 1e-6 && defect < 1e-9)) ++bad;
  }
  const bool ok = unconverged_free == 0 && worst_du < 1e-6 && bad == 0;
  return {2, "solver correctness", ok,
          "unconstrained max |dU| " + sci(worst_du) + " over 100 (" +
              std::to_string(unconverged_free) + " unconverged); constrained " +
              std::to_string(converged) + "/1000 converged, worst KKT " + sci(worst_kkt) +
              ", worst defect " + sci(worst_defect) + ", violations " + std::to_string(bad)};
}

CriterionResult gradient_validation() {
  const OcpConfig cfg;
  const Dataset d = sample_dataset(8, cfg, 3);
  std::vector<const Sample*> batch;
  for (const auto& s : d.samples) batch.push_back(&s);
  double worst = 0.0;
  int checked = 0;
  for (Arch arch : {Arch::kPlanNetX, Arch::kPlanNetXEnc}) {
    ArchConfig a;
    a.arch = arch;
    a.width = 32;
    a.depth = 3;
    a.d_model = 16;
    a.heads = 4;
    a.enc_layers = 2;
    a.ff_dim = 32;
    a.latent = 16;
    std::mt19937_64 rng(4);
    NetworkParams net = init_network(a, cfg.horizon, cfg.td, fit_normalizer(d.samples, cfg), rng);
    LossConfig l;  // state-trajectory loss through all 30 steps
    // The loss is O(1e3): a step of 1e-6 loses ~1e-7 to round-off, 1e-4 can
    // straddle a ReLU kink in the encoder.
    NetworkParams g = net.zeros_like();
    batch_loss(net, batch, l, &g);
    ParamList<double> p, gp;
    net.collect(p);
    g.collect(gp);
    const auto r = oracle::check_gradients(
        p, gp, [&] { return batch_loss(net, batch, l); }, 250, 3e-5, 1e-4, 5);
    worst = std::max(worst, r.worst);
    checked += r.checked;
  }
  return {3, "gradient validation", worst < 1e-4,
          "worst relative error " + sci(worst) + " over " + std::to_string(checked) +
              " coordinates, both architectures (need < 1e-4)"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::string dir = argc > 1 ? argv[1] : "acceptance_run";
  const int workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  std::vector<CriterionResult> all;
  for (auto f : {dynamics_exactness, solver_correctness, gradient_validation}) {
    all.push_back(f());
    std::cout << format_criterion(all.back()) << std::endl;
  }
  const ReproReport rep = run_repro(default_config(Scale::kDesk), dir, workers, std::cerr);
  std::cout << "\n";
  for (const auto& c : all) std::cout << format_criterion(c) << "\n";
  int failed = 0;
  for (const auto& c : rep.criteria) {
    all.push_back(c);
    std::cout << format_criterion(c) << "\n";
  }
  for (const auto& c : all) failed += !c.pass;
  std::cout << "\n" << all.size() - failed << "/" << all.size() << " criteria passed\n";
  return failed == 0 ? 0 : 1;
}
