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

#include <cmath>
#include <random>

#include "plannetx/errors.hpp"
#include "plannetx/simulation.hpp"

using namespace plannetx;

namespace {

const OcpConfig& cfg() {
  static const OcpConfig c;
  return c;
}

ScenarioConfig unfiltered() {
  ScenarioConfig s;
  s.filter = false;
  return s;
}

// Applies a fixed snap regardless of the situation.
class ConstantController : public Controller {
 public:
  explicit ConstantController(double u) : u_(u) {}
  std::string name() const override { return "constant"; }
  double control(const State&, const PlanParams&, StepInfo&) override { return u_; }

 private:
  double u_;
};

EpisodeLog shifted_copy(const EpisodeLog& log, double ds) {
  EpisodeLog out = log;
  for (auto& st : out.steps) st.x(kPos) += ds;
  out.final_state(kPos) += ds;
  return out;
}

NetworkParams small_net(unsigned seed) {
  static const Dataset d = sample_dataset(12, OcpConfig{}, 5);
  ArchConfig a;
  a.width = 16;
  a.depth = 2;
  std::mt19937_64 rng(seed);
  return init_network(a, d.ocp.horizon, d.ocp.td, fit_normalizer(d.samples, d.ocp), rng);
}

}  // namespace

TEST_CASE("scenario generation is reproducible") {
  const auto a = generate_scenarios(ScenarioFamily::kCutIn, 6, 11, unfiltered(), cfg());
  const auto b = generate_scenarios(ScenarioFamily::kCutIn, 6, 11, unfiltered(), cfg());
  const auto c = generate_scenarios(ScenarioFamily::kCutIn, 6, 12, unfiltered(), cfg());
  CHECK(scenarios_json(a) == scenarios_json(b));
  CHECK(scenarios_json(a) != scenarios_json(c));
  const auto w = generate_scenarios(ScenarioFamily::kCutIn, 6, 11, unfiltered(), cfg(), 3);
  CHECK(scenarios_json(a) == scenarios_json(w));
}

TEST_CASE("scenario JSON round trip") {
  const auto s = generate_suite(6, 3, unfiltered(), cfg());
  const auto back = scenarios_from_json(scenarios_json(s));
  REQUIRE(back.size() == s.size());
  for (size_t i = 0; i < s.size(); ++i) CHECK(back[i] == s[i]);
  CHECK_THROWS_AS(scenarios_from_json("{\"format\": \"x\"}"), ConfigError);
}

TEST_CASE("braking leads never accelerate during the braking phase") {
  const auto suite = generate_scenarios(ScenarioFamily::kBraking, 20, 4, unfiltered(), cfg());
  for (const auto& s : suite) {
    REQUIRE(s.lead);
    CHECK(s.lead->brake_accel <= 0.0);
    LeadWorld world(s, cfg().td);
    for (int k = 0; k < s.steps(cfg().td); ++k) {
      const double t = k * cfg().td;
      const double v_before = world.lead().v;
      world.advance(t);
      if (t >= s.lead->brake_start && t < s.lead->brake_end - 1e-9) {
        CHECK(world.lead().a <= 0.0);
        CHECK(world.lead().v <= v_before);
      }
    }
  }
}

TEST_CASE("cut-in scenarios show one discontinuous gap drop") {
  const auto suite = generate_scenarios(ScenarioFamily::kCutIn, 8, 9, unfiltered(), cfg());
  for (const auto& s : suite) {
    REQUIRE(s.cut_ins.size() == 1);
    MpcController mpc(cfg());
    const EpisodeLog log = run_episode(s, mpc, cfg());
    REQUIRE(log.outcome == Outcome::kCompleted);
    int events = 0;
    for (size_t k = 1; k < log.steps.size(); ++k) {
      if (!log.steps[k].cut_in) continue;
      ++events;
      // The distance-constraint parameter jumps at the event step.
      const double drop = log.steps[k - 1].gap - log.steps[k].gap;
      CHECK(drop > 0.25 * log.steps[k - 1].gap);
    }
    CHECK(events == 1);
  }
}

TEST_CASE("episode length and time stamps") {
  const auto suite = generate_suite(3, 21, unfiltered(), cfg());
  for (const auto& s : suite) {
    MpcController mpc(cfg());
    const EpisodeLog log = run_episode(s, mpc, cfg());
    REQUIRE(log.outcome == Outcome::kCompleted);
    CHECK(static_cast<int>(log.steps.size()) ==
          static_cast<int>(std::ceil(s.duration / cfg().td - 1e-9)));
    for (size_t k = 1; k < log.steps.size(); ++k) CHECK(log.steps[k].t > log.steps[k - 1].t);
  }
}

TEST_CASE("MPC on an open road approaches the limit smoothly") {
  Scenario s;
  s.id = "open";
  s.ego_init << 0.0, 12.0, 0.0, 0.0;
  s.v_max1 = s.v_max2 = 25.0;
  s.duration = 20.0;
  MpcController mpc(cfg());
  const EpisodeLog log = run_episode(s, mpc, cfg());
  REQUIRE(log.outcome == Outcome::kCompleted);
  CHECK(log.final_state(kVel) > 24.0);
  CHECK(log.final_state(kVel) < 25.0 + 1e-3);
  CHECK(std::abs(log.final_state(kAcc)) < 0.2);
  for (const auto& st : log.steps) {
    CHECK(st.x(kAcc) <= cfg().a_max + 1e-6);
    CHECK(st.x(kJerk) <= cfg().j_max + 1e-6);
    CHECK(st.x(kJerk) >= cfg().j_min - 1e-6);
  }
}

TEST_CASE("collision is declared when the gap closes") {
  Scenario s;
  s.id = "wall";
  s.ego_init << 0.0, 20.0, 0.0, 0.0;
  LeadScript lead;
  lead.init = {90.0, 0.0, 0.0};
  lead.idm.v_desired = 1.0;
  lead.idm.max_accel = 1e-6;
  s.lead = lead;
  s.duration = 6.0;
  ConstantController coast(0.0);
  const EpisodeLog log = run_episode(s, coast, cfg());
  CHECK(log.outcome == Outcome::kCollision);
  CHECK(log.event_step > 0);
  CHECK(log.steps.size() == static_cast<size_t>(log.event_step));
  // The MPC stops in time from the same start.
  MpcController mpc(cfg());
  const EpisodeLog safe = run_episode(s, mpc, cfg());
  CHECK(safe.outcome == Outcome::kCompleted);
  CHECK(safe.final_state(kPos) < 90.0 - cfg().d_min + 1e-3);
}

TEST_CASE("episodes are deterministic") {
  const auto suite = generate_suite(3, 8, unfiltered(), cfg());
  const NetworkParams net = small_net(3);
  for (const auto& s : suite) {
    MpcController m1(cfg()), m2(cfg());
    const auto a = run_episode(s, m1, cfg());
    const auto b = run_episode(s, m2, cfg());
    CHECK(a == b);
    CHECK(episode_json(a, false) == episode_json(b, false));
    CHECK(episode_csv(a, false) == episode_csv(b, false));
    LearnedController l1(net), l2(net);
    CHECK(run_episode(s, l1, cfg()) == run_episode(s, l2, cfg()));
  }
}

TEST_CASE("warm starts need no more SQP iterations than cold starts") {
  const auto suite = generate_suite(6, 13, unfiltered(), cfg());
  int warm = 0, cold = 0;
  for (const auto& s : suite) {
    MpcController w(cfg(), true), c(cfg(), false);
    warm += run_episode(s, w, cfg()).total_sqp_iterations;
    cold += run_episode(s, c, cfg()).total_sqp_iterations;
  }
  CHECK(warm < cold);
}

TEST_CASE("closed-loop distance examples") {
  const auto suite = generate_scenarios(ScenarioFamily::kBraking, 1, 2, unfiltered(), cfg());
  MpcController mpc(cfg());
  const EpisodeLog log = run_episode(suite[0], mpc, cfg());
  REQUIRE(log.outcome == Outcome::kCompleted);
  const size_t m = log.steps.size();

  const auto zero = episode_distance(log, log);
  CHECK(zero.ds == 0.0);
  CHECK(zero.dv == 0.0);
  CHECK(zero.da == 0.0);

  // 1 m offset over M states: l2 norm sqrt(M), reported as norm / sqrt(M).
  const EpisodeLog off = shifted_copy(log, 1.0);
  const auto d = episode_distance(log, off);
  CHECK(d.ds * std::sqrt(static_cast<double>(m)) == doctest::Approx(std::sqrt(m)).epsilon(1e-12));
  CHECK(d.ds == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(d.dv == 0.0);
  const auto r = episode_distance(off, log);
  CHECK(r.ds == d.ds);

  const auto metrics = compute_metrics({off, log}, {log, log});
  CHECK(metrics.episodes == 2);
  CHECK(metrics.avg_ds == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(metrics.collisions == 0);
  CHECK(!metrics.convention.empty());

  EpisodeLog shorter = log;
  shorter.steps.pop_back();
  CHECK_THROWS_AS(episode_distance(log, shorter), ContractViolation);
  CHECK_THROWS_AS(compute_metrics({log}, {}), ContractViolation);
}

TEST_CASE("metrics skip episodes the policy did not complete") {
  const auto suite = generate_scenarios(ScenarioFamily::kBraking, 1, 2, unfiltered(), cfg());
  MpcController mpc(cfg());
  const EpisodeLog log = run_episode(suite[0], mpc, cfg());
  EpisodeLog crashed = log;
  crashed.outcome = Outcome::kCollision;
  crashed.steps.resize(3);
  const auto m = compute_metrics({crashed, log}, {log, log});
  CHECK(m.episodes == 1);
  CHECK(m.collisions == 1);
  REQUIRE(m.collided.size() == 1);
  CHECK(m.collided[0] == log.scenario_id);
}

TEST_CASE("quantized controller runs in integer arithmetic") {
  const NetworkParams net = small_net(4);
  const Dataset calib = sample_dataset(8, cfg(), 17);
  const QuantModel q = calibrate_quantize(net, calib.samples);
  const auto suite = generate_scenarios(ScenarioFamily::kSpeedLimit, 1, 5, unfiltered(), cfg());
  QuantController qc(q);
  const EpisodeLog log = run_episode(suite[0], qc, cfg());
  CHECK(log.controller == "learned-quant");
  CHECK(!log.steps.empty());
  CHECK(qc.stats().int_macs > 0);
  CHECK(qc.stats().float_ops_hidden == 0);
}

TEST_CASE("suite runner matches sequential episodes") {
  const auto suite = generate_suite(4, 6, unfiltered(), cfg());
  const auto make = [] { return std::make_unique<MpcController>(cfg()); };
  const auto par = run_suite(suite, make, cfg(), 3);
  const auto seq = run_suite(suite, make, cfg(), 1);
  REQUIRE(par.size() == suite.size());
  for (size_t i = 0; i < suite.size(); ++i) CHECK(par[i] == seq[i]);
}

TEST_CASE("filtered suites keep the MPC collision free") {
  const auto suite = generate_suite(6, 19, ScenarioConfig{}, cfg());
  for (const auto& s : suite) {
    MpcController mpc(cfg());
    const auto log = run_episode(s, mpc, cfg());
    CHECK(log.outcome == Outcome::kCompleted);
    for (const auto& st : log.steps) CHECK(st.dist_slack <= 0.5);
  }
}

TEST_CASE("scenario validation") {
  Scenario s;
  s.id = "bad";
  s.duration = 0.0;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s.duration = 5.0;
  LeadScript l;
  l.init = {-1.0, 10.0, 0.0};
  s.lead = l;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s.lead->init.s = 20.0;
  s.cut_ins = {{3.0, 0.5, 10.0, 0.0}, {2.0, 0.5, 10.0, 0.0}};
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  CHECK_THROWS_AS(generate_scenarios(ScenarioFamily::kBraking, 0, 1, unfiltered(), cfg()),
                  std::invalid_argument);
}

TEST_CASE("plot data has one row per step") {
  const auto suite = generate_scenarios(ScenarioFamily::kCutIn, 1, 3, unfiltered(), cfg());
  MpcController mpc(cfg());
  const auto log = run_episode(suite[0], mpc, cfg());
  const std::string csv = plot_csv(log, log);
  const auto rows = std::count(csv.begin(), csv.end(), '\n');
  CHECK(rows == static_cast<long>(log.steps.size()) + 1);
}
