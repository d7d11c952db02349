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

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "plannetx/compression.hpp"
#include "plannetx/dynamics.hpp"
#include "plannetx/nn.hpp"
#include "plannetx/ocp.hpp"
#include "plannetx/policy.hpp"
#include "plannetx/prediction.hpp"

// Closed-loop scenarios, episode execution and metrics.

namespace plannetx {

enum class ScenarioFamily { kBraking, kSpeedLimit, kCutIn, kFreeRoad };
std::string to_string(ScenarioFamily f);
ScenarioFamily family_from_string(const std::string& s);

// Lead driven by free-road IDM toward idm.v_desired, except inside
// [brake_start, brake_end) where it applies brake_accel (<= 0).
struct LeadScript {
  LeadState init;
  IdmConfig idm;
  double brake_start = 0.0;
  double brake_end = 0.0;
  double brake_accel = 0.0;

  bool operator==(const LeadScript&) const = default;
};

// A vehicle merges in at `time`, placed at gap_fraction of the current gap.
// It then follows free-road IDM toward its own velocity.
struct CutInEvent {
  double time = 0.0;
  double gap_fraction = 0.5;
  double v = 0.0;
  double a = 0.0;

  bool operator==(const CutInEvent&) const = default;
};

struct Scenario {
  std::string id;
  ScenarioFamily family = ScenarioFamily::kFreeRoad;
  State ego_init = State::Zero();
  std::optional<LeadScript> lead;  // nullopt: open road
  std::vector<CutInEvent> cut_ins;
  double v_max1 = 30.0;
  double v_max2 = 30.0;
  double s_change = 0.0;  // world position of the limit change
  double duration = 6.5;

  int steps(double td) const;
  void validate() const;
  bool operator==(const Scenario&) const = default;
};

struct ScenarioConfig {
  double duration_min = 5.0, duration_max = 8.0;
  double ego_v_min = 5.0, ego_v_max = 30.0;
  // Crash-inevitability filter: a candidate is discarded when the MPC episode
  // needs a distance slack above this value or collides.
  bool filter = true;
  double crash_slack = 0.5;
  int max_attempts = 50;

  void validate() const;
};

std::vector<Scenario> generate_scenarios(ScenarioFamily family, int n, std::uint64_t seed,
                                         const ScenarioConfig& scfg, const OcpConfig& ocp,
                                         int workers = 1);

// Equal thirds of braking, speed-limit and cut-in scenarios.
std::vector<Scenario> generate_suite(int n, std::uint64_t seed, const ScenarioConfig& scfg,
                                     const OcpConfig& ocp, int workers = 1);

// Lead-vehicle world state along an episode; cut-ins replace the lead.
class LeadWorld {
 public:
  LeadWorld(const Scenario& scn, double td);
  bool has_lead() const { return lead_.has_value(); }
  const LeadState& lead() const { return *lead_; }
  // Applies cut-in events due at time t. Returns true if one fired.
  bool apply_events(double t, double ego_s);
  void advance(double t);

 private:
  const Scenario* scn_;
  double td_;
  std::optional<LeadState> lead_;
  IdmConfig idm_;
  bool scripted_brake_ = true;
  size_t next_event_ = 0;
};

// Ego-relative planning parameters: ego at s = 0, passed limit changes folded
// into a constant limit. An open road uses a virtual lead kFreeRoadGap ahead.
inline constexpr double kFreeRoadGap = 150.0;
PlanParams observe(const State& ego, const std::optional<LeadState>& lead,
                   const Scenario& scn, const OcpConfig& cfg);

struct StepInfo {
  int sqp_iterations = 0;
  double dist_slack = 0.0;  // largest distance slack of the plan
  bool fallback = false;    // applied the tail of the previous plan
  bool ok = true;
  std::string message;
};

class Controller {
 public:
  virtual ~Controller() = default;
  virtual std::string name() const = 0;
  virtual void reset() {}
  virtual double control(const State& x, const PlanParams& p, StepInfo& info) = 0;
};

// Solves the OCP each step, warm-started from the shifted previous plan. A
// failed solve is retried cold; if that fails too, the shifted previous plan
// is applied when it still satisfies the box constraints.
class MpcController : public Controller {
 public:
  MpcController(const OcpConfig& cfg, bool warm_start = true);
  std::string name() const override { return warm_ ? "mpc" : "mpc-cold"; }
  void reset() override { prev_.reset(); }
  double control(const State& x, const PlanParams& p, StepInfo& info) override;

 private:
  bool box_feasible(const State& x0, const Eigen::RowVectorXd& u) const;

  OcpSolver solver_;
  bool warm_;
  std::optional<OcpSolution> prev_;
};

class LearnedController : public Controller {
 public:
  explicit LearnedController(const NetworkParams& net, std::string name = "learned");
  std::string name() const override { return name_; }
  double control(const State& x, const PlanParams& p, StepInfo& info) override;

 private:
  PolicyModel<float> model_;
  std::string name_;
};

class QuantController : public Controller {
 public:
  explicit QuantController(const QuantModel& q, std::string name = "learned-quant");
  std::string name() const override { return name_; }
  double control(const State& x, const PlanParams& p, StepInfo& info) override;
  const QuantStats& stats() const { return stats_; }

 private:
  QuantModel q_;
  PolicyModel<float> model_;
  std::string name_;
  QuantStats stats_;
};

struct EpisodeStep {
  double t = 0.0;
  State x = State::Zero();
  double u = 0.0;
  bool has_lead = false;
  LeadState lead;        // world frame
  double gap = 0.0;      // lead.s - ego s; the distance-constraint parameter
  double v_limit = 0.0;  // at the ego position
  double dist_margin = 0.0;   // gap - safe distance
  double speed_margin = 0.0;  // v_limit - v
  bool dist_active = false;
  bool speed_active = false;
  bool cut_in = false;
  int sqp_iterations = 0;
  double dist_slack = 0.0;
  bool fallback = false;
  double replan_ms = 0.0;

  // Wall time is excluded.
  bool operator==(const EpisodeStep& o) const;
};

enum class Outcome { kCompleted, kCollision, kFailed };
std::string to_string(Outcome o);

struct EpisodeLog {
  std::string scenario_id;
  std::string controller;
  double td = 0.2;
  std::vector<EpisodeStep> steps;
  State final_state = State::Zero();
  Outcome outcome = Outcome::kCompleted;
  int event_step = -1;  // collision or failure step
  std::string diagnostics;
  int total_sqp_iterations = 0;
  int fallback_steps = 0;

  bool operator==(const EpisodeLog&) const = default;
};

EpisodeLog run_episode(const Scenario& scn, Controller& ctrl, const OcpConfig& cfg);

// Driven-trajectory distances. Convention: per episode, the l2 norm over the
// M post-initial states divided by sqrt(M) (an RMS), then the mean over
// episodes.
struct EpisodeDistance {
  double ds = 0.0, dv = 0.0, da = 0.0;
};
EpisodeDistance episode_distance(const EpisodeLog& a, const EpisodeLog& b);

struct ClosedLoopMetrics {
  double avg_ds = 0.0, avg_dv = 0.0, avg_da = 0.0;
  int episodes = 0;   // compared (both completed)
  int collisions = 0;  // of the policy
  int failures = 0;
  std::vector<std::string> collided;
  std::string convention;
};

ClosedLoopMetrics compute_metrics(const std::vector<EpisodeLog>& policy,
                                  const std::vector<EpisodeLog>& mpc);

using ControllerFactory = std::function<std::unique_ptr<Controller>()>;
std::vector<EpisodeLog> run_suite(const std::vector<Scenario>& suite,
                                  const ControllerFactory& make, const OcpConfig& cfg,
                                  int workers = 1);

// Export.
std::string episode_csv(const EpisodeLog& log, bool with_timing = true);
std::string episode_json(const EpisodeLog& log, bool with_timing = true);
std::string scenarios_json(const std::vector<Scenario>& s);
std::vector<Scenario> scenarios_from_json(const std::string& text);
std::string metrics_json(const ClosedLoopMetrics& m);
// Plot data: one row per step with ego, lead, constraint and control traces
// of both episodes side by side.
std::string plot_csv(const EpisodeLog& mpc, const EpisodeLog& policy);

}  // namespace plannetx
