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

#include "plannetx/simulation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "plannetx/errors.hpp"
#include "rng.hpp"

namespace plannetx {

using nlohmann::json;

std::string to_string(ScenarioFamily f) {
  switch (f) {
    case ScenarioFamily::kBraking: return "braking";
    case ScenarioFamily::kSpeedLimit: return "speed_limit";
    case ScenarioFamily::kCutIn: return "cut_in";
    case ScenarioFamily::kFreeRoad: return "free_road";
  }
  return "unknown";
}

ScenarioFamily family_from_string(const std::string& s) {
  for (auto f : {ScenarioFamily::kBraking, ScenarioFamily::kSpeedLimit, ScenarioFamily::kCutIn,
                 ScenarioFamily::kFreeRoad})
    if (to_string(f) == s) return f;
  throw ConfigError("unknown scenario family '" + s + "'");
}

std::string to_string(Outcome o) {
  switch (o) {
    case Outcome::kCompleted: return "completed";
    case Outcome::kCollision: return "collision";
    case Outcome::kFailed: return "failed";
  }
  return "unknown";
}

int Scenario::steps(double td) const {
  return static_cast<int>(std::ceil(duration / td - 1e-9));
}

void Scenario::validate() const {
  if (!(duration > 0)) throw std::invalid_argument("Scenario " + id + ": duration must be > 0");
  if (!ego_init.allFinite()) throw std::invalid_argument("Scenario " + id + ": bad ego state");
  if (lead) {
    if (!(lead->init.s > ego_init(kPos)))
      throw std::invalid_argument("Scenario " + id + ": initial gap must be > 0");
    lead->idm.validate();
    if (lead->brake_accel > 0 || lead->brake_end < lead->brake_start)
      throw std::invalid_argument("Scenario " + id + ": invalid braking phase");
  }
  for (size_t i = 0; i < cut_ins.size(); ++i) {
    const auto& e = cut_ins[i];
    if (i > 0 && e.time < cut_ins[i - 1].time)
      throw std::invalid_argument("Scenario " + id + ": cut-in events not time-sorted");
    if (!(e.gap_fraction > 0 && e.gap_fraction < 1) || !(e.v >= 0))
      throw std::invalid_argument("Scenario " + id + ": invalid cut-in event");
  }
}

void ScenarioConfig::validate() const {
  if (!(duration_min > 0 && duration_min <= duration_max))
    throw ConfigError("ScenarioConfig: need 0 < duration_min <= duration_max");
  if (!(ego_v_min >= 0 && ego_v_min <= ego_v_max))
    throw ConfigError("ScenarioConfig: need 0 <= ego_v_min <= ego_v_max");
  if (!(crash_slack >= 0) || max_attempts < 1)
    throw ConfigError("ScenarioConfig: crash_slack >= 0 and max_attempts >= 1 required");
}

// ---------------------------------------------------------------------------
// Lead world.

LeadWorld::LeadWorld(const Scenario& scn, double td) : scn_(&scn), td_(td) {
  if (scn.lead) {
    lead_ = scn.lead->init;
    idm_ = scn.lead->idm;
  }
}

bool LeadWorld::apply_events(double t, double ego_s) {
  bool fired = false;
  while (next_event_ < scn_->cut_ins.size() && scn_->cut_ins[next_event_].time <= t + 1e-9) {
    const CutInEvent& e = scn_->cut_ins[next_event_++];
    const double gap = lead_ ? lead_->s - ego_s : kFreeRoadGap;
    lead_ = LeadState{ego_s + e.gap_fraction * gap, e.v, e.a};
    idm_.v_desired = std::max(e.v, 1.0);
    scripted_brake_ = false;
    fired = true;
  }
  return fired;
}

void LeadWorld::advance(double t) {
  if (!lead_) return;
  LeadState& l = *lead_;
  const bool braking = scripted_brake_ && scn_->lead &&
                       t >= scn_->lead->brake_start - 1e-9 && t < scn_->lead->brake_end - 1e-9;
  const double a = braking ? scn_->lead->brake_accel : idm_accel(l, std::nullopt, 0.0, idm_);
  if (l.v + a * td_ < 0.0) {
    l.s += a < 0.0 ? -0.5 * l.v * l.v / a : 0.0;
    l.v = 0.0;
    l.a = 0.0;
  } else {
    l.s += l.v * td_ + 0.5 * a * td_ * td_;
    l.v += a * td_;
    l.a = a;
  }
}

PlanParams observe(const State& ego, const std::optional<LeadState>& lead, const Scenario& scn,
                   const OcpConfig& cfg) {
  const LeadState rel = lead ? LeadState{lead->s - ego(kPos), lead->v, lead->a}
                             : LeadState{kFreeRoadGap, cfg.v_max, 0.0};
  const double s_rel = scn.s_change - ego(kPos);
  if (scn.v_max1 == scn.v_max2 || s_rel <= 0.0) {
    const double v = s_rel <= 0.0 ? scn.v_max2 : scn.v_max1;
    return make_params(rel, v, v, 0.0, cfg);
  }
  return make_params(rel, scn.v_max1, scn.v_max2, s_rel, cfg);
}

// ---------------------------------------------------------------------------
// Controllers.

MpcController::MpcController(const OcpConfig& cfg, bool warm_start)
    : solver_(cfg), warm_(warm_start) {}

bool MpcController::box_feasible(const State& x0, const Eigen::RowVectorXd& u) const {
  const OcpConfig& c = solver_.config();
  const DiscreteDynamics& dyn = solver_.dynamics();
  constexpr double tol = 1e-6;
  State x = x0;
  for (Eigen::Index k = 0; k < u.size(); ++k) {
    if (u(k) > c.u_max + tol || u(k) < c.u_min - tol) return false;
    x = step(dyn, x, u(k));
    if (x(kVel) > c.v_max + tol || x(kVel) < c.v_min - tol || x(kAcc) > c.a_max + tol ||
        x(kAcc) < c.a_min - tol || x(kJerk) > c.j_max + tol || x(kJerk) < c.j_min - tol)
      return false;
  }
  return true;
}

double MpcController::control(const State& x, const PlanParams& p, StepInfo& info) {
  std::optional<OcpSolution> shifted;
  if (warm_ && prev_) shifted = OcpSolver::shift(*prev_);
  OcpSolution sol = solver_.solve(x, p, shifted ? &*shifted : nullptr);
  info.sqp_iterations = sol.sqp_iterations;
  if (sol.status != SolveStatus::kConverged && shifted) {
    sol = solver_.solve(x, p);
    info.sqp_iterations += sol.sqp_iterations;
  }
  if (sol.status != SolveStatus::kConverged) {
    const std::string why =
        "MPC solve " + to_string(sol.status) + " (kkt=" + std::to_string(sol.kkt_residual) + ")";
    if (shifted && box_feasible(x, shifted->U)) {
      info.fallback = true;
      info.message = why;
      const double u = shifted->U(0);
      prev_ = std::move(*shifted);
      return u;
    }
    prev_.reset();
    info.ok = false;
    info.message = why;
    return 0.0;
  }
  info.dist_slack = sol.slack_dist.maxCoeff();
  const double u = sol.u0();
  prev_ = std::move(sol);
  return u;
}

LearnedController::LearnedController(const NetworkParams& net, std::string name)
    : model_(net), name_(std::move(name)) {}

double LearnedController::control(const State& x, const PlanParams& p, StepInfo&) {
  return static_cast<double>(model_.first_control(x, p));
}

QuantController::QuantController(const QuantModel& q, std::string name)
    : q_(q), model_(q.base), name_(std::move(name)) {}

double QuantController::control(const State& x, const PlanParams& p, StepInfo&) {
  Eigen::MatrixXf X, U;
  model_.plan_with([this](const Eigen::MatrixXf& in) { return q_.forward(in, &stats_); }, x,
                   p, 1, X, U);
  return static_cast<double>(U(0, 0));
}

// ---------------------------------------------------------------------------
// Episodes.

bool EpisodeStep::operator==(const EpisodeStep& o) const {
  return t == o.t && x == o.x && u == o.u && has_lead == o.has_lead && lead == o.lead &&
         gap == o.gap && v_limit == o.v_limit && dist_margin == o.dist_margin &&
         speed_margin == o.speed_margin && dist_active == o.dist_active &&
         speed_active == o.speed_active && cut_in == o.cut_in &&
         sqp_iterations == o.sqp_iterations && dist_slack == o.dist_slack &&
         fallback == o.fallback;
}

namespace {
constexpr double kActiveTol = 1e-3;
}

EpisodeLog run_episode(const Scenario& scn, Controller& ctrl, const OcpConfig& cfg) {
  scn.validate();
  const DiscreteDynamics dyn = discretize(cfg.td);
  EpisodeLog log;
  log.scenario_id = scn.id;
  log.controller = ctrl.name();
  log.td = cfg.td;
  const int m = scn.steps(cfg.td);
  log.steps.reserve(static_cast<size_t>(m));
  ctrl.reset();
  LeadWorld world(scn, cfg.td);
  State x = scn.ego_init;
  for (int k = 0; k < m; ++k) {
    const double t = k * cfg.td;
    EpisodeStep st;
    st.t = t;
    st.x = x;
    st.cut_in = world.apply_events(t, x(kPos));
    st.has_lead = world.has_lead();
    std::optional<LeadState> lead;
    if (st.has_lead) lead = world.lead();
    if (lead) st.lead = *lead;
    st.gap = lead ? lead->s - x(kPos) : kFreeRoadGap;
    if (st.gap <= 0.0) {
      log.outcome = Outcome::kCollision;
      log.event_step = k;
      log.diagnostics = "gap " + std::to_string(st.gap) + " m at t=" + std::to_string(t);
      break;
    }
    const PlanParams params = observe(x, lead, scn, cfg);
    State xr = x;
    xr(kPos) = 0.0;
    st.v_limit = params.speed_limit_at(0.0);
    st.dist_margin = -dist_constraint(xr, params.lead[0], cfg);
    st.speed_margin = st.v_limit - x(kVel);
    st.dist_active = st.dist_margin <= kActiveTol;
    st.speed_active = st.speed_margin <= kActiveTol;

    StepInfo info;
    const auto t0 = std::chrono::steady_clock::now();
    const double u = ctrl.control(xr, params, info);
    st.replan_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    st.sqp_iterations = info.sqp_iterations;
    st.dist_slack = info.dist_slack;
    st.fallback = info.fallback;
    log.total_sqp_iterations += info.sqp_iterations;
    log.fallback_steps += info.fallback ? 1 : 0;
    if (!info.ok || !std::isfinite(u)) {
      log.outcome = Outcome::kFailed;
      log.event_step = k;
      log.diagnostics = info.ok ? "non-finite control" : info.message;
      break;
    }
    st.u = u;
    log.steps.push_back(st);
    x = step(dyn, x, u);
    world.advance(t);
  }
  log.final_state = x;
  if (log.outcome == Outcome::kCompleted && world.has_lead() && world.lead().s - x(kPos) <= 0.0) {
    log.outcome = Outcome::kCollision;
    log.event_step = m;
    log.diagnostics = "gap " + std::to_string(world.lead().s - x(kPos)) + " m at end";
  }
  return log;
}

namespace {

// States x_1..x_M of a completed episode.
std::vector<State> driven_states(const EpisodeLog& log) {
  std::vector<State> xs;
  for (size_t k = 1; k < log.steps.size(); ++k) xs.push_back(log.steps[k].x);
  xs.push_back(log.final_state);
  return xs;
}

}  // namespace

EpisodeDistance episode_distance(const EpisodeLog& a, const EpisodeLog& b) {
  if (a.steps.size() != b.steps.size())
    throw ContractViolation("episode_distance: length mismatch (" +
                            std::to_string(a.steps.size()) + " vs " +
                            std::to_string(b.steps.size()) + ")");
  if (a.steps.empty()) throw ContractViolation("episode_distance: empty episode");
  const auto xa = driven_states(a), xb = driven_states(b);
  Eigen::Vector3d acc = Eigen::Vector3d::Zero();
  for (size_t k = 0; k < xa.size(); ++k)
    acc += (xa[k] - xb[k]).head<3>().array().square().matrix();
  acc = (acc / static_cast<double>(xa.size())).cwiseSqrt();
  return {acc(0), acc(1), acc(2)};
}

ClosedLoopMetrics compute_metrics(const std::vector<EpisodeLog>& policy,
                                  const std::vector<EpisodeLog>& mpc) {
  if (policy.size() != mpc.size())
    throw ContractViolation("compute_metrics: episode count mismatch");
  ClosedLoopMetrics m;
  m.convention =
      "per-episode l2 norm over the post-initial states divided by sqrt(steps), mean over "
      "episodes both controllers completed";
  for (size_t i = 0; i < policy.size(); ++i) {
    const EpisodeLog& p = policy[i];
    const EpisodeLog& q = mpc[i];
    if (p.scenario_id != q.scenario_id)
      throw ContractViolation("compute_metrics: scenario mismatch at " + std::to_string(i));
    if (p.outcome == Outcome::kCollision) {
      ++m.collisions;
      m.collided.push_back(p.scenario_id);
    }
    if (p.outcome == Outcome::kFailed) ++m.failures;
    if (p.outcome != Outcome::kCompleted || q.outcome != Outcome::kCompleted) continue;
    const EpisodeDistance d = episode_distance(p, q);
    m.avg_ds += d.ds;
    m.avg_dv += d.dv;
    m.avg_da += d.da;
    ++m.episodes;
  }
  if (m.episodes > 0) {
    m.avg_ds /= m.episodes;
    m.avg_dv /= m.episodes;
    m.avg_da /= m.episodes;
  }
  return m;
}

std::vector<EpisodeLog> run_suite(const std::vector<Scenario>& suite,
                                  const ControllerFactory& make, const OcpConfig& cfg,
                                  int workers) {
  const int n = static_cast<int>(suite.size());
  std::vector<EpisodeLog> logs(suite.size());
  workers = std::max(1, std::min(workers, n));
  auto work = [&](int w) {
    auto ctrl = make();
    for (int i = w; i < n; i += workers)
      logs[static_cast<size_t>(i)] = run_episode(suite[static_cast<size_t>(i)], *ctrl, cfg);
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work, w);
    for (auto& t : pool) t.join();
  }
  return logs;
}

// ---------------------------------------------------------------------------
// Generation.

namespace {

constexpr std::uint64_t kScenarioTag = 0x5ce9a710;

Scenario draw_scenario(ScenarioFamily family, const ScenarioConfig& sc, const OcpConfig& cfg,
                       Rng& rng) {
  Scenario s;
  s.family = family;
  s.duration = rng.uniform(sc.duration_min, sc.duration_max);
  const double v0 = rng.uniform(sc.ego_v_min, sc.ego_v_max);
  s.ego_init << 0.0, v0, 0.0, 0.0;
  const double vmax = cfg.v_max;
  auto lead_at = [&](double gap, double v) {
    LeadScript l;
    l.init = LeadState{gap, v, 0.0};
    l.idm.v_desired = std::max(v, 1.0);
    return l;
  };
  switch (family) {
    case ScenarioFamily::kBraking: {
      const double gap = rng.uniform(15.0, 80.0);
      const double vl = rng.uniform(std::max(0.0, v0 - 5.0), std::min(vmax, v0 + 5.0));
      LeadScript l = lead_at(gap, vl);
      l.brake_start = rng.uniform(0.5, 2.5);
      l.brake_end = l.brake_start + rng.uniform(1.0, 4.0);
      l.brake_accel = rng.uniform(cfg.a_min, -0.5);
      s.lead = l;
      s.v_max1 = s.v_max2 = rng.uniform(std::max({8.0, v0, vl}), vmax);
      break;
    }
    case ScenarioFamily::kSpeedLimit: {
      s.v_max1 = rng.uniform(10.0, vmax);
      do {
        s.v_max2 = rng.uniform(10.0, vmax);
      } while (std::abs(s.v_max2 - s.v_max1) < 3.0);
      s.s_change = rng.uniform(20.0, 120.0);
      s.ego_init(kVel) = std::min(v0, s.v_max1);
      const double gap = rng.uniform(60.0, 120.0);
      s.lead = lead_at(gap, rng.uniform(std::min(s.v_max1, s.v_max2), vmax));
      break;
    }
    case ScenarioFamily::kCutIn: {
      const double gap = rng.uniform(40.0, 100.0);
      const double vl = rng.uniform(std::max(0.0, v0 - 3.0), std::min(vmax, v0 + 5.0));
      s.lead = lead_at(gap, vl);
      s.v_max1 = s.v_max2 = rng.uniform(std::max({8.0, v0, vl}), vmax);
      CutInEvent e;
      e.time = rng.uniform(1.0, s.duration - 2.0);
      e.gap_fraction = rng.uniform(0.3, 0.7);
      e.v = rng.uniform(std::max(0.0, v0 - 5.0), std::min(vmax, v0 + 5.0));
      s.cut_ins.push_back(e);
      break;
    }
    case ScenarioFamily::kFreeRoad:
      s.v_max1 = s.v_max2 = rng.uniform(std::max(8.0, v0), vmax);
      break;
  }
  return s;
}

bool passes_filter(const Scenario& s, const ScenarioConfig& sc, MpcController& mpc,
                   const OcpConfig& cfg) {
  const EpisodeLog log = run_episode(s, mpc, cfg);
  if (log.outcome != Outcome::kCompleted) return false;
  for (const auto& st : log.steps)
    if (st.dist_slack > sc.crash_slack) return false;
  return true;
}

std::string scenario_id(ScenarioFamily f, int i) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s-%04d", to_string(f).c_str(), i);
  return buf;
}

}  // namespace

std::vector<Scenario> generate_scenarios(ScenarioFamily family, int n, std::uint64_t seed,
                                         const ScenarioConfig& scfg, const OcpConfig& ocp,
                                         int workers) {
  if (n < 1) throw std::invalid_argument("generate_scenarios: n must be >= 1");
  scfg.validate();
  ocp.validate();
  workers = std::max(1, std::min(workers, n));
  std::vector<std::optional<Scenario>> out(static_cast<size_t>(n));
  auto work = [&](int w) {
    MpcController mpc(ocp);
    for (int i = w; i < n; i += workers) {
      for (int a = 0; a < scfg.max_attempts; ++a) {
        Rng rng(derive_seed(derive_seed(seed, kScenarioTag + static_cast<std::uint64_t>(family),
                                        static_cast<std::uint64_t>(i)),
                            static_cast<std::uint64_t>(a), 0));
        Scenario s = draw_scenario(family, scfg, ocp, rng);
        s.id = scenario_id(family, i);
        if (scfg.filter && !passes_filter(s, scfg, mpc, ocp)) continue;
        out[static_cast<size_t>(i)] = std::move(s);
        break;
      }
    }
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work, w);
    for (auto& t : pool) t.join();
  }
  std::vector<Scenario> res;
  res.reserve(out.size());
  for (int i = 0; i < n; ++i) {
    if (!out[static_cast<size_t>(i)])
      throw ConfigError("generate_scenarios: " + scenario_id(family, i) + " exhausted " +
                        std::to_string(scfg.max_attempts) + " attempts");
    res.push_back(std::move(*out[static_cast<size_t>(i)]));
  }
  return res;
}

std::vector<Scenario> generate_suite(int n, std::uint64_t seed, const ScenarioConfig& scfg,
                                     const OcpConfig& ocp, int workers) {
  if (n < 3) throw std::invalid_argument("generate_suite: n must be >= 3");
  std::vector<Scenario> suite;
  const ScenarioFamily fams[] = {ScenarioFamily::kBraking, ScenarioFamily::kSpeedLimit,
                                 ScenarioFamily::kCutIn};
  for (int f = 0; f < 3; ++f) {
    const int count = n / 3 + (f < n % 3 ? 1 : 0);
    auto part = generate_scenarios(fams[f], count, seed, scfg, ocp, workers);
    suite.insert(suite.end(), part.begin(), part.end());
  }
  return suite;
}

// ---------------------------------------------------------------------------
// Export.

namespace {

json state_json(const State& x) { return json::array({x(0), x(1), x(2), x(3)}); }

State state_from(const json& j) {
  State x;
  for (int i = 0; i < 4; ++i) x(i) = j.at(static_cast<size_t>(i)).get<double>();
  return x;
}

json lead_json(const LeadState& l) { return {{"s", l.s}, {"v", l.v}, {"a", l.a}}; }

LeadState lead_from(const json& j) {
  return {j.at("s").get<double>(), j.at("v").get<double>(), j.at("a").get<double>()};
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string episode_csv(const EpisodeLog& log, bool with_timing) {
  std::string out =
      "t,s,v,a,j,u,has_lead,lead_s,lead_v,lead_a,gap,v_limit,dist_margin,speed_margin,"
      "dist_active,speed_active,cut_in,sqp_iterations,dist_slack,fallback";
  out += with_timing ? ",replan_ms\n" : "\n";
  for (const auto& st : log.steps) {
    out += fmt(st.t);
    for (int i = 0; i < 4; ++i) out += "," + fmt(st.x(i));
    out += "," + fmt(st.u) + "," + std::to_string(st.has_lead) + "," + fmt(st.lead.s) + "," +
           fmt(st.lead.v) + "," + fmt(st.lead.a) + "," + fmt(st.gap) + "," + fmt(st.v_limit) +
           "," + fmt(st.dist_margin) + "," + fmt(st.speed_margin) + "," +
           std::to_string(st.dist_active) + "," + std::to_string(st.speed_active) + "," +
           std::to_string(st.cut_in) + "," + std::to_string(st.sqp_iterations) + "," +
           fmt(st.dist_slack) + "," + std::to_string(st.fallback);
    if (with_timing) out += "," + fmt(st.replan_ms);
    out += "\n";
  }
  return out;
}

std::string episode_json(const EpisodeLog& log, bool with_timing) {
  json steps = json::array();
  for (const auto& st : log.steps) {
    json j = {{"t", st.t},
              {"x", state_json(st.x)},
              {"u", st.u},
              {"has_lead", st.has_lead},
              {"lead", lead_json(st.lead)},
              {"gap", st.gap},
              {"v_limit", st.v_limit},
              {"dist_margin", st.dist_margin},
              {"speed_margin", st.speed_margin},
              {"dist_active", st.dist_active},
              {"speed_active", st.speed_active},
              {"cut_in", st.cut_in},
              {"sqp_iterations", st.sqp_iterations},
              {"dist_slack", st.dist_slack},
              {"fallback", st.fallback}};
    if (with_timing) j["replan_ms"] = st.replan_ms;
    steps.push_back(std::move(j));
  }
  json j = {{"scenario", log.scenario_id},
            {"controller", log.controller},
            {"td", log.td},
            {"outcome", to_string(log.outcome)},
            {"event_step", log.event_step},
            {"diagnostics", log.diagnostics},
            {"total_sqp_iterations", log.total_sqp_iterations},
            {"fallback_steps", log.fallback_steps},
            {"final_state", state_json(log.final_state)},
            {"steps", std::move(steps)}};
  return j.dump(1);
}

std::string scenarios_json(const std::vector<Scenario>& v) {
  json arr = json::array();
  for (const auto& s : v) {
    json j = {{"id", s.id},
              {"family", to_string(s.family)},
              {"ego_init", state_json(s.ego_init)},
              {"v_max1", s.v_max1},
              {"v_max2", s.v_max2},
              {"s_change", s.s_change},
              {"duration", s.duration}};
    if (s.lead) {
      const auto& l = *s.lead;
      j["lead"] = {{"init", lead_json(l.init)},
                   {"idm",
                    {{"v_desired", l.idm.v_desired},
                     {"time_headway", l.idm.time_headway},
                     {"min_gap", l.idm.min_gap},
                     {"max_accel", l.idm.max_accel},
                     {"comfort_decel", l.idm.comfort_decel},
                     {"delta", l.idm.delta},
                     {"emergency_decel", l.idm.emergency_decel}}},
                   {"brake_start", l.brake_start},
                   {"brake_end", l.brake_end},
                   {"brake_accel", l.brake_accel}};
    } else {
      j["lead"] = nullptr;
    }
    json ev = json::array();
    for (const auto& e : s.cut_ins)
      ev.push_back({{"time", e.time}, {"gap_fraction", e.gap_fraction}, {"v", e.v}, {"a", e.a}});
    j["cut_ins"] = std::move(ev);
    arr.push_back(std::move(j));
  }
  return json{{"format", "plannetx-scenarios"}, {"version", 1}, {"scenarios", std::move(arr)}}
      .dump(1);
}

std::vector<Scenario> scenarios_from_json(const std::string& text) {
  try {
    const json doc = json::parse(text);
    if (doc.at("format") != "plannetx-scenarios" || doc.at("version") != 1)
      throw ConfigError("scenarios: unsupported format or version");
    std::vector<Scenario> out;
    for (const auto& j : doc.at("scenarios")) {
      Scenario s;
      s.id = j.at("id").get<std::string>();
      s.family = family_from_string(j.at("family").get<std::string>());
      s.ego_init = state_from(j.at("ego_init"));
      s.v_max1 = j.at("v_max1").get<double>();
      s.v_max2 = j.at("v_max2").get<double>();
      s.s_change = j.at("s_change").get<double>();
      s.duration = j.at("duration").get<double>();
      if (!j.at("lead").is_null()) {
        const json& l = j.at("lead");
        LeadScript ls;
        ls.init = lead_from(l.at("init"));
        const json& idm = l.at("idm");
        ls.idm.v_desired = idm.at("v_desired").get<double>();
        ls.idm.time_headway = idm.at("time_headway").get<double>();
        ls.idm.min_gap = idm.at("min_gap").get<double>();
        ls.idm.max_accel = idm.at("max_accel").get<double>();
        ls.idm.comfort_decel = idm.at("comfort_decel").get<double>();
        ls.idm.delta = idm.at("delta").get<double>();
        ls.idm.emergency_decel = idm.at("emergency_decel").get<double>();
        ls.brake_start = l.at("brake_start").get<double>();
        ls.brake_end = l.at("brake_end").get<double>();
        ls.brake_accel = l.at("brake_accel").get<double>();
        s.lead = ls;
      }
      for (const auto& e : j.at("cut_ins"))
        s.cut_ins.push_back({e.at("time").get<double>(), e.at("gap_fraction").get<double>(),
                             e.at("v").get<double>(), e.at("a").get<double>()});
      s.validate();
      out.push_back(std::move(s));
    }
    return out;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("scenarios: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

std::string metrics_json(const ClosedLoopMetrics& m) {
  return json{{"avg_ds", m.avg_ds},
              {"avg_dv", m.avg_dv},
              {"avg_da", m.avg_da},
              {"episodes", m.episodes},
              {"collisions", m.collisions},
              {"failures", m.failures},
              {"collided", m.collided},
              {"convention", m.convention}}
      .dump(1);
}

std::string plot_csv(const EpisodeLog& mpc, const EpisodeLog& policy) {
  std::string out =
      "t,mpc_s,mpc_v,mpc_a,mpc_u,mpc_gap,policy_s,policy_v,policy_a,policy_u,policy_gap,"
      "v_limit_mpc,v_limit_policy,lead_s_mpc,lead_s_policy\n";
  const size_t n = std::max(mpc.steps.size(), policy.steps.size());
  auto cols = [](const EpisodeLog& l, size_t k) {
    if (k >= l.steps.size()) return std::string(",,,,");
    const auto& st = l.steps[k];
    return fmt(st.x(kPos)) + "," + fmt(st.x(kVel)) + "," + fmt(st.x(kAcc)) + "," + fmt(st.u) +
           "," + fmt(st.gap);
  };
  auto opt = [](const EpisodeLog& l, size_t k, auto f) {
    return k < l.steps.size() ? fmt(f(l.steps[k])) : std::string();
  };
  for (size_t k = 0; k < n; ++k) {
    const double t = k < mpc.steps.size() ? mpc.steps[k].t : policy.steps[k].t;
    out += fmt(t) + "," + cols(mpc, k) + "," + cols(policy, k) + "," +
           opt(mpc, k, [](const EpisodeStep& s) { return s.v_limit; }) + "," +
           opt(policy, k, [](const EpisodeStep& s) { return s.v_limit; }) + "," +
           opt(mpc, k, [](const EpisodeStep& s) { return s.lead.s; }) + "," +
           opt(policy, k, [](const EpisodeStep& s) { return s.lead.s; }) + "\n";
  }
  return out;
}

}  // namespace plannetx
