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

#include "plannetx/prediction.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace plannetx {

namespace {

// Constant acceleration a over duration dt starting at (s, v), with the
// velocity floored at zero.
void advance(double& s, double& v, double a, double dt) {
  if (dt <= 0.0) return;
  if (a < 0.0 && v + a * dt < 0.0) {
    const double t_stop = -v / a;
    s += v * t_stop + 0.5 * a * t_stop * t_stop;
    v = 0.0;
    return;
  }
  s += v * dt + 0.5 * a * dt * dt;
  v += a * dt;
}

}  // namespace

LeadState predict_at(const LeadState& lead, double t_acc, double t) {
  double s = lead.s;
  double v = std::max(lead.v, 0.0);
  const double t1 = std::min(t, t_acc);
  advance(s, v, lead.a, t1);
  advance(s, v, 0.0, t - t1);
  const bool accelerating = t < t_acc && !(v == 0.0 && lead.a < 0.0);
  return {s, v, accelerating ? lead.a : 0.0};
}

LeadPrediction forward_predict(const LeadState& lead, double t_acc, double td,
                               int n_stages) {
  if (!(td > 0.0) || !std::isfinite(td))
    throw std::invalid_argument("forward_predict: td must be positive");
  if (!(t_acc >= 0.0))
    throw std::invalid_argument("forward_predict: t_acc must be >= 0");
  if (n_stages < 1)
    throw std::invalid_argument("forward_predict: need at least one stage");
  LeadPrediction out(n_stages);
  out[0] = lead;
  for (int k = 1; k < n_stages; ++k) out[k] = predict_at(lead, t_acc, k * td);
  return out;
}

void IdmConfig::validate() const {
  if (!(v_desired > 0 && time_headway > 0 && min_gap > 0 && max_accel > 0 &&
        comfort_decel > 0 && delta > 0 && emergency_decel > 0))
    throw std::invalid_argument("IdmConfig: all parameters must be positive");
}

double idm_accel(const LeadState& follower, std::optional<double> gap,
                 double closing_speed, const IdmConfig& cfg) {
  const double v = std::max(follower.v, 0.0);
  double acc = cfg.max_accel * (1.0 - std::pow(v / cfg.v_desired, cfg.delta));
  if (gap) {
    if (*gap <= 0.0) return -cfg.emergency_decel;
    const double s_star =
        cfg.min_gap +
        std::max(0.0, v * cfg.time_headway +
                          v * closing_speed /
                              (2.0 * std::sqrt(cfg.max_accel * cfg.comfort_decel)));
    acc -= cfg.max_accel * (s_star / *gap) * (s_star / *gap);
  }
  return std::clamp(acc, -cfg.emergency_decel, cfg.max_accel);
}

}  // namespace plannetx
