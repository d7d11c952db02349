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

#include <optional>
#include <vector>

namespace plannetx {

// Rear bumper of the vehicle ahead.
struct LeadState {
  double s = 0.0;
  double v = 0.0;
  double a = 0.0;

  bool operator==(const LeadState&) const = default;
};

// One lead state per OCP stage, stage k at time k * td.
using LeadPrediction = std::vector<LeadState>;

// Constant-acceleration extrapolation: the lead keeps `lead.a` for t_acc
// seconds and then cruises. Velocity is clamped at zero; once stopped, the
// position stays frozen.
LeadPrediction forward_predict(const LeadState& lead, double t_acc, double td,
                               int n_stages);

// Kinematics of the same rule evaluated at an arbitrary time.
LeadState predict_at(const LeadState& lead, double t_acc, double t);

struct IdmConfig {
  double v_desired = 30.0;
  double time_headway = 1.5;
  double min_gap = 2.0;
  double max_accel = 1.5;
  double comfort_decel = 2.0;
  double delta = 4.0;
  double emergency_decel = 9.0;  // lower clamp on the returned acceleration

  void validate() const;
  bool operator==(const IdmConfig&) const = default;
};

// Intelligent driver model acceleration of a follower with velocity
// `follower.v`. Without a leader (gap == nullopt) only the free-road term is
// used. A non-positive gap returns -emergency_decel.
double idm_accel(const LeadState& follower, std::optional<double> gap,
                 double closing_speed, const IdmConfig& cfg);

}  // namespace plannetx
