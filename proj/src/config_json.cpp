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

#include "config_json.hpp"

namespace plannetx::detail {

json to_json(const OcpConfig& c) {
  return {{"horizon", c.horizon},
          {"td", c.td},
          {"w_acc", c.w_acc},
          {"w_jerk", c.w_jerk},
          {"w_snap", c.w_snap},
          {"w_progress", c.w_progress},
          {"discount", c.discount},
          {"v_min", c.v_min},
          {"v_max", c.v_max},
          {"a_min", c.a_min},
          {"a_max", c.a_max},
          {"j_min", c.j_min},
          {"j_max", c.j_max},
          {"u_min", c.u_min},
          {"u_max", c.u_max},
          {"d_min", c.d_min},
          {"t_brake", c.t_brake},
          {"brake_decel", c.brake_decel},
          {"lead_accel_time", c.lead_accel_time},
          {"w_slack_dist", c.w_slack_dist},
          {"w_slack_terminal", c.w_slack_terminal},
          {"w_slack_speed", c.w_slack_speed},
          {"max_sqp_iters", c.max_sqp_iters},
          {"tol_step", c.tol_step},
          {"tol_kkt", c.tol_kkt},
          {"qp",
           {{"max_iter", c.qp.max_iter},
            {"tol_residual", c.qp.tol_residual},
            {"tol_mu", c.qp.tol_mu}}}};
}

OcpConfig ocp_from_json(const json& j) {
  OcpConfig c;
  StrictReader r(j, "ocp");
  r.get("horizon", c.horizon);
  r.get("td", c.td);
  r.get("w_acc", c.w_acc);
  r.get("w_jerk", c.w_jerk);
  r.get("w_snap", c.w_snap);
  r.get("w_progress", c.w_progress);
  r.get("discount", c.discount);
  r.get("v_min", c.v_min);
  r.get("v_max", c.v_max);
  r.get("a_min", c.a_min);
  r.get("a_max", c.a_max);
  r.get("j_min", c.j_min);
  r.get("j_max", c.j_max);
  r.get("u_min", c.u_min);
  r.get("u_max", c.u_max);
  r.get("d_min", c.d_min);
  r.get("t_brake", c.t_brake);
  r.get("brake_decel", c.brake_decel);
  r.get("lead_accel_time", c.lead_accel_time);
  r.get("w_slack_dist", c.w_slack_dist);
  r.get("w_slack_terminal", c.w_slack_terminal);
  r.get("w_slack_speed", c.w_slack_speed);
  r.get("max_sqp_iters", c.max_sqp_iters);
  r.get("tol_step", c.tol_step);
  r.get("tol_kkt", c.tol_kkt);
  if (r.has("qp")) {
    StrictReader q(r.sub("qp"), "ocp.qp");
    q.get("max_iter", c.qp.max_iter);
    q.get("tol_residual", c.qp.tol_residual);
    q.get("tol_mu", c.qp.tol_mu);
    q.finish();
  }
  r.finish();
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return c;
}

json to_json(const SamplingConfig& c) {
  return {{"gap", {c.gap_min, c.gap_max}},
          {"v_lead", {c.v_lead_min, c.v_lead_max}},
          {"a_lead", {c.a_lead_min, c.a_lead_max}},
          {"v_limit", {c.v_limit_min, c.v_limit_max}},
          {"s_change", {c.s_change_min, c.s_change_max}},
          {"p_speed_change", c.p_speed_change},
          {"p_cut_in", c.p_cut_in},
          {"cut_in_frac", {c.cut_in_frac_min, c.cut_in_frac_max}},
          {"crash_slack", c.crash_slack},
          {"max_attempts_per_sample", c.max_attempts_per_sample}};
}

namespace {
void get_range(StrictReader& r, const char* key, double& lo, double& hi) {
  std::array<double, 2> v{lo, hi};
  r.get(key, v);
  lo = v[0];
  hi = v[1];
}
}  // namespace

SamplingConfig sampling_from_json(const json& j) {
  SamplingConfig c;
  StrictReader r(j, "sampling");
  get_range(r, "gap", c.gap_min, c.gap_max);
  get_range(r, "v_lead", c.v_lead_min, c.v_lead_max);
  get_range(r, "a_lead", c.a_lead_min, c.a_lead_max);
  get_range(r, "v_limit", c.v_limit_min, c.v_limit_max);
  get_range(r, "s_change", c.s_change_min, c.s_change_max);
  r.get("p_speed_change", c.p_speed_change);
  r.get("p_cut_in", c.p_cut_in);
  get_range(r, "cut_in_frac", c.cut_in_frac_min, c.cut_in_frac_max);
  r.get("crash_slack", c.crash_slack);
  r.get("max_attempts_per_sample", c.max_attempts_per_sample);
  r.finish();
  c.validate();
  return c;
}

json to_json(const LossConfig& c) {
  json w = json::array();
  for (int i = 0; i < 4; ++i) w.push_back({c.W(i, 0), c.W(i, 1), c.W(i, 2), c.W(i, 3)});
  return {{"kind", to_string(c.kind)}, {"gamma", c.gamma},
          {"W", w},                    {"control_weight", c.control_weight},
          {"mix_state", c.mix_state},  {"mix_control", c.mix_control}};
}

LossConfig loss_from_json(const json& j) {
  LossConfig c;
  StrictReader r(j, "loss");
  std::string kind = to_string(c.kind);
  r.get("kind", kind);
  c.kind = loss_from_string(kind);
  r.get("gamma", c.gamma);
  if (r.has("W")) {
    const auto w = r.sub("W").get<std::vector<std::vector<double>>>();
    if (w.size() != 4) throw ConfigError("loss.W: expected 4x4");
    for (int i = 0; i < 4; ++i) {
      if (w[i].size() != 4) throw ConfigError("loss.W: expected 4x4");
      for (int k = 0; k < 4; ++k) c.W(i, k) = w[i][k];
    }
  }
  r.get("control_weight", c.control_weight);
  r.get("mix_state", c.mix_state);
  r.get("mix_control", c.mix_control);
  r.finish();
  c.validate();
  return c;
}

json to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"lr", c.adam.lr},
          {"beta1", c.adam.beta1},
          {"beta2", c.adam.beta2},
          {"eps", c.adam.eps},
          {"seed", c.seed},
          {"train_size", c.train_size},
          {"valid_size", c.valid_size},
          {"test_size", c.test_size}};
}

TrainConfig train_from_json(const json& j) {
  TrainConfig c;
  StrictReader r(j, "train");
  r.get("epochs", c.epochs);
  r.get("batch_size", c.batch_size);
  r.get("lr", c.adam.lr);
  r.get("beta1", c.adam.beta1);
  r.get("beta2", c.adam.beta2);
  r.get("eps", c.adam.eps);
  r.get("seed", c.seed);
  r.get("train_size", c.train_size);
  r.get("valid_size", c.valid_size);
  r.get("test_size", c.test_size);
  r.finish();
  c.validate();
  return c;
}

json to_json(const ArchConfig& c) {
  return {{"arch", to_string(c.arch)}, {"width", c.width},       {"depth", c.depth},
          {"d_model", c.d_model},     {"heads", c.heads},       {"enc_layers", c.enc_layers},
          {"ff_dim", c.ff_dim},       {"latent", c.latent}};
}

ArchConfig arch_from_json(const json& j) {
  ArchConfig c;
  StrictReader r(j, "model");
  std::string a = to_string(c.arch);
  r.get("arch", a);
  c.arch = arch_from_string(a);
  r.get("width", c.width);
  r.get("depth", c.depth);
  r.get("d_model", c.d_model);
  r.get("heads", c.heads);
  r.get("enc_layers", c.enc_layers);
  r.get("ff_dim", c.ff_dim);
  r.get("latent", c.latent);
  r.finish();
  if (c.width < 1 || c.depth < 1 || c.d_model < 1 || c.heads < 1 || c.d_model % c.heads != 0 ||
      c.enc_layers < 0 || c.ff_dim < 1 || c.latent < 1)
    throw ConfigError("model: invalid architecture sizes");
  return c;
}

std::string json_diff(const json& a, const json& b, const std::string& prefix) {
  std::string out;
  if (a.is_object() && b.is_object()) {
    for (const auto& [k, v] : a.items()) {
      const std::string key = prefix.empty() ? k : prefix + "." + k;
      if (!b.contains(k))
        out += "  " + key + ": only in first\n";
      else
        out += json_diff(v, b.at(k), key);
    }
    for (const auto& [k, v] : b.items())
      if (!a.contains(k)) out += "  " + (prefix.empty() ? k : prefix + "." + k) + ": only in second\n";
    return out;
  }
  if (a != b) out += "  " + prefix + ": " + a.dump() + " vs " + b.dump() + "\n";
  return out;
}

}  // namespace plannetx::detail
