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

#include "plannetx/compression.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "plannetx/policy.hpp"
#include "weights_json.hpp"

namespace plannetx {

void PruneConfig::validate() const {
  if (!(target_fraction > 0 && target_fraction < 1))
    throw std::invalid_argument("PruneConfig: target_fraction must lie in (0, 1)");
  if (rounds < 1 || finetune_epochs < 0)
    throw std::invalid_argument("PruneConfig: rounds must be >= 1 and epochs >= 0");
}

Eigen::VectorXd unit_l1_norms(const Linear<double>& layer) {
  return layer.weight.cwiseAbs().rowwise().sum();
}

namespace {

void check_hidden(const Mlp<double>& mlp, int h) {
  if (h < 0 || h + 1 >= static_cast<int>(mlp.layers.size()))
    throw std::invalid_argument("pruning: " + std::to_string(h) + " is not a hidden layer");
}

template <class M>
M drop_rows(const M& m, const std::vector<bool>& keep) {
  M out(std::count(keep.begin(), keep.end(), true), m.cols());
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    if (keep[static_cast<size_t>(i)]) out.row(r++) = m.row(i);
  return out;
}

}  // namespace

void remove_units(Mlp<double>& mlp, int h, std::vector<int> units) {
  check_hidden(mlp, h);
  auto& cur = mlp.layers[static_cast<size_t>(h)];
  auto& next = mlp.layers[static_cast<size_t>(h + 1)];
  std::vector<bool> keep(static_cast<size_t>(cur.out_dim()), true);
  for (int u : units) {
    if (u < 0 || u >= cur.out_dim()) throw std::invalid_argument("remove_units: bad unit index");
    keep[static_cast<size_t>(u)] = false;
  }
  if (std::count(keep.begin(), keep.end(), true) == 0)
    throw std::invalid_argument("remove_units: layer " + std::to_string(h) + " would be empty");
  cur.weight = drop_rows(cur.weight, keep);
  cur.bias = drop_rows(cur.bias, keep);
  const Eigen::MatrixXd nt = next.weight.transpose();
  next.weight = drop_rows(nt, keep).transpose();
}

Mlp<double> mask_units(const Mlp<double>& mlp, int h, const std::vector<int>& units) {
  check_hidden(mlp, h);
  Mlp<double> m = mlp;
  for (int u : units) {
    m.layers[static_cast<size_t>(h)].weight.row(u).setZero();
    m.layers[static_cast<size_t>(h)].bias(u) = 0.0;
  }
  return m;
}

std::vector<RemovedUnit> prune_to_budget(Mlp<double>& mlp, Eigen::Index budget) {
  std::vector<RemovedUnit> removed;
  const int hidden = static_cast<int>(mlp.layers.size()) - 1;
  if (hidden < 1) throw std::invalid_argument("prune_to_budget: network has no hidden layer");
  while (mlp.parameter_count() > budget) {
    int h = 0;
    for (int i = 1; i < hidden; ++i)
      if (mlp.layers[static_cast<size_t>(i)].out_dim() > mlp.layers[static_cast<size_t>(h)].out_dim())
        h = i;
    if (mlp.layers[static_cast<size_t>(h)].out_dim() <= 1)
      throw std::invalid_argument("prune_to_budget: budget " + std::to_string(budget) +
                                  " would empty a layer");
    Eigen::Index u;
    unit_l1_norms(mlp.layers[static_cast<size_t>(h)]).minCoeff(&u);
    remove_units(mlp, h, {static_cast<int>(u)});
    removed.push_back({h, static_cast<int>(u)});
  }
  return removed;
}

PruneResult prune_structured(const NetworkParams& params, const PruneConfig& cfg,
                             const FineTune& finetune) {
  cfg.validate();
  PruneResult res;
  res.params = params;
  res.original_params = params.policy.parameter_count();
  // Feasibility: every hidden layer at width 1.
  {
    std::vector<int> d = params.policy.dims();
    std::fill(d.begin() + 1, d.end() - 1, 1);
    Eigen::Index minimal = 0;
    for (size_t i = 0; i + 1 < d.size(); ++i) minimal += d[i] * d[i + 1] + d[i + 1];
    const auto final_budget = static_cast<Eigen::Index>(
        std::floor(static_cast<double>(res.original_params) * (1.0 - cfg.target_fraction)));
    if (minimal > final_budget)
      throw std::invalid_argument("prune_structured: target " + std::to_string(cfg.target_fraction) +
                                  " would empty a layer");
  }
  for (int r = 1; r <= cfg.rounds; ++r) {
    const double frac = cfg.target_fraction * r / cfg.rounds;
    const auto budget = static_cast<Eigen::Index>(
        std::floor(static_cast<double>(res.original_params) * (1.0 - frac)));
    prune_to_budget(res.params.policy, budget);
    if (finetune) res.params = finetune(res.params, r);
    PruneRound pr;
    pr.round = r;
    pr.params = res.params.policy.parameter_count();
    const auto d = res.params.policy.dims();
    pr.widths.assign(d.begin() + 1, d.end() - 1);
    res.rounds.push_back(pr);
  }
  return res;
}

Quantizer symmetric_quantizer(float max_abs) {
  Quantizer q;
  q.scale = std::max(max_abs / static_cast<float>(kQMax), kScaleFloor);
  q.zero_point = 0;
  return q;
}

Quantizer affine_quantizer(float lo, float hi) {
  lo = std::min(lo, 0.0f);
  hi = std::max(hi, 0.0f);
  Quantizer q;
  q.scale = std::max((hi - lo) / static_cast<float>(kQMax - kQMin), kScaleFloor);
  const float z = static_cast<float>(kQMin) - lo / q.scale;
  q.zero_point = std::clamp(static_cast<std::int32_t>(std::lround(z)), kQMin, kQMax);
  return q;
}

std::int32_t quantize(float x, const Quantizer& q) {
  const long v = std::lround(x / q.scale) + q.zero_point;
  return static_cast<std::int32_t>(std::clamp<long>(v, kQMin, kQMax));
}

float dequantize(std::int32_t v, const Quantizer& q) {
  return q.scale * static_cast<float>(v - q.zero_point);
}

namespace {

// Q31 fixed-point representation of a positive real multiplier:
// m = mult * 2^(-31 - shift).
void quantize_multiplier(double m, std::int32_t& mult, int& shift) {
  if (!(m > 0)) {
    mult = 0;
    shift = 0;
    return;
  }
  int exp = 0;
  const double frac = std::frexp(m, &exp);  // m = frac * 2^exp, frac in [0.5, 1)
  auto q = static_cast<std::int64_t>(std::llround(frac * (1LL << 31)));
  if (q == (1LL << 31)) {
    q /= 2;
    ++exp;
  }
  mult = static_cast<std::int32_t>(q);
  shift = -exp;
}

std::int32_t requantize(std::int32_t acc, std::int32_t mult, int shift) {
  const int total = 31 + shift;
  const std::int64_t prod = static_cast<std::int64_t>(acc) * mult;
  if (total <= 0) return static_cast<std::int32_t>(prod << -total);
  if (total >= 63) return 0;
  const std::int64_t round = std::int64_t{1} << (total - 1);
  return static_cast<std::int32_t>((prod + round - (prod < 0 ? 1 : 0)) >> total);
}

}  // namespace

void QuantModel::finalize() {
  for (size_t l = 0; l < layers.size(); ++l) {
    auto& L = layers[l];
    L.weight_i32 = L.weight.cast<std::int32_t>();
    const double acc_scale = static_cast<double>(L.weight_q.scale) * L.input_q.scale;
    L.bias_i32.resize(L.bias.size());
    for (Eigen::Index i = 0; i < L.bias.size(); ++i) {
      const double b = std::round(static_cast<double>(L.bias(i)) / acc_scale);
      L.bias_i32(i) = static_cast<std::int32_t>(
          std::clamp(b, -2147483648.0, 2147483647.0));
    }
    if (l + 1 < layers.size())
      quantize_multiplier(acc_scale / layers[l + 1].input_q.scale, L.mult, L.shift);
  }
}

Eigen::MatrixXf QuantModel::forward(const Eigen::MatrixXf& x, QuantStats* stats) const {
  if (layers.empty() || x.rows() != layers.front().weight.cols())
    throw std::invalid_argument("QuantModel::forward: input width mismatch");
  const Eigen::Index b = x.cols();
  using MatI = Eigen::Matrix<std::int32_t, Eigen::Dynamic, Eigen::Dynamic>;
  MatI q(x.rows(), b);
  const Quantizer& in0 = layers.front().input_q;
  for (Eigen::Index i = 0; i < x.size(); ++i) q(i) = quantize(x(i), in0) - in0.zero_point;
  if (stats) stats->float_ops_boundary += 2 * x.size();

  for (size_t l = 0; l < layers.size(); ++l) {
    const auto& L = layers[l];
    MatI acc = L.weight_i32 * q;
    acc.colwise() += L.bias_i32;
    if (stats) stats->int_macs += L.weight.size() * b;
    if (l + 1 == layers.size()) {
      const float s = L.weight_q.scale * L.input_q.scale;
      if (stats) stats->float_ops_boundary += acc.size();
      return acc.cast<float>() * s;
    }
    // Requantize into the next site; ReLU is the lower clamp at its zero
    // point. Stored relative to the zero point for the next product.
    const std::int32_t z = layers[l + 1].input_q.zero_point;
    q.resize(acc.rows(), b);
    for (Eigen::Index i = 0; i < acc.size(); ++i) {
      const std::int32_t v = z + requantize(acc(i), L.mult, L.shift);
      q(i) = std::clamp(v, std::max(z, kQMin), kQMax) - z;
    }
  }
  return {};
}

Eigen::MatrixXf collect_policy_inputs(const NetworkParams& params,
                                      const std::vector<Sample>& samples) {
  const PolicyModel<float> model(params);
  std::vector<Eigen::VectorXf> cols;
  const int steps = params.arch == Arch::kBc ? 1 : params.horizon;
  for (const auto& s : samples) {
    Eigen::MatrixXf X, U;
    model.plan_with(
        [&](const Eigen::MatrixXf& in) {
          cols.push_back(in.col(0));
          return model.mlp().forward(in);
        },
        s.x0, s.params, steps, X, U);
  }
  Eigen::MatrixXf out(params.policy.input_dim(), static_cast<Eigen::Index>(cols.size()));
  for (size_t i = 0; i < cols.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = cols[i];
  return out;
}

QuantModel calibrate_quantize(const NetworkParams& params, const std::vector<Sample>& calib) {
  if (calib.empty()) throw std::invalid_argument("calibrate_quantize: empty calibration set");
  QuantModel m;
  m.base = params;
  const Mlp<float> mlp = params.policy.cast<float>();
  const Eigen::MatrixXf inputs = collect_policy_inputs(params, calib);
  MlpTape<float> tape;
  mlp.forward(inputs, &tape);
  for (size_t l = 0; l < mlp.layers.size(); ++l) {
    // Site l is the input of layer l: the raw input or a post-ReLU activation.
    const Eigen::MatrixXf site =
        l == 0 ? inputs : Eigen::MatrixXf(tape.pre[l - 1].cwiseMax(0.0f));
    SiteStats st{site.minCoeff(), site.maxCoeff(), false};
    if (!(st.max > st.min)) {
      st.degenerate = true;
      m.diagnostics.push_back("activation site " + std::to_string(l) +
                              " is constant; scale floor applied");
    }
    m.calibration.push_back(st);
    QuantLayer L;
    const auto& W = mlp.layers[l].weight;
    L.weight_q = symmetric_quantizer(W.cwiseAbs().maxCoeff());
    if (W.cwiseAbs().maxCoeff() == 0.0f)
      m.diagnostics.push_back("weight tensor " + std::to_string(l) + " is zero; scale floor applied");
    L.weight = W.unaryExpr([&](float w) { return static_cast<std::int8_t>(quantize(w, L.weight_q)); });
    L.bias = mlp.layers[l].bias;
    L.input_q = affine_quantizer(st.min, st.max);
    m.layers.push_back(std::move(L));
  }
  m.finalize();
  return m;
}

namespace {

using detail::json;

json quantizer_json(const Quantizer& q) { return {{"scale", q.scale}, {"zero_point", q.zero_point}}; }

Quantizer quantizer_from(const json& j) {
  Quantizer q{j.at("scale").get<float>(), j.at("zero_point").get<std::int32_t>()};
  if (!(q.scale > 0)) throw ConfigError("quantized model: scale must be > 0");
  return q;
}

}  // namespace

std::string save_quant_json(const QuantModel& m) {
  json j = detail::weights_to_json(m.base);
  json layers = json::array();
  for (const auto& L : m.layers) {
    std::vector<int> w(static_cast<size_t>(L.weight.size()));
    for (Eigen::Index r = 0; r < L.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < L.weight.cols(); ++c)
        w[static_cast<size_t>(r * L.weight.cols() + c)] = L.weight(r, c);
    layers.push_back({{"shape", {L.weight.rows(), L.weight.cols()}},
                      {"weight_i8", w},
                      {"weight_q", quantizer_json(L.weight_q)},
                      {"bias_f32", std::vector<float>(L.bias.data(), L.bias.data() + L.bias.size())},
                      {"input_q", quantizer_json(L.input_q)}});
  }
  json calib = json::array();
  for (const auto& s : m.calibration)
    calib.push_back({{"min", s.min}, {"max", s.max}, {"degenerate", s.degenerate}});
  j["quant"] = {{"mode", "int8-static-per-tensor"},
                {"layers", layers},
                {"calibration", calib},
                {"diagnostics", m.diagnostics}};
  return j.dump();
}

QuantModel load_quant_json(const std::string& text) {
  try {
    json j = json::parse(text);
    if (!j.contains("quant")) throw ConfigError("quantized model: missing quant section");
    const json q = j.at("quant");
    if (q.at("mode") != "int8-static-per-tensor")
      throw ConfigError("quantized model: unsupported arithmetic mode");
    j.erase("quant");
    QuantModel m;
    m.base = detail::weights_from_json(j);
    const auto& jl = q.at("layers");
    if (jl.size() != m.base.policy.layers.size())
      throw ConfigError("quantized model: layer count mismatch");
    size_t li = 0;
    for (const auto& x : jl) {
      const auto& ref = m.base.policy.layers[li++];
      QuantLayer L;
      const auto shape = x.at("shape").get<std::vector<Eigen::Index>>();
      const auto w = x.at("weight_i8").get<std::vector<int>>();
      if (shape.size() != 2 || shape[0] != ref.out_dim() || shape[1] != ref.in_dim() ||
          static_cast<Eigen::Index>(w.size()) != shape[0] * shape[1])
        throw ConfigError("quantized model: weight shape mismatch");
      L.weight.resize(shape[0], shape[1]);
      for (Eigen::Index r = 0; r < shape[0]; ++r)
        for (Eigen::Index c = 0; c < shape[1]; ++c) {
          const int v = w[static_cast<size_t>(r * shape[1] + c)];
          if (v < kQMin || v > kQMax) throw ConfigError("quantized model: weight out of int8 range");
          L.weight(r, c) = static_cast<std::int8_t>(v);
        }
      L.weight_q = quantizer_from(x.at("weight_q"));
      const auto b = x.at("bias_f32").get<std::vector<float>>();
      if (static_cast<Eigen::Index>(b.size()) != shape[0])
        throw ConfigError("quantized model: bias shape mismatch");
      L.bias = Eigen::Map<const Eigen::VectorXf>(b.data(), shape[0]);
      L.input_q = quantizer_from(x.at("input_q"));
      m.layers.push_back(std::move(L));
    }
    for (const auto& s : q.at("calibration"))
      m.calibration.push_back({s.at("min").get<float>(), s.at("max").get<float>(),
                               s.at("degenerate").get<bool>()});
    m.diagnostics = q.at("diagnostics").get<std::vector<std::string>>();
    m.finalize();
    return m;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("quantized model: malformed document: ") + e.what());
  }
}

void save_quant(const QuantModel& m, const std::string& path) {
  detail::write_file(path, save_quant_json(m));
}

QuantModel load_quant(const std::string& path) { return load_quant_json(detail::read_file(path)); }

}  // namespace plannetx
