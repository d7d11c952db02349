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

#include "plannetx/nn.hpp"

#include <fstream>
#include <sstream>

#include "weights_json.hpp"

namespace plannetx {

std::string to_string(Arch a) {
  switch (a) {
    case Arch::kPlanNetX: return "plannetx";
    case Arch::kPlanNetXEnc: return "plannetx-enc";
    case Arch::kBc: return "bc";
  }
  return "unknown";
}

Arch arch_from_string(const std::string& s) {
  if (s == "plannetx") return Arch::kPlanNetX;
  if (s == "plannetx-enc" || s == "plannetx_enc") return Arch::kPlanNetXEnc;
  if (s == "bc") return Arch::kBc;
  throw ConfigError("unknown architecture '" + s + "'");
}

int policy_input_dim(const ArchConfig& a, int horizon) {
  switch (a.arch) {
    case Arch::kPlanNetX: return 4 + 6 + 1;
    case Arch::kPlanNetXEnc: return 4 + a.latent + 1;
    case Arch::kBc: return 4 + 6 * horizon;
  }
  return 0;
}

namespace detail {

json tensor_to_json(const Eigen::MatrixXd& m) {
  json data = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  return {{"shape", {m.rows(), m.cols()}}, {"data", std::move(data)}};
}

json tensor_to_json(const Eigen::VectorXd& v) {
  return {{"shape", {v.size()}}, {"data", std::vector<double>(v.data(), v.data() + v.size())}};
}

Eigen::MatrixXd matrix_from_json(const json& j, const std::string& what) {
  const auto shape = j.at("shape").get<std::vector<Eigen::Index>>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (shape.size() != 2 || static_cast<Eigen::Index>(data.size()) != shape[0] * shape[1])
    throw ConfigError("weights: tensor '" + what + "' has inconsistent shape");
  Eigen::MatrixXd m(shape[0], shape[1]);
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = data[r * m.cols() + c];
  return m;
}

Eigen::VectorXd vector_from_json(const json& j, const std::string& what) {
  const auto shape = j.at("shape").get<std::vector<Eigen::Index>>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (shape.size() != 1 || static_cast<Eigen::Index>(data.size()) != shape[0])
    throw ConfigError("weights: tensor '" + what + "' has inconsistent shape");
  return Eigen::Map<const Eigen::VectorXd>(data.data(), shape[0]);
}

namespace {

json linear_to_json(const Linear<double>& l) {
  return {{"weight", tensor_to_json(l.weight)}, {"bias", tensor_to_json(l.bias)}};
}

Linear<double> linear_from_json(const json& j, const std::string& what) {
  Linear<double> l;
  l.weight = matrix_from_json(j.at("weight"), what + ".weight");
  l.bias = vector_from_json(j.at("bias"), what + ".bias");
  if (l.bias.size() != l.weight.rows())
    throw ConfigError("weights: bias of '" + what + "' does not match its weight rows");
  return l;
}

void expect_shape(const Linear<double>& l, int in, int out, const std::string& what) {
  if (l.in_dim() != in || l.out_dim() != out)
    throw ConfigError("weights: '" + what + "' has shape " + std::to_string(l.out_dim()) + "x" +
                      std::to_string(l.in_dim()) + ", expected " + std::to_string(out) + "x" +
                      std::to_string(in));
}

json ln_to_json(const LayerNorm<double>& l) {
  return {{"gamma", tensor_to_json(l.gamma)}, {"beta", tensor_to_json(l.beta)}, {"eps", l.eps}};
}

LayerNorm<double> ln_from_json(const json& j, int d, const std::string& what) {
  LayerNorm<double> l;
  l.gamma = vector_from_json(j.at("gamma"), what + ".gamma");
  l.beta = vector_from_json(j.at("beta"), what + ".beta");
  l.eps = j.at("eps").get<double>();
  if (l.gamma.size() != d || l.beta.size() != d)
    throw ConfigError("weights: layer norm '" + what + "' has the wrong width");
  return l;
}

json scaler_to_json(const FeatureScaler& s) {
  return {{"min", tensor_to_json(s.lo)}, {"max", tensor_to_json(s.hi)}};
}

FeatureScaler scaler_from_json(const json& j, int n, const std::string& what) {
  FeatureScaler s{vector_from_json(j.at("min"), what + ".min"),
                  vector_from_json(j.at("max"), what + ".max")};
  if (s.lo.size() != n || s.hi.size() != n)
    throw ConfigError("weights: normalizer group '" + what + "' has the wrong size");
  return s;
}

}  // namespace

json weights_to_json(const NetworkParams& p) {
  json j;
  j["format"] = "plannetx-weights";
  j["version"] = kWeightsFormatVersion;
  j["dtype"] = "f64";
  j["arch"] = {{"name", to_string(p.arch)}, {"horizon", p.horizon}, {"td", p.td}};
  j["normalizer"] = {{"fitted", p.norm.fitted},
                     {"state", scaler_to_json(p.norm.state)},
                     {"param", scaler_to_json(p.norm.param)},
                     {"time", scaler_to_json(p.norm.time)}};
  json layers = json::array();
  for (const auto& l : p.policy.layers) layers.push_back(linear_to_json(l));
  j["policy"] = {{"dims", p.policy.dims()}, {"layers", std::move(layers)}};
  if (p.encoder) {
    const auto& e = *p.encoder;
    json el = json::array();
    for (const auto& l : e.layers)
      el.push_back({{"q", linear_to_json(l.q)},
                    {"k", linear_to_json(l.k)},
                    {"v", linear_to_json(l.v)},
                    {"o", linear_to_json(l.o)},
                    {"ln1", ln_to_json(l.ln1)},
                    {"ff1", linear_to_json(l.ff1)},
                    {"ff2", linear_to_json(l.ff2)},
                    {"ln2", ln_to_json(l.ln2)}});
    j["encoder"] = {{"heads", e.heads},
                    {"embed", linear_to_json(e.embed)},
                    {"pos", tensor_to_json(e.pos)},
                    {"layers", std::move(el)},
                    {"out", linear_to_json(e.out)}};
  } else {
    j["encoder"] = nullptr;
  }
  return j;
}

NetworkParams weights_from_json(const json& j) {
  try {
    if (j.at("format") != "plannetx-weights") throw ConfigError("weights: not a weights file");
    const int version = j.at("version").get<int>();
    if (version != kWeightsFormatVersion)
      throw ConfigError("weights: format version " + std::to_string(version) +
                        " is not supported (expected " + std::to_string(kWeightsFormatVersion) +
                        ")");
    if (j.at("dtype") != "f64") throw ConfigError("weights: unsupported dtype");
    NetworkParams p;
    p.arch = arch_from_string(j.at("arch").at("name").get<std::string>());
    p.horizon = j.at("arch").at("horizon").get<int>();
    p.td = j.at("arch").at("td").get<double>();
    if (p.horizon < 1 || !(p.td > 0)) throw ConfigError("weights: bad horizon or td");
    const auto& jn = j.at("normalizer");
    p.norm.fitted = jn.at("fitted").get<bool>();
    p.norm.state = scaler_from_json(jn.at("state"), 4, "state");
    p.norm.param = scaler_from_json(jn.at("param"), 6, "param");
    p.norm.time = scaler_from_json(jn.at("time"), 1, "time");

    const auto dims = j.at("policy").at("dims").get<std::vector<int>>();
    const auto& jl = j.at("policy").at("layers");
    if (dims.size() < 2 || jl.size() + 1 != dims.size())
      throw ConfigError("weights: policy layer count does not match its dims");
    for (size_t i = 0; i < jl.size(); ++i) {
      const std::string what = "policy." + std::to_string(i);
      p.policy.layers.push_back(linear_from_json(jl[i], what));
      expect_shape(p.policy.layers.back(), dims[i], dims[i + 1], what);
    }
    if (dims.back() != 1) throw ConfigError("weights: policy must have one output");

    if (!j.at("encoder").is_null()) {
      const auto& je = j.at("encoder");
      Encoder<double> e;
      e.heads = je.at("heads").get<int>();
      e.embed = linear_from_json(je.at("embed"), "encoder.embed");
      e.pos = matrix_from_json(je.at("pos"), "encoder.pos");
      const int d = e.embed.out_dim();
      expect_shape(e.embed, 7, d, "encoder.embed");
      if (e.pos.rows() != d || e.pos.cols() != p.horizon)
        throw ConfigError("weights: positional encoding does not match d_model x horizon");
      if (e.heads < 1 || d % e.heads != 0)
        throw ConfigError("weights: d_model not divisible by head count");
      int li = 0;
      for (const auto& jl2 : je.at("layers")) {
        const std::string w = "encoder.layers." + std::to_string(li++);
        EncoderLayer<double> l;
        l.q = linear_from_json(jl2.at("q"), w + ".q");
        l.k = linear_from_json(jl2.at("k"), w + ".k");
        l.v = linear_from_json(jl2.at("v"), w + ".v");
        l.o = linear_from_json(jl2.at("o"), w + ".o");
        for (const auto* x : {&l.q, &l.k, &l.v, &l.o}) expect_shape(*x, d, d, w);
        l.ln1 = ln_from_json(jl2.at("ln1"), d, w + ".ln1");
        l.ln2 = ln_from_json(jl2.at("ln2"), d, w + ".ln2");
        l.ff1 = linear_from_json(jl2.at("ff1"), w + ".ff1");
        l.ff2 = linear_from_json(jl2.at("ff2"), w + ".ff2");
        expect_shape(l.ff1, d, l.ff1.out_dim(), w + ".ff1");
        expect_shape(l.ff2, l.ff1.out_dim(), d, w + ".ff2");
        e.layers.push_back(std::move(l));
      }
      e.out = linear_from_json(je.at("out"), "encoder.out");
      expect_shape(e.out, d, e.out.out_dim(), "encoder.out");
      p.encoder = std::move(e);
    }

    ArchConfig a;
    a.arch = p.arch;
    if (p.arch == Arch::kPlanNetXEnc) {
      if (!p.encoder) throw ConfigError("weights: plannetx-enc requires an encoder");
      a.latent = p.encoder->out_dim();
    } else if (p.encoder) {
      throw ConfigError("weights: encoder present for an architecture without one");
    }
    if (p.policy.input_dim() != policy_input_dim(a, p.horizon))
      throw ConfigError("weights: policy input width " + std::to_string(p.policy.input_dim()) +
                        " does not match architecture " + to_string(p.arch));
    return p;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("weights: malformed document: ") + e.what());
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << text;
  if (!out) throw ConfigError("write failed for '" + path + "'");
}

}  // namespace detail

std::string save_weights_json(const NetworkParams& p) { return detail::weights_to_json(p).dump(); }

NetworkParams load_weights_json(const std::string& text) {
  detail::json j;
  try {
    j = detail::json::parse(text);
  } catch (const detail::json::exception& e) {
    throw ConfigError(std::string("weights: not valid JSON: ") + e.what());
  }
  return detail::weights_from_json(j);
}

void save_weights(const NetworkParams& p, const std::string& path) {
  detail::write_file(path, save_weights_json(p));
}

NetworkParams load_weights(const std::string& path) {
  return load_weights_json(detail::read_file(path));
}

}  // namespace plannetx
