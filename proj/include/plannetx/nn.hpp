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

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "plannetx/errors.hpp"

// Small dense network stack with hand-written reverse passes. Activations
// are stored feature-major: one column per sample (MLP) or per token
// (encoder), so every layer is a single matrix product.

namespace plannetx {

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using ParamList = std::vector<Eigen::Map<Vec<Scalar>>>;

template <typename Scalar>
Eigen::Map<Vec<Scalar>> flat(Mat<Scalar>& m) {
  return {m.data(), m.size()};
}
template <typename Scalar>
Eigen::Map<Vec<Scalar>> flat(Vec<Scalar>& v) {
  return {v.data(), v.size()};
}

// y = W x + b with W of shape out x in.
template <typename Scalar>
struct Linear {
  Mat<Scalar> weight;
  Vec<Scalar> bias;

  Linear() = default;
  Linear(int in, int out) : weight(Mat<Scalar>::Zero(out, in)), bias(Vec<Scalar>::Zero(out)) {}

  int in_dim() const { return static_cast<int>(weight.cols()); }
  int out_dim() const { return static_cast<int>(weight.rows()); }

  Mat<Scalar> forward(const Mat<Scalar>& x) const {
    Mat<Scalar> y = weight * x;
    y.colwise() += bias;
    return y;
  }
  // Accumulates parameter gradients into g and returns dL/dx.
  Mat<Scalar> backward(const Mat<Scalar>& x, const Mat<Scalar>& dy,
                       Linear& g) const {
    g.weight.noalias() += dy * x.transpose();
    g.bias += dy.rowwise().sum();
    return weight.transpose() * dy;
  }

  void collect(ParamList<Scalar>& out) {
    out.push_back(flat(weight));
    out.push_back(flat(bias));
  }
  template <typename Other>
  Linear<Other> cast() const {
    Linear<Other> l;
    l.weight = weight.template cast<Other>();
    l.bias = bias.template cast<Other>();
    return l;
  }
  Linear zeros_like() const { return Linear(in_dim(), out_dim()); }
};

template <typename Scalar, typename Rng>
void kaiming_uniform(Linear<Scalar>& l, Rng& rng) {
  const double bound = std::sqrt(6.0 / l.in_dim());
  std::uniform_real_distribution<double> u(-bound, bound);
  l.weight = Mat<Scalar>::NullaryExpr(l.out_dim(), l.in_dim(),
                                      [&] { return static_cast<Scalar>(u(rng)); });
  l.bias.setZero();
}

template <typename Scalar, typename Rng>
void xavier_uniform(Linear<Scalar>& l, Rng& rng) {
  const double bound = std::sqrt(6.0 / (l.in_dim() + l.out_dim()));
  std::uniform_real_distribution<double> u(-bound, bound);
  l.weight = Mat<Scalar>::NullaryExpr(l.out_dim(), l.in_dim(),
                                      [&] { return static_cast<Scalar>(u(rng)); });
  l.bias.setZero();
}

// Inputs and pre-activations of one forward pass, consumed by backward().
template <typename Scalar>
struct MlpTape {
  const void* owner = nullptr;
  std::vector<Mat<Scalar>> inputs;
  std::vector<Mat<Scalar>> pre;
};

// ReLU between layers, linear output.
template <typename Scalar>
class Mlp {
 public:
  std::vector<Linear<Scalar>> layers;

  Mlp() = default;
  // dims = {in, hidden..., out}
  explicit Mlp(const std::vector<int>& dims) {
    for (size_t i = 0; i + 1 < dims.size(); ++i) layers.emplace_back(dims[i], dims[i + 1]);
  }
  template <typename Rng>
  static Mlp init(const std::vector<int>& dims, Rng& rng) {
    Mlp m(dims);
    for (auto& l : m.layers) kaiming_uniform(l, rng);
    return m;
  }

  int input_dim() const { return layers.front().in_dim(); }
  int output_dim() const { return layers.back().out_dim(); }
  int depth() const { return static_cast<int>(layers.size()) - 1; }
  Eigen::Index parameter_count() const {
    Eigen::Index n = 0;
    for (const auto& l : layers) n += l.weight.size() + l.bias.size();
    return n;
  }
  std::vector<int> dims() const {
    std::vector<int> d{input_dim()};
    for (const auto& l : layers) d.push_back(l.out_dim());
    return d;
  }

  Mat<Scalar> forward(const Mat<Scalar>& x, MlpTape<Scalar>* tape = nullptr) const {
    if (layers.empty() || x.rows() != input_dim())
      throw std::invalid_argument("Mlp::forward: input has " + std::to_string(x.rows()) +
                                  " rows, expected " +
                                  std::to_string(layers.empty() ? 0 : input_dim()));
    if (tape) {
      tape->owner = this;
      tape->inputs.resize(layers.size());
      tape->pre.resize(layers.size());
    }
    Mat<Scalar> h = x;
    for (size_t l = 0; l < layers.size(); ++l) {
      Mat<Scalar> z = layers[l].forward(h);
      if (tape) {
        tape->inputs[l] = std::move(h);
        tape->pre[l] = z;
      }
      h = l + 1 < layers.size() ? Mat<Scalar>(z.cwiseMax(Scalar(0))) : std::move(z);
    }
    return h;
  }

  Mat<Scalar> backward(const MlpTape<Scalar>& tape, const Mat<Scalar>& dout,
                       Mlp& grad) const {
    if (tape.owner != this || tape.pre.size() != layers.size())
      throw ContractViolation("Mlp::backward: tape does not belong to this network");
    if (dout.cols() != tape.pre.back().cols() || dout.rows() != output_dim())
      throw ContractViolation("Mlp::backward: gradient shape mismatch");
    Mat<Scalar> d = dout;
    for (size_t i = layers.size(); i-- > 0;) {
      if (i + 1 < layers.size())
        d = (tape.pre[i].array() > Scalar(0)).select(d, Scalar(0));
      d = layers[i].backward(tape.inputs[i], d, grad.layers[i]);
    }
    return d;
  }

  void collect(ParamList<Scalar>& out) {
    for (auto& l : layers) l.collect(out);
  }
  Mlp zeros_like() const {
    Mlp m;
    for (const auto& l : layers) m.layers.push_back(l.zeros_like());
    return m;
  }
  template <typename Other>
  Mlp<Other> cast() const {
    Mlp<Other> m;
    for (const auto& l : layers) m.layers.push_back(l.template cast<Other>());
    return m;
  }
};

// Per-column normalization over features followed by an affine map.
template <typename Scalar>
struct LayerNorm {
  Vec<Scalar> gamma;
  Vec<Scalar> beta;
  Scalar eps = Scalar(1e-12);

  LayerNorm() = default;
  explicit LayerNorm(int d) : gamma(Vec<Scalar>::Ones(d)), beta(Vec<Scalar>::Zero(d)) {}

  struct Cache {
    Mat<Scalar> xhat;
    Eigen::Matrix<Scalar, 1, Eigen::Dynamic> inv_std;
  };

  Mat<Scalar> normalize(const Mat<Scalar>& x, Cache* cache) const {
    const auto mean = x.colwise().mean();
    Mat<Scalar> xc = x.rowwise() - mean;
    Eigen::Matrix<Scalar, 1, Eigen::Dynamic> var =
        xc.array().square().colwise().sum() / static_cast<Scalar>(x.rows());
    Eigen::Matrix<Scalar, 1, Eigen::Dynamic> inv = (var.array() + eps).rsqrt();
    Mat<Scalar> xhat = xc.array().rowwise() * inv.array();
    if (cache) {
      cache->xhat = xhat;
      cache->inv_std = inv;
    }
    return xhat;
  }

  Mat<Scalar> forward(const Mat<Scalar>& x, Cache* cache = nullptr) const {
    Mat<Scalar> y = normalize(x, cache);
    y = (y.array().colwise() * gamma.array()).colwise() + beta.array();
    return y;
  }

  Mat<Scalar> backward(const Cache& c, const Mat<Scalar>& dy, LayerNorm& g) const {
    g.gamma += (dy.array() * c.xhat.array()).rowwise().sum().matrix();
    g.beta += dy.rowwise().sum();
    const Mat<Scalar> dxhat = dy.array().colwise() * gamma.array();
    const Scalar inv_d = Scalar(1) / static_cast<Scalar>(dy.rows());
    const auto m1 = dxhat.colwise().sum() * inv_d;
    const auto m2 = (dxhat.array() * c.xhat.array()).colwise().sum().matrix() * inv_d;
    Mat<Scalar> dx = dxhat.rowwise() - m1;
    dx -= (c.xhat.array().rowwise() * m2.array()).matrix();
    return dx.array().rowwise() * c.inv_std.array();
  }

  void collect(ParamList<Scalar>& out) {
    out.push_back(flat(gamma));
    out.push_back(flat(beta));
  }
  LayerNorm zeros_like() const {
    LayerNorm l(static_cast<int>(gamma.size()));
    l.gamma.setZero();
    return l;
  }
  template <typename Other>
  LayerNorm<Other> cast() const {
    LayerNorm<Other> l;
    l.gamma = gamma.template cast<Other>();
    l.beta = beta.template cast<Other>();
    l.eps = static_cast<Other>(eps);
    return l;
  }
};

// Post-norm transformer encoder layer: LN(x + MHA(x)), then LN(y + FFN(y)).
template <typename Scalar>
struct EncoderLayer {
  Linear<Scalar> q, k, v, o;
  LayerNorm<Scalar> ln1, ln2;
  Linear<Scalar> ff1, ff2;

  EncoderLayer() = default;
  EncoderLayer(int d, int ff)
      : q(d, d), k(d, d), v(d, d), o(d, d), ln1(d), ln2(d), ff1(d, ff), ff2(ff, d) {}

  void collect(ParamList<Scalar>& out) {
    q.collect(out);
    k.collect(out);
    v.collect(out);
    o.collect(out);
    ln1.collect(out);
    ff1.collect(out);
    ff2.collect(out);
    ln2.collect(out);
  }
  EncoderLayer zeros_like() const {
    EncoderLayer z;
    z.q = q.zeros_like();
    z.k = k.zeros_like();
    z.v = v.zeros_like();
    z.o = o.zeros_like();
    z.ln1 = ln1.zeros_like();
    z.ln2 = ln2.zeros_like();
    z.ff1 = ff1.zeros_like();
    z.ff2 = ff2.zeros_like();
    return z;
  }
  template <typename Other>
  EncoderLayer<Other> cast() const {
    EncoderLayer<Other> e;
    e.q = q.template cast<Other>();
    e.k = k.template cast<Other>();
    e.v = v.template cast<Other>();
    e.o = o.template cast<Other>();
    e.ln1 = ln1.template cast<Other>();
    e.ln2 = ln2.template cast<Other>();
    e.ff1 = ff1.template cast<Other>();
    e.ff2 = ff2.template cast<Other>();
    return e;
  }
};

template <typename Scalar>
struct EncoderTape {
  const void* owner = nullptr;
  int batch = 0;
  Mat<Scalar> tokens;
  struct Layer {
    Mat<Scalar> x, q, k, v, attn_out, y1, f1, h;
    std::vector<Mat<Scalar>> probs;  // batch * heads, each N x N
    typename LayerNorm<Scalar>::Cache ln1, ln2;
  };
  std::vector<Layer> layers;
  Mat<Scalar> last;
};

// Token-wise embedding, learned positional encoding, self-attention stack and
// a per-token output projection. A batch of B sequences of N tokens is laid
// out as N*B columns, sequence-major.
template <typename Scalar>
class Encoder {
 public:
  Linear<Scalar> embed;
  Mat<Scalar> pos;  // d_model x N
  std::vector<EncoderLayer<Scalar>> layers;
  Linear<Scalar> out;
  int heads = 4;

  Encoder() = default;
  Encoder(int token_dim, int tokens, int d_model, int n_heads, int n_layers,
          int ff_dim, int out_dim)
      : embed(token_dim, d_model),
        pos(Mat<Scalar>::Zero(d_model, tokens)),
        out(d_model, out_dim),
        heads(n_heads) {
    if (n_heads <= 0 || d_model % n_heads != 0)
      throw std::invalid_argument("Encoder: d_model must be divisible by the head count");
    for (int i = 0; i < n_layers; ++i) layers.emplace_back(d_model, ff_dim);
  }

  template <typename Rng>
  static Encoder init(int token_dim, int tokens, int d_model, int n_heads,
                      int n_layers, int ff_dim, int out_dim, Rng& rng) {
    Encoder e(token_dim, tokens, d_model, n_heads, n_layers, ff_dim, out_dim);
    xavier_uniform(e.embed, rng);
    std::normal_distribution<double> n(0.0, 0.02);
    e.pos = Mat<Scalar>::NullaryExpr(d_model, tokens, [&] { return static_cast<Scalar>(n(rng)); });
    for (auto& l : e.layers) {
      xavier_uniform(l.q, rng);
      xavier_uniform(l.k, rng);
      xavier_uniform(l.v, rng);
      xavier_uniform(l.o, rng);
      kaiming_uniform(l.ff1, rng);
      kaiming_uniform(l.ff2, rng);
    }
    xavier_uniform(e.out, rng);
    return e;
  }

  int token_dim() const { return embed.in_dim(); }
  int tokens() const { return static_cast<int>(pos.cols()); }
  int d_model() const { return static_cast<int>(pos.rows()); }
  int out_dim() const { return out.out_dim(); }
  int ff_dim() const { return layers.empty() ? 0 : layers[0].ff1.out_dim(); }

  Eigen::Index parameter_count() const {
    Eigen::Index n = embed.weight.size() + embed.bias.size() + pos.size() +
                     out.weight.size() + out.bias.size();
    for (const auto& l : layers)
      for (const auto* lin : {&l.q, &l.k, &l.v, &l.o, &l.ff1, &l.ff2})
        n += lin->weight.size() + lin->bias.size();
    for (const auto& l : layers) n += 2 * (l.ln1.gamma.size() + l.ln2.gamma.size());
    return n;
  }

  // tokens: token_dim x (N * batch). Returns out_dim x (N * batch).
  Mat<Scalar> forward(const Mat<Scalar>& in, EncoderTape<Scalar>* tape = nullptr) const {
    const int n = tokens();
    if (in.rows() != token_dim() || in.cols() % n != 0 || in.cols() == 0)
      throw std::invalid_argument("Encoder::forward: expected " + std::to_string(token_dim()) +
                                  " x (" + std::to_string(n) + " * batch) tokens");
    const int batch = static_cast<int>(in.cols() / n);
    const int dh = d_model() / heads;
    const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(dh));
    if (tape) {
      tape->owner = this;
      tape->batch = batch;
      tape->tokens = in;
      tape->layers.resize(layers.size());
    }
    Mat<Scalar> x = embed.forward(in);
    for (int b = 0; b < batch; ++b) x.middleCols(b * n, n) += pos;

    for (size_t li = 0; li < layers.size(); ++li) {
      const auto& L = layers[li];
      Mat<Scalar> q = L.q.forward(x), k = L.k.forward(x), v = L.v.forward(x);
      Mat<Scalar> att(d_model(), x.cols());
      std::vector<Mat<Scalar>> probs;
      if (tape) probs.reserve(static_cast<size_t>(batch * heads));
      for (int b = 0; b < batch; ++b) {
        for (int h = 0; h < heads; ++h) {
          const auto qb = q.block(h * dh, b * n, dh, n);
          const auto kb = k.block(h * dh, b * n, dh, n);
          const auto vb = v.block(h * dh, b * n, dh, n);
          Mat<Scalar> s = (qb.transpose() * kb) * scale;  // row i attends over j
          s.colwise() -= s.rowwise().maxCoeff();
          s = s.array().exp();
          s.array().colwise() /= s.rowwise().sum().array();
          att.block(h * dh, b * n, dh, n).noalias() = vb * s.transpose();
          if (tape) probs.push_back(std::move(s));
        }
      }
      Mat<Scalar> r1 = x + L.o.forward(att);
      typename LayerNorm<Scalar>::Cache c1, c2;
      Mat<Scalar> y1 = L.ln1.forward(r1, tape ? &c1 : nullptr);
      Mat<Scalar> f1 = L.ff1.forward(y1);
      Mat<Scalar> hdn = f1.cwiseMax(Scalar(0));
      Mat<Scalar> r2 = y1 + L.ff2.forward(hdn);
      Mat<Scalar> y2 = L.ln2.forward(r2, tape ? &c2 : nullptr);
      if (tape) {
        auto& t = tape->layers[li];
        t.x = std::move(x);
        t.q = std::move(q);
        t.k = std::move(k);
        t.v = std::move(v);
        t.attn_out = std::move(att);
        t.probs = std::move(probs);
        t.y1 = y1;
        t.f1 = std::move(f1);
        t.h = std::move(hdn);
        t.ln1 = std::move(c1);
        t.ln2 = std::move(c2);
      }
      x = std::move(y2);
    }
    if (tape) tape->last = x;
    return out.forward(x);
  }

  // Accumulates into grad and returns dL/dtokens.
  Mat<Scalar> backward(const EncoderTape<Scalar>& tape, const Mat<Scalar>& dz,
                       Encoder& grad) const {
    if (tape.owner != this || tape.layers.size() != layers.size())
      throw ContractViolation("Encoder::backward: tape does not belong to this encoder");
    const int n = tokens();
    const int batch = tape.batch;
    if (dz.rows() != out_dim() || dz.cols() != static_cast<Eigen::Index>(n) * batch)
      throw ContractViolation("Encoder::backward: gradient shape mismatch");
    const int dh = d_model() / heads;
    const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(dh));

    Mat<Scalar> dx = out.backward(tape.last, dz, grad.out);
    for (size_t li = layers.size(); li-- > 0;) {
      const auto& L = layers[li];
      auto& G = grad.layers[li];
      const auto& t = tape.layers[li];
      Mat<Scalar> dr2 = L.ln2.backward(t.ln2, dx, G.ln2);
      Mat<Scalar> dh_ = L.ff2.backward(t.h, dr2, G.ff2);
      dh_ = (t.f1.array() > Scalar(0)).select(dh_, Scalar(0));
      Mat<Scalar> dy1 = dr2 + L.ff1.backward(t.y1, dh_, G.ff1);
      Mat<Scalar> dr1 = L.ln1.backward(t.ln1, dy1, G.ln1);
      Mat<Scalar> datt = L.o.backward(t.attn_out, dr1, G.o);

      Mat<Scalar> dq(d_model(), dz.cols()), dk(d_model(), dz.cols()), dv(d_model(), dz.cols());
      for (int b = 0; b < batch; ++b) {
        for (int h = 0; h < heads; ++h) {
          const Mat<Scalar>& a = t.probs[static_cast<size_t>(b * heads + h)];
          const auto qb = t.q.block(h * dh, b * n, dh, n);
          const auto kb = t.k.block(h * dh, b * n, dh, n);
          const auto vb = t.v.block(h * dh, b * n, dh, n);
          const auto dob = datt.block(h * dh, b * n, dh, n);
          dv.block(h * dh, b * n, dh, n).noalias() = dob * a;
          Mat<Scalar> da = dob.transpose() * vb;
          const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> rs =
              (da.array() * a.array()).rowwise().sum();
          Mat<Scalar> ds = a.array() * (da.array().colwise() - rs.array());
          dq.block(h * dh, b * n, dh, n).noalias() = (kb * ds.transpose()) * scale;
          dk.block(h * dh, b * n, dh, n).noalias() = (qb * ds) * scale;
        }
      }
      dx = dr1;
      dx += L.q.backward(t.x, dq, G.q);
      dx += L.k.backward(t.x, dk, G.k);
      dx += L.v.backward(t.x, dv, G.v);
    }
    for (int b = 0; b < batch; ++b) grad.pos += dx.middleCols(b * n, n);
    return embed.backward(tape.tokens, dx, grad.embed);
  }

  void collect(ParamList<Scalar>& o) {
    embed.collect(o);
    o.push_back(flat(pos));
    for (auto& l : layers) l.collect(o);
    out.collect(o);
  }
  Encoder zeros_like() const {
    Encoder e;
    e.embed = embed.zeros_like();
    e.pos = Mat<Scalar>::Zero(pos.rows(), pos.cols());
    for (const auto& l : layers) e.layers.push_back(l.zeros_like());
    e.out = out.zeros_like();
    e.heads = heads;
    return e;
  }
  template <typename Other>
  Encoder<Other> cast() const {
    Encoder<Other> e;
    e.embed = embed.template cast<Other>();
    e.pos = pos.template cast<Other>();
    for (const auto& l : layers) e.layers.push_back(l.template cast<Other>());
    e.out = out.template cast<Other>();
    e.heads = heads;
    return e;
  }
};

// Min-max scaling of one feature group. Features with hi == lo are only
// shifted.
struct FeatureScaler {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;

  Eigen::VectorXd scale() const {
    Eigen::VectorXd s(lo.size());
    for (Eigen::Index i = 0; i < lo.size(); ++i)
      s[i] = hi[i] > lo[i] ? 1.0 / (hi[i] - lo[i]) : 1.0;
    return s;
  }
  template <typename Scalar>
  Mat<Scalar> apply(const Mat<Scalar>& x) const {
    if (x.rows() != lo.size())
      throw std::invalid_argument("FeatureScaler: feature count mismatch");
    const Vec<Scalar> s = scale().cast<Scalar>();
    const Vec<Scalar> l = lo.cast<Scalar>();
    return (x.colwise() - l).array().colwise() * s.array();
  }
  int degenerate() const {
    int n = 0;
    for (Eigen::Index i = 0; i < lo.size(); ++i) n += hi[i] > lo[i] ? 0 : 1;
    return n;
  }
};

struct Normalizer {
  FeatureScaler state;  // s, v, a, j
  FeatureScaler param;  // s_lead, v_lead, a_lead, v_max1, v_max2, s_change
  FeatureScaler time;   // t_k
  bool fitted = false;

  void require_fitted() const {
    if (!fitted) throw ContractViolation("Normalizer used before fitting");
  }
};

enum class FeatureGroup { kState, kParam, kTime };

template <typename Scalar>
Mat<Scalar> normalize(const Normalizer& n, FeatureGroup g, const Mat<Scalar>& x) {
  n.require_fitted();
  switch (g) {
    case FeatureGroup::kState: return n.state.apply(x);
    case FeatureGroup::kParam: return n.param.apply(x);
    case FeatureGroup::kTime: return n.time.apply(x);
  }
  return x;
}

enum class Arch { kPlanNetX, kPlanNetXEnc, kBc };
std::string to_string(Arch a);
Arch arch_from_string(const std::string& s);

struct ArchConfig {
  Arch arch = Arch::kPlanNetX;
  int width = 512;
  int depth = 3;
  // PlanNetXEnc only.
  int d_model = 32;
  int heads = 4;
  int enc_layers = 3;
  int ff_dim = 128;
  int latent = 32;
};

inline constexpr int kWeightsFormatVersion = 1;

// Everything needed to run a trained policy.
struct NetworkParams {
  Arch arch = Arch::kPlanNetX;
  int horizon = 30;
  double td = 0.2;
  Normalizer norm;
  Mlp<double> policy;
  std::optional<Encoder<double>> encoder;

  Eigen::Index parameter_count() const {
    return policy.parameter_count() + (encoder ? encoder->parameter_count() : 0);
  }
  void collect(ParamList<double>& out) {
    policy.collect(out);
    if (encoder) encoder->collect(out);
  }
  NetworkParams zeros_like() const {
    NetworkParams g = *this;
    g.policy = policy.zeros_like();
    if (encoder) g.encoder = encoder->zeros_like();
    return g;
  }
};

// Number of policy inputs for a given architecture.
int policy_input_dim(const ArchConfig& a, int horizon);

template <typename Rng>
NetworkParams init_network(const ArchConfig& a, int horizon, double td,
                           const Normalizer& norm, Rng& rng);

std::string save_weights_json(const NetworkParams& p);
NetworkParams load_weights_json(const std::string& text);
void save_weights(const NetworkParams& p, const std::string& path);
NetworkParams load_weights(const std::string& path);

}  // namespace plannetx

namespace plannetx {

template <typename Rng>
NetworkParams init_network(const ArchConfig& a, int horizon, double td,
                           const Normalizer& norm, Rng& rng) {
  if (a.width < 1 || a.depth < 1)
    throw std::invalid_argument("init_network: width and depth must be >= 1");
  NetworkParams p;
  p.arch = a.arch;
  p.horizon = horizon;
  p.td = td;
  p.norm = norm;
  std::vector<int> dims{policy_input_dim(a, horizon)};
  for (int i = 0; i < a.depth; ++i) dims.push_back(a.width);
  dims.push_back(1);
  p.policy = Mlp<double>::init(dims, rng);
  if (a.arch == Arch::kPlanNetXEnc)
    p.encoder = Encoder<double>::init(/*token_dim=*/7, horizon, a.d_model, a.heads,
                                      a.enc_layers, a.ff_dim, a.latent, rng);
  return p;
}

}  // namespace plannetx
