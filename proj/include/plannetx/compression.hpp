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
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "plannetx/nn.hpp"
#include "plannetx/training.hpp"

namespace plannetx {

// ---- structured pruning ----------------------------------------------------

struct PruneConfig {
  double target_fraction = 0.9;  // of the policy MLP's parameters
  int rounds = 9;
  int finetune_epochs = 10;

  void validate() const;
};

// l1 norm of each unit's incoming weights (rows of W, which is out x in).
// These are the columns of the weight matrix in the x^T W convention.
Eigen::VectorXd unit_l1_norms(const Linear<double>& layer);

// Physically removes hidden units of hidden layer `h` (output rows of
// layers[h], bias entries, input columns of layers[h+1]).
void remove_units(Mlp<double>& mlp, int h, std::vector<int> units);

// Same network with the units' outgoing activations forced to zero.
Mlp<double> mask_units(const Mlp<double>& mlp, int h, const std::vector<int>& units);

struct RemovedUnit {
  int layer;  // hidden layer index
  int unit;   // index at the time of removal
};

// Removes lowest-l1 units, always from the currently widest hidden layer,
// until the parameter count is <= budget. Throws std::invalid_argument when
// that would empty a layer.
std::vector<RemovedUnit> prune_to_budget(Mlp<double>& mlp, Eigen::Index budget);

struct PruneRound {
  int round = 0;
  Eigen::Index params = 0;
  std::vector<int> widths;
};

struct PruneResult {
  NetworkParams params;
  Eigen::Index original_params = 0;
  std::vector<PruneRound> rounds;
};

// Fine-tunes the network after pruning round `round` (1-based).
using FineTune = std::function<NetworkParams(const NetworkParams&, int round)>;

PruneResult prune_structured(const NetworkParams& params, const PruneConfig& cfg,
                             const FineTune& finetune);

// ---- static INT8 quantization ----------------------------------------------

struct Quantizer {
  float scale = 1.0f;
  std::int32_t zero_point = 0;
};

inline constexpr std::int32_t kQMin = -128;
inline constexpr std::int32_t kQMax = 127;
inline constexpr float kScaleFloor = 1e-8f;

// Symmetric weight quantizer: scale = max|w| / 127, zero point 0.
Quantizer symmetric_quantizer(float max_abs);
// Asymmetric activation quantizer over [min, max] widened to contain 0, so
// that 0 is exactly representable.
Quantizer affine_quantizer(float lo, float hi);

std::int32_t quantize(float x, const Quantizer& q);
float dequantize(std::int32_t q, const Quantizer& qz);

struct QuantLayer {
  Eigen::Matrix<std::int8_t, Eigen::Dynamic, Eigen::Dynamic> weight;
  Quantizer weight_q;
  Eigen::VectorXf bias;       // FP32 as stored
  Quantizer input_q;          // activation site feeding this layer
  // Derived integer pipeline.
  Eigen::Matrix<std::int32_t, Eigen::Dynamic, Eigen::Dynamic> weight_i32;
  Eigen::Matrix<std::int32_t, Eigen::Dynamic, 1> bias_i32;  // scale s_w * s_in
  std::int32_t mult = 0;      // requantization multiplier, Q31
  int shift = 0;
};

struct SiteStats {
  float min = 0.0f;
  float max = 0.0f;
  bool degenerate = false;
};

struct QuantStats {
  std::int64_t int_macs = 0;        // integer multiply-accumulates
  std::int64_t float_ops_hidden = 0;  // floating-point ops inside hidden layers
  std::int64_t float_ops_boundary = 0;  // input quantization and output dequantization
};

struct QuantModel {
  NetworkParams base;  // normalizer, arch, encoder (kept in floating point)
  std::vector<QuantLayer> layers;
  std::vector<SiteStats> calibration;  // one per layer input
  std::vector<std::string> diagnostics;

  // Policy MLP forward in integer arithmetic. x is in_dim x batch.
  Eigen::MatrixXf forward(const Eigen::MatrixXf& x, QuantStats* stats = nullptr) const;
  void finalize();  // derives the integer pipeline from weights and scales
};

// Runs FP32 rollouts of `params` on the calibration samples, records
// per-site activation ranges of the policy MLP and builds the INT8 model.
QuantModel calibrate_quantize(const NetworkParams& params, const std::vector<Sample>& calib);

// Collects the policy-MLP inputs seen along FP32 rollouts (for calibration
// and tests). Columns are inputs.
Eigen::MatrixXf collect_policy_inputs(const NetworkParams& params,
                                      const std::vector<Sample>& samples);

std::string save_quant_json(const QuantModel& m);
QuantModel load_quant_json(const std::string& text);
void save_quant(const QuantModel& m, const std::string& path);
QuantModel load_quant(const std::string& path);

}  // namespace plannetx
