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

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "plannetx/compression.hpp"
#include "plannetx/nn.hpp"
#include "plannetx/ocp.hpp"
#include "plannetx/training.hpp"

// Worst-case inference timing: per input the minimum over repeats, then the
// 95% quantile across inputs.

namespace plannetx {

struct MachineInfo {
  std::string cpu;
  std::string compiler;
  std::string simd;
  unsigned hardware_threads = 0;
  bool pinned = false;  // benchmark thread bound to one core
};

MachineInfo machine_info();

// Binds the calling thread to the core it is running on; restores the
// previous affinity on destruction. No-op where unsupported.
class ScopedPin {
 public:
  ScopedPin();
  ~ScopedPin();
  ScopedPin(const ScopedPin&) = delete;
  ScopedPin& operator=(const ScopedPin&) = delete;
  bool active() const { return active_; }

 private:
  bool active_ = false;
  std::vector<unsigned char> saved_;
};

// Linear interpolation between order statistics.
double quantile(std::vector<double> v, double q);

enum class TimingMode { kPolicy, kPlanning };
std::string to_string(TimingMode m);
TimingMode timing_mode_from_string(const std::string& s);

struct TimingResult {
  std::string target;
  TimingMode mode = TimingMode::kPlanning;
  int repeats = 0;
  double p95_ms = 0.0;
  double median_ms = 0.0;
  double min_ms = 0.0;
  double max_ms = 0.0;
  std::vector<double> per_input_ms;  // min over repeats
  MachineInfo machine;
};

// call(i) runs the target on input i. The first `warmup` calls are discarded.
TimingResult benchmark_time(const std::string& target, TimingMode mode, std::size_t inputs,
                            const std::function<void(std::size_t)>& call, int repeats = 20,
                            int warmup = 10);

struct BenchInput {
  State x0;
  PlanParams params;
};
std::vector<BenchInput> bench_inputs(const std::vector<Sample>& samples, std::size_t n);

// The MPC answers both modes with one cold solve.
TimingResult bench_mpc(const OcpConfig& cfg, const std::vector<BenchInput>& inputs,
                       int repeats = 20, int warmup = 10);
// FP32 network.
TimingResult bench_network(const NetworkParams& net, const std::vector<BenchInput>& inputs,
                           TimingMode mode, int repeats = 20, int warmup = 10,
                           const std::string& name = "learned");
TimingResult bench_quant(const QuantModel& q, const std::vector<BenchInput>& inputs,
                         TimingMode mode, int repeats = 20, int warmup = 10,
                         const std::string& name = "learned-quant");

std::string timing_json(const TimingResult& r);
std::string timing_csv(const TimingResult& r);

}  // namespace plannetx
