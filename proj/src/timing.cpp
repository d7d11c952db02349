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

#include "plannetx/timing.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <thread>

#ifdef __linux__
#include <sched.h>
#endif

#include <json.hpp>

#include "plannetx/errors.hpp"
#include "plannetx/policy.hpp"

namespace plannetx {

MachineInfo machine_info() {
  MachineInfo m;
  std::ifstream cpu("/proc/cpuinfo");
  for (std::string line; std::getline(cpu, line);) {
    if (line.rfind("model name", 0) == 0) {
      const auto colon = line.find(':');
      if (colon != std::string::npos) m.cpu = line.substr(colon + 2);
      break;
    }
  }
  if (m.cpu.empty()) m.cpu = "unknown";
#if defined(__clang__)
  m.compiler = "clang " __clang_version__;
#elif defined(__GNUC__)
  m.compiler = "gcc " __VERSION__;
#else
  m.compiler = "unknown";
#endif
  m.simd = Eigen::SimdInstructionSetsInUse();
  m.hardware_threads = std::thread::hardware_concurrency();
  return m;
}

ScopedPin::ScopedPin() {
#ifdef __linux__
  cpu_set_t old;
  if (sched_getaffinity(0, sizeof old, &old) != 0) return;
  const int cpu = sched_getcpu();
  if (cpu < 0) return;
  cpu_set_t one;
  CPU_ZERO(&one);
  CPU_SET(cpu, &one);
  if (sched_setaffinity(0, sizeof one, &one) != 0) return;
  saved_.assign(reinterpret_cast<unsigned char*>(&old),
                reinterpret_cast<unsigned char*>(&old) + sizeof old);
  active_ = true;
#endif
}

ScopedPin::~ScopedPin() {
#ifdef __linux__
  if (!active_) return;
  cpu_set_t old;
  std::copy(saved_.begin(), saved_.end(), reinterpret_cast<unsigned char*>(&old));
  sched_setaffinity(0, sizeof old, &old);
#endif
}

double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw std::invalid_argument("quantile: empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("quantile: q outside [0, 1]");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

std::string to_string(TimingMode m) { return m == TimingMode::kPolicy ? "policy" : "planning"; }

TimingMode timing_mode_from_string(const std::string& s) {
  if (s == "policy") return TimingMode::kPolicy;
  if (s == "planning") return TimingMode::kPlanning;
  throw ConfigError("unknown timing mode '" + s + "' (policy | planning)");
}

TimingResult benchmark_time(const std::string& target, TimingMode mode, std::size_t inputs,
                            const std::function<void(std::size_t)>& call, int repeats,
                            int warmup) {
  if (inputs == 0) throw std::invalid_argument("benchmark_time: no inputs");
  if (repeats < 1) throw std::invalid_argument("benchmark_time: repeats must be >= 1");
  ScopedPin pin;
  for (int w = 0; w < warmup; ++w) call(static_cast<std::size_t>(w) % inputs);
  TimingResult r;
  r.target = target;
  r.mode = mode;
  r.repeats = repeats;
  r.per_input_ms.resize(inputs);
  using clock = std::chrono::steady_clock;
  for (std::size_t i = 0; i < inputs; ++i) {
    double best = INFINITY;
    for (int k = 0; k < repeats; ++k) {
      const auto t0 = clock::now();
      call(i);
      const auto t1 = clock::now();
      best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    r.per_input_ms[i] = best;
  }
  r.p95_ms = quantile(r.per_input_ms, 0.95);
  r.median_ms = quantile(r.per_input_ms, 0.5);
  r.min_ms = *std::min_element(r.per_input_ms.begin(), r.per_input_ms.end());
  r.max_ms = *std::max_element(r.per_input_ms.begin(), r.per_input_ms.end());
  r.machine = machine_info();
  r.machine.pinned = pin.active();
  return r;
}

std::vector<BenchInput> bench_inputs(const std::vector<Sample>& samples, std::size_t n) {
  if (samples.empty()) throw std::invalid_argument("bench_inputs: no samples");
  std::vector<BenchInput> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Sample& s = samples[i % samples.size()];
    out.push_back({s.x0, s.params});
  }
  return out;
}

namespace {
volatile double g_sink = 0.0;
}

TimingResult bench_mpc(const OcpConfig& cfg, const std::vector<BenchInput>& inputs,
                       int repeats, int warmup) {
  OcpSolver solver(cfg);
  return benchmark_time(
      "mpc", TimingMode::kPlanning, inputs.size(),
      [&](std::size_t i) { g_sink = solver.solve(inputs[i].x0, inputs[i].params).u0(); },
      repeats, warmup);
}

TimingResult bench_network(const NetworkParams& net, const std::vector<BenchInput>& inputs,
                           TimingMode mode, int repeats, int warmup, const std::string& name) {
  if (net.arch == Arch::kBc && mode == TimingMode::kPlanning)
    throw ConfigError("bench: the bc architecture has no planning mode");
  const PolicyModel<float> model(net);
  const int steps = mode == TimingMode::kPolicy ? 1 : net.horizon;
  Eigen::MatrixXf X, U;
  return benchmark_time(
      name, mode, inputs.size(),
      [&](std::size_t i) {
        model.plan(inputs[i].x0, inputs[i].params, steps, X, U);
        g_sink = U(0, 0);
      },
      repeats, warmup);
}

TimingResult bench_quant(const QuantModel& q, const std::vector<BenchInput>& inputs,
                         TimingMode mode, int repeats, int warmup, const std::string& name) {
  if (q.base.arch == Arch::kBc && mode == TimingMode::kPlanning)
    throw ConfigError("bench: the bc architecture has no planning mode");
  const PolicyModel<float> model(q.base);
  const int steps = mode == TimingMode::kPolicy ? 1 : q.base.horizon;
  Eigen::MatrixXf X, U;
  const auto fwd = [&q](const Eigen::MatrixXf& in) { return q.forward(in); };
  return benchmark_time(
      name, mode, inputs.size(),
      [&](std::size_t i) {
        model.plan_with(fwd, inputs[i].x0, inputs[i].params, steps, X, U);
        g_sink = U(0, 0);
      },
      repeats, warmup);
}

std::string timing_json(const TimingResult& r) {
  return nlohmann::json{{"target", r.target},
                        {"mode", to_string(r.mode)},
                        {"inputs", r.per_input_ms.size()},
                        {"repeats", r.repeats},
                        {"p95_ms", r.p95_ms},
                        {"median_ms", r.median_ms},
                        {"min_ms", r.min_ms},
                        {"max_ms", r.max_ms},
                        {"statistic", "per-input minimum over repeats, 95% quantile across inputs"},
                        {"machine",
                         {{"cpu", r.machine.cpu},
                          {"compiler", r.machine.compiler},
                          {"simd", r.machine.simd},
                          {"hardware_threads", r.machine.hardware_threads},
                          {"pinned", r.machine.pinned}}}}
      .dump(1);
}

std::string timing_csv(const TimingResult& r) {
  std::string out = "input,min_ms\n";
  char buf[64];
  for (std::size_t i = 0; i < r.per_input_ms.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.9g\n", i, r.per_input_ms[i]);
    out += buf;
  }
  return out;
}

}  // namespace plannetx
