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

#include "plannetx/dataset_io.hpp"

#include <bit>
#include <cstring>

#include "config_json.hpp"
#include "weights_json.hpp"

namespace plannetx {

static_assert(std::endian::native == std::endian::little, "little-endian host required");

namespace {

constexpr char kMagic[4] = {'P', 'N', 'X', 'D'};

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::string& b) : b_(b) {}
  template <typename T>
  T get() {
    if (pos_ + sizeof(T) > b_.size()) throw ConfigError("dataset: truncated file");
    T v;
    std::memcpy(&v, b_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string bytes(size_t n) {
    if (pos_ + n > b_.size()) throw ConfigError("dataset: truncated file");
    std::string s = b_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == b_.size(); }

 private:
  const std::string& b_;
  size_t pos_ = 0;
};

size_t record_doubles(int n) { return 4 + 3 * (n + 1) + 3 + 4 * (n + 1) + n + 5; }

}  // namespace

std::string serialize_dataset(const Dataset& d) {
  const int n = d.ocp.horizon;
  detail::json h = {{"format", "plannetx-dataset"},
                    {"ocp", detail::to_json(d.ocp)},
                    {"sampling", detail::to_json(d.sampling)},
                    {"seed", d.seed},
                    {"count", d.samples.size()},
                    {"record_f64", record_doubles(n)},
                    {"stats",
                     {{"attempts", d.stats.attempts},
                      {"rejected_crash", d.stats.rejected_crash},
                      {"rejected_solver", d.stats.rejected_solver},
                      {"speed_changes", d.stats.speed_changes},
                      {"cut_ins", d.stats.cut_ins}}}};
  const std::string header = h.dump();
  std::string out(kMagic, 4);
  put<std::uint32_t>(out, kDatasetFormatVersion);
  put<std::uint64_t>(out, header.size());
  out += header;
  put<std::uint64_t>(out, d.samples.size());
  for (const auto& s : d.samples) {
    if (static_cast<int>(s.params.lead.size()) != n + 1 || s.X_star.cols() != n + 1 ||
        s.U_star.size() != n)
      throw ContractViolation("serialize_dataset: sample horizon mismatch");
    for (int i = 0; i < 4; ++i) put(out, s.x0(i));
    for (const auto& l : s.params.lead) {
      put(out, l.s);
      put(out, l.v);
      put(out, l.a);
    }
    put(out, s.params.v_max1);
    put(out, s.params.v_max2);
    put(out, s.params.s_change);
    for (int k = 0; k <= n; ++k)
      for (int i = 0; i < 4; ++i) put(out, s.X_star(i, k));
    for (int k = 0; k < n; ++k) put(out, s.U_star(k));
    put(out, s.kkt);
    put(out, s.max_dist_slack);
    put(out, static_cast<double>(s.speed_change));
    put(out, static_cast<double>(s.cut_in_stage));
    put(out, static_cast<double>(static_cast<int>(s.status)));
  }
  return out;
}

Dataset deserialize_dataset(const std::string& bytes) {
  Reader r(bytes);
  if (r.bytes(4) != std::string(kMagic, 4)) throw ConfigError("dataset: bad magic");
  const auto version = r.get<std::uint32_t>();
  if (version != kDatasetFormatVersion)
    throw ConfigError("dataset: format version " + std::to_string(version) + " not supported");
  const auto hlen = r.get<std::uint64_t>();
  Dataset d;
  std::uint64_t count = 0;
  try {
    const auto h = detail::json::parse(r.bytes(hlen));
    d.ocp = detail::ocp_from_json(h.at("ocp"));
    d.sampling = detail::sampling_from_json(h.at("sampling"));
    d.seed = h.at("seed").get<std::uint64_t>();
    count = h.at("count").get<std::uint64_t>();
    if (h.at("record_f64").get<size_t>() != record_doubles(d.ocp.horizon))
      throw ConfigError("dataset: record layout does not match horizon");
    const auto& st = h.at("stats");
    d.stats.attempts = st.at("attempts");
    d.stats.rejected_crash = st.at("rejected_crash");
    d.stats.rejected_solver = st.at("rejected_solver");
    d.stats.speed_changes = st.at("speed_changes");
    d.stats.cut_ins = st.at("cut_ins");
  } catch (const detail::json::exception& e) {
    throw ConfigError(std::string("dataset: malformed header: ") + e.what());
  }
  if (r.get<std::uint64_t>() != count) throw ConfigError("dataset: record count mismatch");
  const int n = d.ocp.horizon;
  d.samples.resize(count);
  for (auto& s : d.samples) {
    for (int i = 0; i < 4; ++i) s.x0(i) = r.get<double>();
    s.params.lead.resize(static_cast<size_t>(n + 1));
    for (auto& l : s.params.lead) {
      l.s = r.get<double>();
      l.v = r.get<double>();
      l.a = r.get<double>();
    }
    s.params.v_max1 = r.get<double>();
    s.params.v_max2 = r.get<double>();
    s.params.s_change = r.get<double>();
    s.X_star.resize(4, n + 1);
    for (int k = 0; k <= n; ++k)
      for (int i = 0; i < 4; ++i) s.X_star(i, k) = r.get<double>();
    s.U_star.resize(n);
    for (int k = 0; k < n; ++k) s.U_star(k) = r.get<double>();
    s.kkt = r.get<double>();
    s.max_dist_slack = r.get<double>();
    s.speed_change = r.get<double>() != 0.0;
    s.cut_in_stage = static_cast<int>(r.get<double>());
    s.status = static_cast<SolveStatus>(static_cast<int>(r.get<double>()));
  }
  if (!r.done()) throw ConfigError("dataset: trailing bytes");
  return d;
}

void save_dataset(const Dataset& d, const std::string& path) {
  detail::write_file(path, serialize_dataset(d));
}

void check_ocp_compatible(const OcpConfig& stored, const OcpConfig& expected) {
  if (stored == expected) return;
  throw ConfigError("dataset was generated with a different OCP configuration:\n" +
                    detail::json_diff(detail::to_json(stored), detail::to_json(expected)));
}

Dataset load_dataset(const std::string& path, const OcpConfig* expected) {
  Dataset d = deserialize_dataset(detail::read_file(path));
  if (expected) check_ocp_compatible(d.ocp, *expected);
  return d;
}

}  // namespace plannetx
