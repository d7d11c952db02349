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

#include <array>
#include <set>
#include <string>

#include <json.hpp>

#include "plannetx/errors.hpp"
#include "plannetx/ocp.hpp"
#include "plannetx/training.hpp"

namespace plannetx::detail {

using nlohmann::json;

// Reads fields from an object and rejects keys nobody asked for.
class StrictReader {
 public:
  StrictReader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + ": expected an object");
  }
  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(where_ + "." + key + ": wrong type");
    }
  }
  bool has(const char* key) const { return j_.contains(key); }
  const json& sub(const char* key) {
    seen_.insert(key);
    return j_.at(key);
  }
  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) throw ConfigError(where_ + ": unknown key '" + k + "'");
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

json to_json(const OcpConfig& c);
OcpConfig ocp_from_json(const json& j);
json to_json(const SamplingConfig& c);
SamplingConfig sampling_from_json(const json& j);
json to_json(const LossConfig& c);
LossConfig loss_from_json(const json& j);
json to_json(const TrainConfig& c);
TrainConfig train_from_json(const json& j);
json to_json(const ArchConfig& c);
ArchConfig arch_from_json(const json& j);

// Keys whose values differ, for refusal messages.
std::string json_diff(const json& a, const json& b, const std::string& prefix = "");

}  // namespace plannetx::detail
