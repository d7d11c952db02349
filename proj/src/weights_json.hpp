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

#include <string>

#include <json.hpp>

#include "plannetx/nn.hpp"

namespace plannetx::detail {

using nlohmann::json;

json tensor_to_json(const Eigen::MatrixXd& m);
json tensor_to_json(const Eigen::VectorXd& v);
Eigen::MatrixXd matrix_from_json(const json& j, const std::string& what);
Eigen::VectorXd vector_from_json(const json& j, const std::string& what);

json weights_to_json(const NetworkParams& p);
NetworkParams weights_from_json(const json& j);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& text);

}  // namespace plannetx::detail
