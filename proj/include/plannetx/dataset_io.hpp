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
#include <string>

#include "plannetx/training.hpp"

namespace plannetx {

// Binary container: "PNXD", u32 version, u64 header length, JSON header
// (OCP and sampling config, seed, counts), u64 record count, then one
// fixed-size little-endian f64 record per sample.
inline constexpr std::uint32_t kDatasetFormatVersion = 1;

std::string serialize_dataset(const Dataset& d);
Dataset deserialize_dataset(const std::string& bytes);

void save_dataset(const Dataset& d, const std::string& path);
// With `expected` set, refuses a file generated under a different OCP
// configuration and lists the differing fields.
Dataset load_dataset(const std::string& path, const OcpConfig* expected = nullptr);

void check_ocp_compatible(const OcpConfig& stored, const OcpConfig& expected);

}  // namespace plannetx
