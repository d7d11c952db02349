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

#include <ostream>
#include <string>
#include <vector>

#include "plannetx/config.hpp"

namespace plannetx {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;
};

struct ReproReport {
  std::vector<CriterionResult> criteria;
  std::string dir;
};

std::string format_criterion(const CriterionResult& c);

// Chains generate -> train (PlanNetX with L^x and L^u, PlanNetXEnc, BC; one
// run per seed) -> eval -> compress -> bench and checks the orderings the
// method predicts. Stages whose outputs already exist for the same
// configuration are reused. Writes report.json, report.md, table1.csv and
// table2.csv into `out`.
ReproReport run_repro(const RunConfig& cfg, const std::string& out, int workers,
                      std::ostream& log);

}  // namespace plannetx
