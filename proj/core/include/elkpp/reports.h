/* Copyright 2026 The elkpp Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#pragma once

#include <string>
#include <vector>

#include "elkpp/lkpp.h"
#include "elkpp/receptive_field.h"
#include "elkpp/segnet.h"

namespace elkpp {

struct ChainVerdict {
  std::string label;
  Footprint footprint;
  bool gridding = false;
};

// Text reports shared by the CLI and the acceptance suite.
std::vector<ChainVerdict> lkpp_block_verdicts(const LkppConfig& cfg);
std::string rf_report(const LkppConfig& cfg, bool ascii = false);

std::vector<ChainVerdict> gridding_demo();
std::string gridding_report(bool ascii = false);

struct FactorizationCount {
  int k = 5;
  std::size_t square = 0;      // k x k
  std::size_t factorized = 0;  // k x 1 followed by 1 x k
  double reduction = 0;        // 1 - factorized / square
};

FactorizationCount factorization_count(int k);
std::string param_report(int k, const ModelConfig& model);

}  // namespace elkpp
