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

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "elkpp/edge_loss.h"
#include "elkpp/segnet.h"

namespace elkpp {

struct GradcheckEntry {
  std::string name;
  std::size_t elements = 0;
  double rel_error = 0;  // ||analytic - numeric|| / max(||analytic||, ||numeric||)
  double max_abs_error = 0;
  bool skipped = false;
};

struct GradcheckReport {
  std::vector<GradcheckEntry> entries;
  std::map<std::string, double> module_max;  // first name component -> max error
  double max_rel_error = 0;
  double tolerance = 0;
  double seconds = 0;
  bool passed = false;
  std::string worst;
};

struct GradcheckOptions {
  std::uint64_t seed = 7;
  // 0 picks 1e-5 for the loss-only path and 1e-7 for the model. The
  // untrained model's edge maps sit near the kink of the norm, where a
  // coarse step is dominated by curvature.
  double step = 0;
  double tolerance = 1e-3;
  EdgeLossParams loss;
  std::set<std::string> frozen;
};

// Smallest model of the default topology used by the full-model check.
ModelConfig tiny_model_config();

// Logits 2x4x8x8 as leaves; gradient of the full edge-aware loss.
GradcheckReport gradcheck_loss_only(GradcheckOptions options);

// Every parameter of the tiny model, batch 2 at 64x64, training-mode BN.
GradcheckReport gradcheck_model(GradcheckOptions options,
                                const ModelConfig& model = tiny_model_config());

std::string format_gradcheck(const GradcheckReport& report);

}  // namespace elkpp
