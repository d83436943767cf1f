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
#include <string>

#include "elkpp/autodiff.h"

namespace elkpp {

// base_lr * (1 - iter/total)^power, clamped to [0, total].
double poly_lr(std::int64_t iter, std::int64_t total, double base_lr,
               double power = 0.9);

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

template <typename T>
struct AdamState {
  std::uint64_t step = 0;
  std::map<std::string, Tensor<T>> m;
  std::map<std::string, Tensor<T>> v;
};

// One bias-corrected update of every non-frozen parameter from its grad.
template <typename T>
void adam_step(ParameterStore<T>& store, AdamState<T>& state, double lr,
               const AdamOptions& options = {});

}  // namespace elkpp
