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
#include <random>
#include <string>

#include "elkpp/autodiff.h"
#include "elkpp/nn.h"

namespace elkpp {

// Trainable parameters plus the non-trainable batch-norm statistics.
template <typename T>
struct ModelState {
  ParameterStore<T> params;
  std::map<std::string, RunningStats<T>> bn_stats;

  template <typename U>
  ModelState<U> cast() const;
};

// Per-forward-pass view of a model: the tape and the state it binds to.
template <typename T>
class Context {
 public:
  Context(Tape<T>& tape, ModelState<T>& state, bool training,
          BatchNormOptions bn = {})
      : tape_(tape), state_(state), training_(training), bn_(bn) {}

  Tape<T>& tape() { return tape_; }
  ModelState<T>& state() { return state_; }
  bool training() const { return training_; }
  const BatchNormOptions& bn_options() const { return bn_; }

  Var<T> param(const std::string& name) {
    return tape_.parameter(state_.params, name);
  }
  RunningStats<T>& stats(const std::string& name);

 private:
  Tape<T>& tape_;
  ModelState<T>& state_;
  bool training_;
  BatchNormOptions bn_;
};

using Rng = std::mt19937_64;

// Convolution with Kaiming (fan-in) normal initialization and zero bias.
// Parameters: <name>.weight, <name>.bias.
struct Conv2d {
  std::string name;
  ConvSpec spec;

  template <typename T>
  void init(ModelState<T>& state, Rng& rng) const;
  template <typename T>
  Var<T> forward(Context<T>& ctx, const Var<T>& x) const;
};

// Parameters: <name>.scale (1), <name>.shift (0); statistics under <name>.
struct BatchNorm {
  std::string name;
  int channels = 1;

  template <typename T>
  void init(ModelState<T>& state) const;
  template <typename T>
  Var<T> forward(Context<T>& ctx, const Var<T>& x) const;
};

// conv -> batch norm -> optional ReLU; the convolution carries no bias.
struct ConvBnRelu {
  Conv2d conv;
  BatchNorm bn;
  bool relu = true;

  ConvBnRelu() = default;
  ConvBnRelu(std::string name, ConvSpec spec, bool with_relu = true);

  template <typename T>
  void init(ModelState<T>& state, Rng& rng) const;
  template <typename T>
  Var<T> forward(Context<T>& ctx, const Var<T>& x) const;
};

}  // namespace elkpp
