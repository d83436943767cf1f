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
#include "elkpp/optim.h"

#include <cmath>

#include "elkpp/error.h"

namespace elkpp {

double poly_lr(std::int64_t iter, std::int64_t total, double base_lr,
               double power) {
  if (total <= 0) throw DomainError("poly_lr: total must be > 0");
  if (iter < 0 || iter > total) throw DomainError("poly_lr: iter outside [0, total]");
  return base_lr * std::pow(1.0 - static_cast<double>(iter) / static_cast<double>(total),
                            power);
}

template <typename T>
void adam_step(ParameterStore<T>& store, AdamState<T>& state, double lr,
               const AdamOptions& options) {
  ++state.step;
  const auto t = static_cast<double>(state.step);
  const T b1 = static_cast<T>(options.beta1);
  const T b2 = static_cast<T>(options.beta2);
  const T c1 = static_cast<T>(1.0 - std::pow(options.beta1, t));
  const T c2 = static_cast<T>(1.0 - std::pow(options.beta2, t));
  const T eps = static_cast<T>(options.epsilon);
  const T step = static_cast<T>(lr);
  for (auto& [name, p] : store.entries()) {
    if (p.frozen) continue;
    auto [mit, m_new] = state.m.try_emplace(name, Tensor<T>::zeros_like(p.value));
    auto [vit, v_new] = state.v.try_emplace(name, Tensor<T>::zeros_like(p.value));
    Tensor<T>& m = mit->second;
    Tensor<T>& v = vit->second;
    if (m.shape() != p.value.shape() || v.shape() != p.value.shape()) {
      throw ShapeError("adam: moment shape differs for " + name);
    }
    if (p.grad.shape() != p.value.shape()) {
      throw ShapeError("adam: gradient missing or misshaped for " + name);
    }
    for (std::size_t i = 0; i < p.value.numel(); ++i) {
      const T g = p.grad[i];
      m[i] = b1 * m[i] + (T(1) - b1) * g;
      v[i] = b2 * v[i] + (T(1) - b2) * g * g;
      const T mhat = m[i] / c1;
      const T vhat = v[i] / c2;
      p.value[i] -= step * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

template void adam_step(ParameterStore<float>&, AdamState<float>&, double,
                        const AdamOptions&);
template void adam_step(ParameterStore<double>&, AdamState<double>&, double,
                        const AdamOptions&);

}  // namespace elkpp
