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
#include "elkpp/layers.h"

#include <cmath>

#include "elkpp/error.h"

namespace elkpp {

template <typename T>
template <typename U>
ModelState<U> ModelState<T>::cast() const {
  ModelState<U> out;
  for (const auto& [name, p] : params.entries()) {
    out.params.add(name, p.value.template cast<U>());
    out.params.set_frozen(name, p.frozen);
  }
  for (const auto& [name, s] : bn_stats) {
    out.bn_stats[name] = {s.mean.template cast<U>(), s.var.template cast<U>()};
  }
  return out;
}

template <typename T>
RunningStats<T>& Context<T>::stats(const std::string& name) {
  auto it = state_.bn_stats.find(name);
  if (it == state_.bn_stats.end()) {
    throw Error("unknown batch-norm statistics '" + name + "'");
  }
  return it->second;
}

template <typename T>
void Conv2d::init(ModelState<T>& state, Rng& rng) const {
  spec.validate();
  const double fan_in =
      static_cast<double>(spec.in_channels) * spec.kernel_h * spec.kernel_w;
  std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
  Tensor<T> w(spec.weight_shape());
  for (T& v : w.values()) v = static_cast<T>(dist(rng));
  state.params.add(name + ".weight", std::move(w));
  if (spec.has_bias) {
    state.params.add(name + ".bias",
                     Tensor<T>(Shape{static_cast<std::size_t>(spec.out_channels)}));
  }
}

template <typename T>
Var<T> Conv2d::forward(Context<T>& ctx, const Var<T>& x) const {
  Var<T> w = ctx.param(name + ".weight");
  Var<T> b = spec.has_bias ? ctx.param(name + ".bias") : Var<T>{};
  return dilated_conv2d(x, spec, w, b);
}

template <typename T>
void BatchNorm::init(ModelState<T>& state) const {
  const auto c = static_cast<std::size_t>(channels);
  state.params.add(name + ".scale", Tensor<T>(Shape{c}, T(1)));
  state.params.add(name + ".shift", Tensor<T>(Shape{c}, T(0)));
  state.bn_stats[name] = RunningStats<T>::neutral(c);
}

template <typename T>
Var<T> BatchNorm::forward(Context<T>& ctx, const Var<T>& x) const {
  return batch_norm(x, ctx.param(name + ".scale"), ctx.param(name + ".shift"),
                    ctx.stats(name), ctx.training(), ctx.bn_options());
}

ConvBnRelu::ConvBnRelu(std::string name, ConvSpec spec, bool with_relu)
    : conv{name + ".conv", spec},
      bn{name + ".bn", spec.out_channels},
      relu(with_relu) {
  conv.spec.has_bias = false;
}

template <typename T>
void ConvBnRelu::init(ModelState<T>& state, Rng& rng) const {
  conv.init(state, rng);
  bn.init(state);
}

template <typename T>
Var<T> ConvBnRelu::forward(Context<T>& ctx, const Var<T>& x) const {
  Var<T> y = bn.forward(ctx, conv.forward(ctx, x));
  return relu ? elkpp::relu(y) : y;
}

#define ELKPP_INSTANTIATE(T)                                             \
  template class Context<T>;                                             \
  template void Conv2d::init(ModelState<T>&, Rng&) const;                \
  template Var<T> Conv2d::forward(Context<T>&, const Var<T>&) const;     \
  template void BatchNorm::init(ModelState<T>&) const;                   \
  template Var<T> BatchNorm::forward(Context<T>&, const Var<T>&) const;  \
  template void ConvBnRelu::init(ModelState<T>&, Rng&) const;            \
  template Var<T> ConvBnRelu::forward(Context<T>&, const Var<T>&) const;

ELKPP_INSTANTIATE(float)
ELKPP_INSTANTIATE(double)
#undef ELKPP_INSTANTIATE

template ModelState<double> ModelState<float>::cast<double>() const;
template ModelState<float> ModelState<double>::cast<float>() const;
template ModelState<float> ModelState<float>::cast<float>() const;
template ModelState<double> ModelState<double>::cast<double>() const;

}  // namespace elkpp
