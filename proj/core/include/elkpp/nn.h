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

#include <cstddef>

#include "elkpp/autodiff.h"
#include "elkpp/tensor.h"

namespace elkpp {

enum class Padding { kSameZero, kValid };

struct ConvSpec {
  int kernel_h = 1;
  int kernel_w = 1;
  int rate_h = 1;
  int rate_w = 1;
  int stride = 1;
  int in_channels = 1;
  int out_channels = 1;
  bool has_bias = false;
  Padding padding = Padding::kSameZero;

  void validate() const;
  Shape weight_shape() const;
  std::size_t weight_count() const;
};

// Span covered by a k-tap kernel dilated by rate r: k + (k - 1)(r - 1).
int effective_kernel_extent(int k, int r);

struct ConvGeometry {
  std::size_t out_h = 0;
  std::size_t out_w = 0;
  // Offset of the first tap relative to (out * stride). Same-zero padding
  // splits the total pad with the smaller half on top/left.
  std::size_t pad_top = 0;
  std::size_t pad_left = 0;
};

ConvGeometry conv_geometry(const ConvSpec& spec, std::size_t in_h,
                           std::size_t in_w);

// Y[n, o, y, x] = sum_{c,i,j} X[n, c, y*s - pt + i*rate_h, x*s - pl + j*rate_w]
//                 * W[o, c, i, j] (+ b[o]), zero outside the input.
// `bias` may be an unbound Var when spec.has_bias is false.
template <typename T>
Var<T> dilated_conv2d(const Var<T>& input, const ConvSpec& spec,
                      const Var<T>& weights, const Var<T>& bias = {});

struct BatchNormOptions {
  double epsilon = 1e-5;
  double momentum = 0.9;
};

// Per-channel running statistics, updated in training mode as
// running = momentum * running + (1 - momentum) * batch (biased variance).
template <typename T>
struct RunningStats {
  Tensor<T> mean;
  Tensor<T> var;

  static RunningStats neutral(std::size_t channels) {
    return {Tensor<T>(Shape{channels}, T(0)), Tensor<T>(Shape{channels}, T(1))};
  }
};

template <typename T>
Var<T> batch_norm(const Var<T>& input, const Var<T>& scale, const Var<T>& shift,
                  RunningStats<T>& stats, bool training,
                  const BatchNormOptions& options = {});

// N x C x H x W -> N x C x 1 x 1 spatial mean.
template <typename T>
Var<T> global_avg_pool(const Var<T>& input);

// Half-pixel-center bilinear sampling: src = (dst + 0.5) * in / out - 0.5,
// clamped to the valid range.
template <typename T>
Var<T> bilinear_resize(const Var<T>& input, std::size_t out_h,
                       std::size_t out_w);

template <typename T>
Var<T> softmax(const Var<T>& logits, std::size_t axis);

template <typename T>
Var<T> sigmoid(const Var<T>& x);

// Depthwise correlation of every channel with one shared constant kernel,
// replicate-padded at the borders (edge extractor path only).
template <typename T>
Var<T> depthwise_conv2d_replicate(const Var<T>& input, const Tensor<T>& kernel);

// N x C x H x W -> N x 1 x H x W Euclidean norm across channels; gradient is
// zero where the norm vanishes.
template <typename T>
Var<T> channel_l2_norm(const Var<T>& input);

}  // namespace elkpp
