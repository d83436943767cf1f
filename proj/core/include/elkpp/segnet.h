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

#include <array>
#include <cstdint>
#include <vector>

#include "elkpp/layers.h"
#include "elkpp/lkpp.h"

namespace elkpp {

struct StageConfig {
  int blocks = 1;
  int channels = 16;
  int stride = 2;
};

// Stride-2 stem followed by four residual stages (1/4 .. 1/32 of the input).
struct BackboneConfig {
  int stem_channels = 16;
  std::array<StageConfig, 4> stages{{{1, 16, 2}, {1, 32, 2}, {1, 64, 2}, {1, 128, 2}}};

  void validate() const;
  int total_stride() const;
};

// Three fusion stages, deepest first; stage i consumes encoder stage 3 - i.
struct DecoderConfig {
  std::array<int, 3> widths{128, 64, 32};
  std::array<int, 3> transfer_widths{64, 32, 16};
  int head_channels = 16;

  void validate() const;
};

struct ModelConfig {
  int input_channels = 3;
  int num_classes = 4;
  BackboneConfig backbone;
  DecoderConfig decoder;
  LkppConfig lkpp;

  void validate() const;
};

// conv3x3(stride) -> BN -> ReLU -> conv3x3 -> BN, plus an identity or 1x1
// projection shortcut, then ReLU.
class ResidualBlock {
 public:
  ResidualBlock(std::string name, int in_channels, int out_channels, int stride);

  template <typename T>
  void init(ModelState<T>& state, Rng& rng) const;
  template <typename T>
  Var<T> forward(Context<T>& ctx, const Var<T>& x) const;
  std::vector<ConvSpec> conv_specs() const;

 private:
  ConvBnRelu conv1_;
  ConvBnRelu conv2_;
  ConvBnRelu projection_;
  bool has_projection_ = false;
};

// End-to-end network description. Stateless: parameters live in a
// ModelState produced by init().
class SegNet {
 public:
  explicit SegNet(ModelConfig config);

  const ModelConfig& config() const { return config_; }

  template <typename T>
  ModelState<T> init(std::uint64_t seed) const;

  // Stage features at 1/4, 1/8, 1/16, 1/32 of the input.
  template <typename T>
  std::array<Var<T>, 4> encode(Context<T>& ctx, const Var<T>& image) const;
  // 1x1 conv + BN + ReLU on encoder stage `stage` (0..2) for skip fusion.
  template <typename T>
  Var<T> transfer(Context<T>& ctx, std::size_t stage, const Var<T>& feature) const;
  template <typename T>
  Var<T> pyramid(Context<T>& ctx, const Var<T>& top) const;
  // `skips` are transferred features of stages 2, 1, 0 (deepest first).
  template <typename T>
  Var<T> decode(Context<T>& ctx, const Var<T>& lkpp_out,
                const std::array<Var<T>, 3>& skips, std::size_t out_h,
                std::size_t out_w) const;
  template <typename T>
  Var<T> classify(Context<T>& ctx, const Var<T>& decoded) const;

  // Image N x 3 x H x W -> logits N x C x H x W.
  template <typename T>
  Var<T> forward(Context<T>& ctx, const Var<T>& image) const;

  const Lkpp& lkpp() const { return lkpp_; }
  std::vector<ConvSpec> conv_specs() const;

 private:
  ModelConfig config_;
  ConvBnRelu stem_;
  std::array<std::vector<ResidualBlock>, 4> stages_;
  Lkpp lkpp_;
  std::array<ConvBnRelu, 3> transfer_;
  std::array<ConvBnRelu, 3> fuse_;
  ConvBnRelu head_conv_;
  Conv2d head_classifier_;
};

}  // namespace elkpp
