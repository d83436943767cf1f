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
#include <string>
#include <vector>

#include "elkpp/layers.h"
#include "elkpp/receptive_field.h"

namespace elkpp {

enum class HadcMode { kCascade, kParallel };

const char* hadc_mode_name(HadcMode mode);
HadcMode parse_hadc_mode(const std::string& name);

// A k1 x k2 convolution paired with its k2 x k1 transpose. The dilation rate
// applies along the longer axis of each kernel only; a square pair is one
// convolution dilated on both axes.
struct HadcPairSpec {
  int k1 = 3;
  int k2 = 3;
  int rate = 1;

  bool is_square() const { return k1 == k2; }
  // Kernel geometry of the (one or two) convolutions realizing the pair.
  std::vector<LayerDesc> layers() const;
};

struct HadcBlockSpec {
  std::array<HadcPairSpec, 3> pairs;
  HadcMode mode = HadcMode::kCascade;
  int width = 32;

  // Pairs (k1, k2) at rates 1, 2, 3.
  static HadcBlockSpec make(int k1, int k2, HadcMode mode, int width);
  void validate() const;
};

// Stride-1 layer chain whose footprint equals a cascade block's.
LayerChainSpec cascade_equivalent_chain(const HadcBlockSpec& block);

// Footprint of a block in either mode: parallel pairs contribute the union of
// their two kernels, pairs compose by Minkowski sum.
Footprint hadc_block_footprint(const HadcBlockSpec& block);

struct LkppConfig {
  HadcMode mode = HadcMode::kCascade;
  std::array<std::array<int, 2>, 3> kernels{{{3, 3}, {3, 5}, {3, 7}}};
  std::array<int, 3> block_widths{32, 32, 32};
  int skip_width = 32;
  int global_width = 32;
  bool skip_branch = true;
  bool global_branch = true;

  HadcBlockSpec block(std::size_t i) const;
  int out_channels() const;
  void validate() const;
};

class HadcBlock {
 public:
  HadcBlock(std::string name, HadcBlockSpec spec, int in_channels);

  template <typename T>
  void init(ModelState<T>& state, Rng& rng) const;
  template <typename T>
  Var<T> forward(Context<T>& ctx, const Var<T>& x) const;

  std::vector<ConvSpec> conv_specs() const;
  const HadcBlockSpec& spec() const { return spec_; }

 private:
  struct Stage {
    // Cascade, or any square pair: `first` (+ `second`) as conv-BN-ReLU.
    ConvBnRelu first;
    ConvBnRelu second;
    bool has_second = false;
    // Parallel non-square pair: two bare convolutions summed, then BN-ReLU.
    Conv2d branch_a;
    Conv2d branch_b;
    BatchNorm merge_bn;
    bool parallel = false;
  };

  std::string name_;
  HadcBlockSpec spec_;
  std::vector<Stage> stages_;
};

// GAP -> 1x1 conv -> BN -> bilinear resize to the input extent.
class GlobalContextBranch {
 public:
  GlobalContextBranch(std::string name, int in_channels, int width);

  template <typename T>
  void init(ModelState<T>& state, Rng& rng) const;
  template <typename T>
  Var<T> forward(Context<T>& ctx, const Var<T>& x) const;

  ConvSpec conv_spec() const { return conv_.spec; }

 private:
  Conv2d conv_;
  BatchNorm bn_;
};

// Skip (1x1), three HADC blocks and the global-context branch, concatenated
// along channels in that order.
class Lkpp {
 public:
  Lkpp(std::string name, LkppConfig config, int in_channels);

  template <typename T>
  void init(ModelState<T>& state, Rng& rng) const;
  template <typename T>
  Var<T> forward(Context<T>& ctx, const Var<T>& x) const;
  template <typename T>
  std::vector<Var<T>> forward_branches(Context<T>& ctx, const Var<T>& x) const;

  const LkppConfig& config() const { return config_; }
  int out_channels() const { return config_.out_channels(); }
  std::vector<ConvSpec> conv_specs() const;
  const std::vector<HadcBlock>& blocks() const { return blocks_; }

 private:
  LkppConfig config_;
  int in_channels_;
  ConvBnRelu skip_;
  std::vector<HadcBlock> blocks_;
  GlobalContextBranch global_;
};

}  // namespace elkpp
