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
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "elkpp/nn.h"

namespace elkpp {

// One stride-1 convolution layer of a chain under footprint analysis.
struct LayerDesc {
  int kernel_h = 1;
  int kernel_w = 1;
  int rate_h = 1;
  int rate_w = 1;
};

struct LayerChainSpec {
  std::vector<LayerDesc> layers;

  void validate() const;
  // k x k layers with the given dilation rates.
  static LayerChainSpec square(int k, std::span<const int> rates);
};

// Set of input offsets (dy, dx) that influence one output pixel. Offsets use
// the same-zero placement of dilated_conv2d, so odd kernels are centered.
class Footprint {
 public:
  Footprint() = default;

  static Footprint point();
  static Footprint from_offsets(std::span<const std::pair<int, int>> offsets);

  bool contains(int dy, int dx) const;
  std::size_t count() const { return cells_.size(); }
  const std::vector<std::pair<int, int>>& cells() const { return cells_; }

  int min_dy() const;
  int max_dy() const;
  int min_dx() const;
  int max_dx() const;
  int height() const { return cells_.empty() ? 0 : max_dy() - min_dy() + 1; }
  int width() const { return cells_.empty() ? 0 : max_dx() - min_dx() + 1; }

  // Unset cells strictly inside the bounding box.
  std::size_t holes() const;
  bool symmetric_under_rotation() const;

  // Row-major bounding-box mask: 1 where set.
  std::vector<std::uint8_t> mask() const;
  std::string to_ascii() const;

  friend bool operator==(const Footprint& a, const Footprint& b) {
    return a.cells_ == b.cells_;
  }

 private:
  explicit Footprint(std::vector<std::pair<int, int>> cells);

  std::vector<std::pair<int, int>> cells_;  // sorted, unique
};

Footprint layer_footprint(const LayerDesc& layer);
Footprint minkowski_sum(const Footprint& a, const Footprint& b);
Footprint footprint_union(const Footprint& a, const Footprint& b);

// Exact dependency set of one output of the chain, by propagating a mask from
// the last layer back to the input, one dilated-kernel stamp per layer.
Footprint footprint_oracle(const LayerChainSpec& chain);

bool has_gridding(const Footprint& footprint);
bool has_gridding(const LayerChainSpec& chain);

struct NonzeroDistance {
  std::vector<int> distances;  // M_1 .. M_N
  int m2 = 0;                  // M_2 (M_1 for a single layer)
  bool covers = false;         // M_2 <= k
};

// M_N = r_N, M_i = max(|M_{i+1} - 2 r_i|, r_i), evaluated backward.
NonzeroDistance max_nonzero_distance(std::span<const int> rates, int k);

// Sum of out * in * kh * kw (+ out when biased).
std::size_t param_count(std::span<const ConvSpec> specs);

// Asymmetric pair rule: min(k1, k2) >= 2, k1 != k2 and max(k1, k2) > 3.
// `allow_square_3x3` admits the 3x3 pyramid stage.
bool hadc_pair_valid(int k1, int k2, bool allow_square_3x3 = false);

}  // namespace elkpp
