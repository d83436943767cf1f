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
#include <vector>

#include "elkpp/tensor.h"

namespace elkpp {

inline constexpr std::uint8_t kVoidLabel = 255;

// N x H x W class indices; kVoidLabel marks pixels excluded from losses and
// metrics.
struct LabelBatch {
  std::size_t batch = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> values;

  LabelBatch() = default;
  LabelBatch(std::size_t n, std::size_t h, std::size_t w, std::uint8_t fill = 0)
      : batch(n), height(h), width(w), values(n * h * w, fill) {}

  std::size_t plane() const { return height * width; }
  std::uint8_t& at(std::size_t n, std::size_t y, std::size_t x) {
    return values[(n * height + y) * width + x];
  }
  std::uint8_t at(std::size_t n, std::size_t y, std::size_t x) const {
    return values[(n * height + y) * width + x];
  }
  bool is_void(std::size_t i) const { return values[i] == kVoidLabel; }

  // Throws ShapeError unless every value is < num_classes or void.
  void validate(int num_classes) const;
};

// N x C x H x W indicator of the labeled class; all channels zero at void.
template <typename T>
Tensor<T> one_hot(const LabelBatch& labels, int num_classes);

}  // namespace elkpp
