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
#include <limits>
#include <span>
#include <vector>

#include "elkpp/labels.h"

namespace elkpp {

// Returned by a metric whose denominator is empty.
inline constexpr double kUndefined = std::numeric_limits<double>::quiet_NaN();

// counts[t * n + p]: pixels of true class t predicted as p. Void never counted.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int num_classes);

  int num_classes() const { return n_; }
  std::uint64_t count(int truth, int pred) const;
  std::uint64_t total() const;
  std::uint64_t row_total(int truth) const;
  std::uint64_t col_total(int pred) const;

  void add(int truth, int pred, std::uint64_t n = 1);
  // labels may hold kVoidLabel; predictions must be < num_classes.
  void update(std::span<const std::uint8_t> predictions,
              std::span<const std::uint8_t> labels);
  void update(const LabelBatch& predictions, const LabelBatch& labels);
  ConfusionMatrix& merge(const ConfusionMatrix& other);

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  int n_;
  std::vector<std::uint64_t> counts_;
};

double pixel_acc(const ConfusionMatrix& cm);
double mean_class_acc(const ConfusionMatrix& cm);
// IoU per class; kUndefined where the union is empty.
std::vector<double> per_class_iou(const ConfusionMatrix& cm);
double miou(const ConfusionMatrix& cm);
double fwiou(const ConfusionMatrix& cm);

struct BoundaryScore {
  std::size_t predicted_edges = 0;
  std::size_t matched = 0;
  double score = kUndefined;  // matched / predicted_edges
};

// Edge pixel: a non-void pixel with a 4-neighbour of a different (non-void)
// label. Scores the predicted edge pixels lying within Chebyshev distance
// `tolerance` of a reference edge pixel.
BoundaryScore boundary_agreement(const LabelBatch& predictions,
                                 const LabelBatch& labels, int tolerance = 2);

// Binary edge mask of a label batch under the rule above, optionally
// ignoring positions where `mask_source` is void.
std::vector<std::uint8_t> label_edges(const LabelBatch& labels,
                                      const LabelBatch& mask_source);

}  // namespace elkpp
