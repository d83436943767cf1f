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
#include "elkpp/metrics.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "elkpp/error.h"

namespace elkpp {

ConfusionMatrix::ConfusionMatrix(int num_classes) : n_(num_classes) {
  if (num_classes < 1 || num_classes > 255) {
    throw DomainError("confusion matrix: class count must be in [1, 255]");
  }
  counts_.assign(static_cast<std::size_t>(n_) * n_, 0);
}

std::uint64_t ConfusionMatrix::count(int truth, int pred) const {
  return counts_.at(static_cast<std::size_t>(truth) * n_ + pred);
}

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t s = 0;
  for (auto c : counts_) s += c;
  return s;
}

std::uint64_t ConfusionMatrix::row_total(int truth) const {
  std::uint64_t s = 0;
  for (int p = 0; p < n_; ++p) s += count(truth, p);
  return s;
}

std::uint64_t ConfusionMatrix::col_total(int pred) const {
  std::uint64_t s = 0;
  for (int t = 0; t < n_; ++t) s += count(t, pred);
  return s;
}

void ConfusionMatrix::add(int truth, int pred, std::uint64_t n) {
  if (truth < 0 || truth >= n_ || pred < 0 || pred >= n_) {
    throw DomainError("confusion matrix: class index out of range");
  }
  counts_[static_cast<std::size_t>(truth) * n_ + pred] += n;
}

void ConfusionMatrix::update(std::span<const std::uint8_t> predictions,
                             std::span<const std::uint8_t> labels) {
  if (predictions.size() != labels.size()) {
    throw ShapeError("confusion matrix: prediction and label sizes differ");
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (predictions[i] >= n_) {
      throw DomainError("confusion matrix: predicted class " +
                        std::to_string(predictions[i]) + " at pixel " +
                        std::to_string(i) + " out of range");
    }
    if (labels[i] == kVoidLabel) continue;
    if (labels[i] >= n_) {
      throw DomainError("confusion matrix: label " + std::to_string(labels[i]) +
                        " at pixel " + std::to_string(i) + " out of range");
    }
    ++counts_[static_cast<std::size_t>(labels[i]) * n_ + predictions[i]];
  }
}

void ConfusionMatrix::update(const LabelBatch& predictions,
                             const LabelBatch& labels) {
  if (predictions.batch != labels.batch || predictions.height != labels.height ||
      predictions.width != labels.width) {
    throw ShapeError("confusion matrix: prediction and label extents differ");
  }
  update(std::span<const std::uint8_t>(predictions.values),
         std::span<const std::uint8_t>(labels.values));
}

ConfusionMatrix& ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.n_ != n_) throw ShapeError("confusion matrix: class counts differ");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  return *this;
}

double pixel_acc(const ConfusionMatrix& cm) {
  const std::uint64_t total = cm.total();
  if (total == 0) return kUndefined;
  std::uint64_t diag = 0;
  for (int k = 0; k < cm.num_classes(); ++k) diag += cm.count(k, k);
  return static_cast<double>(diag) / static_cast<double>(total);
}

double mean_class_acc(const ConfusionMatrix& cm) {
  double sum = 0;
  int present = 0;
  for (int k = 0; k < cm.num_classes(); ++k) {
    const std::uint64_t row = cm.row_total(k);
    if (row == 0) continue;
    sum += static_cast<double>(cm.count(k, k)) / static_cast<double>(row);
    ++present;
  }
  return present ? sum / present : kUndefined;
}

std::vector<double> per_class_iou(const ConfusionMatrix& cm) {
  std::vector<double> out(cm.num_classes(), kUndefined);
  for (int k = 0; k < cm.num_classes(); ++k) {
    const std::uint64_t tp = cm.count(k, k);
    const std::uint64_t uni = cm.row_total(k) + cm.col_total(k) - tp;
    if (uni > 0) out[k] = static_cast<double>(tp) / static_cast<double>(uni);
  }
  return out;
}

double miou(const ConfusionMatrix& cm) {
  double sum = 0;
  int present = 0;
  for (double v : per_class_iou(cm)) {
    if (std::isnan(v)) continue;
    sum += v;
    ++present;
  }
  return present ? sum / present : kUndefined;
}

double fwiou(const ConfusionMatrix& cm) {
  const std::vector<double> iou = per_class_iou(cm);
  double num = 0, den = 0;
  for (int k = 0; k < cm.num_classes(); ++k) {
    const auto freq = static_cast<double>(cm.row_total(k));
    if (freq == 0) continue;
    num += freq * iou[k];
    den += freq;
  }
  return den > 0 ? num / den : kUndefined;
}

std::vector<std::uint8_t> label_edges(const LabelBatch& labels,
                                      const LabelBatch& mask_source) {
  const std::size_t h = labels.height, w = labels.width;
  std::vector<std::uint8_t> edges(labels.values.size(), 0);
  auto usable = [&](std::size_t i) {
    return labels.values[i] != kVoidLabel && mask_source.values[i] != kVoidLabel;
  };
  for (std::size_t n = 0; n < labels.batch; ++n) {
    const std::size_t base = n * h * w;
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        const std::size_t i = base + y * w + x;
        if (!usable(i)) continue;
        const std::uint8_t v = labels.values[i];
        auto differs = [&](std::size_t j) {
          return usable(j) && labels.values[j] != v;
        };
        if ((y > 0 && differs(i - w)) || (y + 1 < h && differs(i + w)) ||
            (x > 0 && differs(i - 1)) || (x + 1 < w && differs(i + 1))) {
          edges[i] = 1;
        }
      }
    }
  }
  return edges;
}

BoundaryScore boundary_agreement(const LabelBatch& predictions,
                                 const LabelBatch& labels, int tolerance) {
  if (predictions.batch != labels.batch || predictions.height != labels.height ||
      predictions.width != labels.width) {
    throw ShapeError("boundary agreement: extents differ");
  }
  if (tolerance < 0) throw DomainError("boundary agreement: negative tolerance");
  const std::vector<std::uint8_t> pred_edges = label_edges(predictions, labels);
  const std::vector<std::uint8_t> ref_edges = label_edges(labels, labels);
  const auto h = static_cast<std::ptrdiff_t>(labels.height);
  const auto w = static_cast<std::ptrdiff_t>(labels.width);
  BoundaryScore out;
  for (std::size_t n = 0; n < labels.batch; ++n) {
    const std::size_t base = n * labels.plane();
    for (std::ptrdiff_t y = 0; y < h; ++y) {
      for (std::ptrdiff_t x = 0; x < w; ++x) {
        if (!pred_edges[base + y * w + x]) continue;
        ++out.predicted_edges;
        bool hit = false;
        for (std::ptrdiff_t v = std::max<std::ptrdiff_t>(0, y - tolerance);
             !hit && v <= std::min(h - 1, y + tolerance); ++v) {
          for (std::ptrdiff_t u = std::max<std::ptrdiff_t>(0, x - tolerance);
               u <= std::min(w - 1, x + tolerance); ++u) {
            if (ref_edges[base + v * w + u]) {
              hit = true;
              break;
            }
          }
        }
        if (hit) ++out.matched;
      }
    }
  }
  if (out.predicted_edges > 0) {
    out.score = static_cast<double>(out.matched) /
                static_cast<double>(out.predicted_edges);
  }
  return out;
}

}  // namespace elkpp
