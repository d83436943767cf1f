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

#include <span>

#include "elkpp/autodiff.h"
#include "elkpp/labels.h"
#include "elkpp/tensor.h"

namespace elkpp {

struct EdgeLossParams {
  int k = 1;               // Laplacian template scale (3k x 3k kernel)
  double alpha = 1.0;      // squash sensitivity
  double gamma = 1.0;      // positive-class weight
  double lambda1 = 0.5;    // edge term weight
  double lambda2 = 5e-4;   // parameter decay weight
  double epsilon = 1e-7;   // probability clip before every logarithm
  // Divide l_seg and l_edge by their valid-pixel counts.
  bool normalize_losses = true;
  // Fill the template blocks with ones instead of identity matrices.
  bool all_ones_blocks = false;
  // Regularizer sum(theta^2); false selects the unsquared l2 norm.
  bool squared_regularizer = true;

  void validate() const;
};

// 3k x 3k block template: I_k in the eight outer blocks, -8 I_k at the
// center (or all-ones / -8 all-ones blocks). Entries sum to zero.
template <typename T>
Tensor<T> laplacian_template(int k, bool all_ones_blocks = false);

// Depthwise Laplacian of every channel with replicate padding.
template <typename T>
Var<T> gradient_map(const Var<T>& prob_map, int k, bool all_ones_blocks = false);

// Per pixel ||g|| / (||g|| + alpha) over the channel vector: N x 1 x H x W.
template <typename T>
Var<T> squash(const Var<T>& gradient_map, T alpha);

// Binary edge labels and the mask of pixels that take part in the edge loss
// (0 within ceil(3k/2) Chebyshev distance of void).
template <typename T>
struct EdgeTargets {
  Tensor<T> edges;  // N x 1 x H x W in {0, 1}
  Tensor<T> valid;  // N x 1 x H x W in {0, 1}
  std::size_t positives = 0;
  std::size_t negatives = 0;
};

template <typename T>
EdgeTargets<T> edge_labels(const LabelBatch& labels, int num_classes,
                           const EdgeLossParams& params);

template <typename T>
struct LossTerm {
  Var<T> value;
  bool empty = false;  // no contributing pixels; value is 0
};

// Softmax cross-entropy over non-void pixels.
template <typename T>
LossTerm<T> ce_loss(const Var<T>& logits, const LabelBatch& labels,
                    const EdgeLossParams& params);

// Class-balanced binary cross-entropy between predicted edge probabilities
// (N x 1 x H x W) and targets; beta = |negatives| / |valid| over the batch.
template <typename T>
LossTerm<T> edge_bce(const Var<T>& edge_prob, const EdgeTargets<T>& targets,
                     const EdgeLossParams& params);

template <typename T>
Var<T> parameter_regularizer(Tape<T>& tape, std::span<const Var<T>> params,
                             bool squared);

template <typename T>
struct EceTerms {
  Var<T> total;
  Var<T> seg;
  Var<T> edge;
  Var<T> reg;
  Var<T> edge_prob;  // predicted edge map, for inspection
  bool seg_empty = false;
  bool edge_empty = false;
};

// l_seg + lambda1 * l_edge + lambda2 * R(theta); the edge path runs on the
// per-class sigmoid of the logits.
template <typename T>
EceTerms<T> ece_loss(const Var<T>& logits, const LabelBatch& labels,
                     const EdgeLossParams& params, std::span<const Var<T>> params_on_tape);

}  // namespace elkpp
