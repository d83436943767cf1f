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
#include "elkpp/edge_loss.h"

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

#include "elkpp/error.h"
#include "elkpp/nn.h"

namespace elkpp {

void LabelBatch::validate(int num_classes) const {
  if (values.size() != batch * height * width) {
    throw ShapeError("label batch size does not match its extents");
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] != kVoidLabel && values[i] >= num_classes) {
      throw ShapeError("label " + std::to_string(values[i]) + " at index " +
                       std::to_string(i) + " outside [0, " +
                       std::to_string(num_classes) + ")");
    }
  }
}

template <typename T>
Tensor<T> one_hot(const LabelBatch& labels, int num_classes) {
  labels.validate(num_classes);
  const auto c = static_cast<std::size_t>(num_classes);
  const std::size_t plane = labels.plane();
  Tensor<T> out(Shape{labels.batch, c, labels.height, labels.width});
  for (std::size_t n = 0; n < labels.batch; ++n) {
    for (std::size_t i = 0; i < plane; ++i) {
      const std::uint8_t v = labels.values[n * plane + i];
      if (v != kVoidLabel) out[(n * c + v) * plane + i] = T(1);
    }
  }
  return out;
}

void EdgeLossParams::validate() const {
  if (k < 1) throw ConfigError("edge loss: k must be >= 1");
  if (!(alpha > 0)) throw ConfigError("edge loss: alpha must be > 0");
  if (!(gamma > 0)) throw ConfigError("edge loss: gamma must be > 0");
  if (!(lambda1 >= 0)) throw ConfigError("edge loss: lambda1 must be >= 0");
  if (!(lambda2 >= 0)) throw ConfigError("edge loss: lambda2 must be >= 0");
  if (!(epsilon > 0 && epsilon < 0.5)) {
    throw ConfigError("edge loss: epsilon must lie in (0, 0.5)");
  }
}

template <typename T>
Tensor<T> laplacian_template(int k, bool all_ones_blocks) {
  if (k < 1) throw DomainError("laplacian_template: k must be >= 1");
  const auto kk = static_cast<std::size_t>(k);
  const std::size_t n = 3 * kk;
  Tensor<T> out(Shape{n, n});
  for (std::size_t by = 0; by < 3; ++by) {
    for (std::size_t bx = 0; bx < 3; ++bx) {
      const T weight = (by == 1 && bx == 1) ? T(-8) : T(1);
      for (std::size_t i = 0; i < kk; ++i) {
        for (std::size_t j = 0; j < kk; ++j) {
          if (!all_ones_blocks && i != j) continue;
          out[(by * kk + i) * n + bx * kk + j] = weight;
        }
      }
    }
  }
  return out;
}

template <typename T>
Var<T> gradient_map(const Var<T>& prob_map, int k, bool all_ones_blocks) {
  return depthwise_conv2d_replicate(prob_map,
                                    laplacian_template<T>(k, all_ones_blocks));
}

template <typename T>
Var<T> squash(const Var<T>& gradient_map, T alpha) {
  if (!(alpha > T(0))) throw DomainError("squash: alpha must be > 0");
  Var<T> norm = channel_l2_norm(gradient_map);
  return div(norm, add(norm, alpha));
}

template <typename T>
EdgeTargets<T> edge_labels(const LabelBatch& labels, int num_classes,
                           const EdgeLossParams& params) {
  params.validate();
  Tape<T> tape;
  Var<T> hot = tape.constant(one_hot<T>(labels, num_classes));
  Var<T> e = squash(gradient_map(hot, params.k, params.all_ones_blocks),
                    static_cast<T>(params.alpha));
  const Tensor<T>& prob = e.value();

  const std::size_t h = labels.height, w = labels.width, plane = labels.plane();
  const auto band = static_cast<std::ptrdiff_t>((3 * params.k + 1) / 2);
  EdgeTargets<T> out;
  out.edges = Tensor<T>(Shape{labels.batch, 1, h, w});
  out.valid = Tensor<T>(Shape{labels.batch, 1, h, w}, T(1));
  for (std::size_t n = 0; n < labels.batch; ++n) {
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        if (!labels.is_void(n * plane + y * w + x)) continue;
        const auto yy = static_cast<std::ptrdiff_t>(y);
        const auto xx = static_cast<std::ptrdiff_t>(x);
        const std::ptrdiff_t y0 = std::max<std::ptrdiff_t>(0, yy - band);
        const std::ptrdiff_t y1 = std::min<std::ptrdiff_t>(h - 1, yy + band);
        const std::ptrdiff_t x0 = std::max<std::ptrdiff_t>(0, xx - band);
        const std::ptrdiff_t x1 = std::min<std::ptrdiff_t>(w - 1, xx + band);
        for (std::ptrdiff_t v = y0; v <= y1; ++v) {
          for (std::ptrdiff_t u = x0; u <= x1; ++u) {
            out.valid[n * plane + static_cast<std::size_t>(v) * w +
                      static_cast<std::size_t>(u)] = T(0);
          }
        }
      }
    }
  }
  for (std::size_t i = 0; i < prob.numel(); ++i) {
    if (out.valid[i] == T(0)) continue;
    if (prob[i] > T(0.5)) {
      out.edges[i] = T(1);
      ++out.positives;
    } else {
      ++out.negatives;
    }
  }
  return out;
}

template <typename T>
LossTerm<T> ce_loss(const Var<T>& logits, const LabelBatch& labels,
                    const EdgeLossParams& params) {
  const Shape& s = logits.shape();
  if (s.size() != 4 || s[0] != labels.batch || s[2] != labels.height ||
      s[3] != labels.width) {
    throw ShapeError("ce_loss: logits " + shape_str(s) +
                     " do not match label extents");
  }
  const std::size_t batch = s[0], channels = s[1], plane = s[2] * s[3];
  labels.validate(static_cast<int>(channels));
  const Tensor<T>& z = logits.value();
  const T eps = static_cast<T>(params.epsilon);
  const T log_lo = std::log(eps);
  const T log_hi = std::log1p(-eps);

  std::size_t valid = 0;
  for (std::size_t i = 0; i < labels.values.size(); ++i) {
    if (!labels.is_void(i)) ++valid;
  }
  LossTerm<T> out;
  out.empty = valid == 0;
  const T scale = (params.normalize_losses && valid > 0)
                      ? T(1) / static_cast<T>(valid)
                      : T(1);

  // Per pixel: -log clip(p_y); the saved mask marks unclipped pixels.
  auto active = std::make_shared<std::vector<std::uint8_t>>(batch * plane, 0);
  T total = 0;
  for (std::size_t n = 0; n < batch; ++n) {
    for (std::size_t i = 0; i < plane; ++i) {
      const std::uint8_t y = labels.values[n * plane + i];
      if (y == kVoidLabel) continue;
      const T* zp = z.data() + n * channels * plane + i;
      T m = zp[0];
      for (std::size_t c = 1; c < channels; ++c) m = std::max(m, zp[c * plane]);
      T se = 0;
      for (std::size_t c = 0; c < channels; ++c) se += std::exp(zp[c * plane] - m);
      const T logp = zp[y * plane] - m - std::log(se);
      T clipped = logp;
      if (logp < log_lo) {
        clipped = log_lo;
      } else if (logp > log_hi) {
        clipped = log_hi;
      } else {
        (*active)[n * plane + i] = 1;
      }
      total -= clipped;
    }
  }
  Tensor<T> value = Tensor<T>::scalar(total * scale);
  std::vector<std::uint8_t> label_copy = labels.values;
  out.value = logits.tape()->record(
      std::move(value), {logits},
      [active, labels = std::move(label_copy), batch, channels, plane,
       scale](const BackwardContext<T>& ctx) {
        const Tensor<T>& z = *ctx.inputs[0];
        Tensor<T>& gz = *ctx.grads[0];
        const T g = ctx.out_grad[0] * scale;
        for (std::size_t n = 0; n < batch; ++n) {
          for (std::size_t i = 0; i < plane; ++i) {
            if (!(*active)[n * plane + i]) continue;
            const std::uint8_t y = labels[n * plane + i];
            const std::size_t base = n * channels * plane + i;
            T m = z[base];
            for (std::size_t c = 1; c < channels; ++c) m = std::max(m, z[base + c * plane]);
            T se = 0;
            for (std::size_t c = 0; c < channels; ++c) se += std::exp(z[base + c * plane] - m);
            for (std::size_t c = 0; c < channels; ++c) {
              const T p = std::exp(z[base + c * plane] - m) / se;
              gz[base + c * plane] += g * (p - (c == y ? T(1) : T(0)));
            }
          }
        }
      },
      "ce_loss");
  return out;
}

template <typename T>
LossTerm<T> edge_bce(const Var<T>& edge_prob, const EdgeTargets<T>& targets,
                     const EdgeLossParams& params) {
  if (edge_prob.shape() != targets.edges.shape() ||
      targets.valid.shape() != targets.edges.shape()) {
    throw ShapeError("edge_bce: prediction " + shape_str(edge_prob.shape()) +
                     " and targets " + shape_str(targets.edges.shape()) +
                     " disagree");
  }
  std::size_t pos = 0, neg = 0;
  for (std::size_t i = 0; i < targets.edges.numel(); ++i) {
    if (targets.valid[i] == T(0)) continue;
    if (targets.edges[i] > T(0.5)) {
      ++pos;
    } else {
      ++neg;
    }
  }
  const std::size_t valid = pos + neg;
  LossTerm<T> out;
  out.empty = valid == 0;
  const T beta = valid > 0 ? static_cast<T>(neg) / static_cast<T>(valid) : T(0);
  const T wpos = static_cast<T>(params.gamma) * beta;
  const T wneg = T(1) - beta;
  const T eps = static_cast<T>(params.epsilon);
  const T scale = (params.normalize_losses && valid > 0)
                      ? T(1) / static_cast<T>(valid)
                      : T(1);
  const Tensor<T>& e = edge_prob.value();
  T total = 0;
  for (std::size_t i = 0; i < e.numel(); ++i) {
    if (targets.valid[i] == T(0)) continue;
    const T p = std::clamp(e[i], eps, T(1) - eps);
    const T t = targets.edges[i];
    if (t > T(0.5)) {
      if (wpos != T(0)) total -= wpos * std::log(p);
    } else {
      if (wneg != T(0)) total -= wneg * std::log(T(1) - p);
    }
  }
  auto edges = std::make_shared<Tensor<T>>(targets.edges);
  auto valid_mask = std::make_shared<Tensor<T>>(targets.valid);
  out.value = edge_prob.tape()->record(
      Tensor<T>::scalar(total * scale), {edge_prob},
      [edges, valid_mask, wpos, wneg, eps, scale](const BackwardContext<T>& ctx) {
        const Tensor<T>& e = *ctx.inputs[0];
        Tensor<T>& ge = *ctx.grads[0];
        const T g = ctx.out_grad[0] * scale;
        for (std::size_t i = 0; i < e.numel(); ++i) {
          if ((*valid_mask)[i] == T(0)) continue;
          const T p = e[i];
          if (p <= eps || p >= T(1) - eps) continue;  // clipped: flat
          if ((*edges)[i] > T(0.5)) {
            ge[i] += g * (-wpos / p);
          } else {
            ge[i] += g * (wneg / (T(1) - p));
          }
        }
      },
      "edge_bce");
  return out;
}

template <typename T>
Var<T> parameter_regularizer(Tape<T>& tape, std::span<const Var<T>> params,
                             bool squared) {
  Var<T> total = tape.constant(Tensor<T>::scalar(T(0)));
  for (const Var<T>& p : params) {
    total = add(total, sum(elementwise(UnaryOp::kSquare, p)));
  }
  return squared ? total : elementwise(UnaryOp::kSqrt, total);
}

template <typename T>
EceTerms<T> ece_loss(const Var<T>& logits, const LabelBatch& labels,
                     const EdgeLossParams& params,
                     std::span<const Var<T>> params_on_tape) {
  params.validate();
  Tape<T>& tape = *logits.tape();
  EceTerms<T> out;
  LossTerm<T> seg = ce_loss(logits, labels, params);
  out.seg = seg.value;
  out.seg_empty = seg.empty;

  const int classes = static_cast<int>(logits.shape()[1]);
  Var<T> prob = sigmoid(logits);
  out.edge_prob = squash(gradient_map(prob, params.k, params.all_ones_blocks),
                         static_cast<T>(params.alpha));
  EdgeTargets<T> targets = edge_labels<T>(labels, classes, params);
  LossTerm<T> edge = edge_bce(out.edge_prob, targets, params);
  out.edge = edge.value;
  out.edge_empty = edge.empty;

  out.reg = parameter_regularizer(tape, params_on_tape, params.squared_regularizer);

  out.total = add(add(out.seg, mul(out.edge, static_cast<T>(params.lambda1))),
                  mul(out.reg, static_cast<T>(params.lambda2)));
  return out;
}

#define ELKPP_INSTANTIATE(T)                                                   \
  template Tensor<T> one_hot(const LabelBatch&, int);                          \
  template Tensor<T> laplacian_template(int, bool);                            \
  template Var<T> gradient_map(const Var<T>&, int, bool);                      \
  template Var<T> squash(const Var<T>&, T);                                    \
  template EdgeTargets<T> edge_labels(const LabelBatch&, int,                  \
                                      const EdgeLossParams&);                  \
  template LossTerm<T> ce_loss(const Var<T>&, const LabelBatch&,               \
                               const EdgeLossParams&);                         \
  template LossTerm<T> edge_bce(const Var<T>&, const EdgeTargets<T>&,          \
                                const EdgeLossParams&);                        \
  template Var<T> parameter_regularizer(Tape<T>&, std::span<const Var<T>>,     \
                                        bool);                                 \
  template EceTerms<T> ece_loss(const Var<T>&, const LabelBatch&,              \
                                const EdgeLossParams&, std::span<const Var<T>>);

ELKPP_INSTANTIATE(float)
ELKPP_INSTANTIATE(double)
#undef ELKPP_INSTANTIATE

}  // namespace elkpp
