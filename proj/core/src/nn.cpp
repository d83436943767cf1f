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
#include "elkpp/nn.h"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "elkpp/error.h"

namespace elkpp {
namespace {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatrixMap = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatrixMap = Eigen::Map<const RowMatrix<T>>;

void require_rank4(const Shape& s, const char* op) {
  if (s.size() != 4) {
    throw ShapeError(std::string(op) + ": expected NCHW input, got " +
                     shape_str(s));
  }
}

// Patch matrix for one image: rows (c, i, j), columns (y, x).
struct ConvPlan {
  std::size_t channels, in_h, in_w, out_h, out_w;
  std::size_t kernel_h, kernel_w, rate_h, rate_w, stride;
  std::ptrdiff_t pad_top, pad_left;

  std::size_t rows() const { return channels * kernel_h * kernel_w; }
  std::size_t cols() const { return out_h * out_w; }
  bool is_pointwise() const {
    return kernel_h == 1 && kernel_w == 1 && stride == 1 && pad_top == 0 &&
           pad_left == 0;
  }
};

template <typename T>
void im2col(const ConvPlan& p, const T* image, T* col) {
  const auto h = static_cast<std::ptrdiff_t>(p.in_h);
  const auto w = static_cast<std::ptrdiff_t>(p.in_w);
  for (std::size_t c = 0; c < p.channels; ++c) {
    const T* plane = image + c * p.in_h * p.in_w;
    for (std::size_t i = 0; i < p.kernel_h; ++i) {
      for (std::size_t j = 0; j < p.kernel_w; ++j) {
        T* row = col + ((c * p.kernel_h + i) * p.kernel_w + j) * p.cols();
        const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(i * p.rate_h) - p.pad_top;
        const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(j * p.rate_w) - p.pad_left;
        for (std::size_t oy = 0; oy < p.out_h; ++oy) {
          const std::ptrdiff_t y = static_cast<std::ptrdiff_t>(oy * p.stride) + dy;
          T* dst = row + oy * p.out_w;
          if (y < 0 || y >= h) {
            std::fill_n(dst, p.out_w, T(0));
            continue;
          }
          const T* src = plane + y * w;
          for (std::size_t ox = 0; ox < p.out_w; ++ox) {
            const std::ptrdiff_t x = static_cast<std::ptrdiff_t>(ox * p.stride) + dx;
            dst[ox] = (x >= 0 && x < w) ? src[x] : T(0);
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const ConvPlan& p, const T* col, T* image) {
  const auto h = static_cast<std::ptrdiff_t>(p.in_h);
  const auto w = static_cast<std::ptrdiff_t>(p.in_w);
  for (std::size_t c = 0; c < p.channels; ++c) {
    T* plane = image + c * p.in_h * p.in_w;
    for (std::size_t i = 0; i < p.kernel_h; ++i) {
      for (std::size_t j = 0; j < p.kernel_w; ++j) {
        const T* row = col + ((c * p.kernel_h + i) * p.kernel_w + j) * p.cols();
        const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(i * p.rate_h) - p.pad_top;
        const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(j * p.rate_w) - p.pad_left;
        for (std::size_t oy = 0; oy < p.out_h; ++oy) {
          const std::ptrdiff_t y = static_cast<std::ptrdiff_t>(oy * p.stride) + dy;
          if (y < 0 || y >= h) continue;
          const T* src = row + oy * p.out_w;
          T* dst = plane + y * w;
          for (std::size_t ox = 0; ox < p.out_w; ++ox) {
            const std::ptrdiff_t x = static_cast<std::ptrdiff_t>(ox * p.stride) + dx;
            if (x >= 0 && x < w) dst[x] += src[ox];
          }
        }
      }
    }
  }
}

}  // namespace

void ConvSpec::validate() const {
  if (kernel_h < 1 || kernel_w < 1) throw ConfigError("conv: kernel extent < 1");
  if (rate_h < 1 || rate_w < 1) throw ConfigError("conv: dilation rate < 1");
  if (stride < 1) throw ConfigError("conv: stride < 1");
  if (in_channels < 1 || out_channels < 1) {
    throw ConfigError("conv: channel count < 1");
  }
}

Shape ConvSpec::weight_shape() const {
  return {static_cast<std::size_t>(out_channels),
          static_cast<std::size_t>(in_channels),
          static_cast<std::size_t>(kernel_h), static_cast<std::size_t>(kernel_w)};
}

std::size_t ConvSpec::weight_count() const { return shape_numel(weight_shape()); }

int effective_kernel_extent(int k, int r) {
  if (k < 1 || r < 1) throw DomainError("effective_kernel_extent: k, r >= 1");
  return k + (k - 1) * (r - 1);
}

ConvGeometry conv_geometry(const ConvSpec& spec, std::size_t in_h,
                           std::size_t in_w) {
  const auto kd_h = static_cast<std::size_t>(
      effective_kernel_extent(spec.kernel_h, spec.rate_h));
  const auto kd_w = static_cast<std::size_t>(
      effective_kernel_extent(spec.kernel_w, spec.rate_w));
  const auto s = static_cast<std::size_t>(spec.stride);
  ConvGeometry g;
  if (spec.padding == Padding::kValid) {
    if (in_h < kd_h || in_w < kd_w) {
      throw ShapeError("conv: valid padding yields nonpositive output for input " +
                       std::to_string(in_h) + "x" + std::to_string(in_w));
    }
    g.out_h = (in_h - kd_h) / s + 1;
    g.out_w = (in_w - kd_w) / s + 1;
    return g;
  }
  g.out_h = (in_h + s - 1) / s;
  g.out_w = (in_w + s - 1) / s;
  const std::size_t need_h = (g.out_h - 1) * s + kd_h;
  const std::size_t need_w = (g.out_w - 1) * s + kd_w;
  g.pad_top = need_h > in_h ? (need_h - in_h) / 2 : 0;
  g.pad_left = need_w > in_w ? (need_w - in_w) / 2 : 0;
  return g;
}

template <typename T>
Var<T> dilated_conv2d(const Var<T>& input, const ConvSpec& spec,
                      const Var<T>& weights, const Var<T>& bias) {
  spec.validate();
  const Shape& xs = input.shape();
  require_rank4(xs, "dilated_conv2d");
  if (xs[1] != static_cast<std::size_t>(spec.in_channels)) {
    throw ShapeError("dilated_conv2d: input has " + std::to_string(xs[1]) +
                     " channels, spec expects " +
                     std::to_string(spec.in_channels));
  }
  if (weights.shape() != spec.weight_shape()) {
    throw ShapeError("dilated_conv2d: weight shape " +
                     shape_str(weights.shape()) + ", expected " +
                     shape_str(spec.weight_shape()));
  }
  if (spec.has_bias != bias.valid()) {
    throw ShapeError("dilated_conv2d: bias presence disagrees with spec");
  }
  if (bias.valid() &&
      bias.shape() != Shape{static_cast<std::size_t>(spec.out_channels)}) {
    throw ShapeError("dilated_conv2d: bias shape " + shape_str(bias.shape()));
  }
  const ConvGeometry g = conv_geometry(spec, xs[2], xs[3]);
  auto plan = std::make_shared<ConvPlan>(ConvPlan{
      xs[1], xs[2], xs[3], g.out_h, g.out_w,
      static_cast<std::size_t>(spec.kernel_h),
      static_cast<std::size_t>(spec.kernel_w),
      static_cast<std::size_t>(spec.rate_h),
      static_cast<std::size_t>(spec.rate_w),
      static_cast<std::size_t>(spec.stride),
      static_cast<std::ptrdiff_t>(g.pad_top),
      static_cast<std::ptrdiff_t>(g.pad_left)});
  const std::size_t batch = xs[0];
  const std::size_t out_c = static_cast<std::size_t>(spec.out_channels);
  const std::size_t rows = plan->rows();
  const std::size_t cols = plan->cols();
  const std::size_t in_stride = xs[1] * xs[2] * xs[3];

  Tensor<T> out(Shape{batch, out_c, g.out_h, g.out_w});
  const Tensor<T>& x = input.value();
  const Tensor<T>& w = weights.value();
  ConstMatrixMap<T> wm(w.data(), out_c, rows);
  AlignedVector<T> col(plan->is_pointwise() ? 0 : rows * cols);
  for (std::size_t n = 0; n < batch; ++n) {
    const T* patches = x.data() + n * in_stride;
    if (!plan->is_pointwise()) {
      im2col(*plan, patches, col.data());
      patches = col.data();
    }
    MatrixMap<T> ym(out.data() + n * out_c * cols, out_c, cols);
    ym.noalias() = wm * ConstMatrixMap<T>(patches, rows, cols);
    if (bias.valid()) {
      const Tensor<T>& b = bias.value();
      for (std::size_t o = 0; o < out_c; ++o) ym.row(o).array() += b[o];
    }
  }

  std::vector<Var<T>> inputs{input, weights};
  if (bias.valid()) inputs.push_back(bias);
  return input.tape()->record(
      std::move(out), std::move(inputs),
      [plan, batch, out_c, in_stride](const BackwardContext<T>& ctx) {
        const std::size_t rows = plan->rows();
        const std::size_t cols = plan->cols();
        const Tensor<T>& x = *ctx.inputs[0];
        const Tensor<T>& w = *ctx.inputs[1];
        Tensor<T>* gx = ctx.grads[0];
        Tensor<T>* gw = ctx.grads[1];
        Tensor<T>* gb = ctx.grads.size() > 2 ? ctx.grads[2] : nullptr;
        ConstMatrixMap<T> wm(w.data(), out_c, rows);
        AlignedVector<T> col(plan->is_pointwise() ? 0 : rows * cols);
        AlignedVector<T> dcol(gx && !plan->is_pointwise() ? rows * cols : 0);
        for (std::size_t n = 0; n < batch; ++n) {
          ConstMatrixMap<T> gy(ctx.out_grad.data() + n * out_c * cols, out_c, cols);
          if (gw) {
            const T* patches = x.data() + n * in_stride;
            if (!plan->is_pointwise()) {
              im2col(*plan, patches, col.data());
              patches = col.data();
            }
            MatrixMap<T> gwm(gw->data(), out_c, rows);
            gwm.noalias() += gy * ConstMatrixMap<T>(patches, rows, cols).transpose();
          }
          if (gb) {
            for (std::size_t o = 0; o < out_c; ++o) {
              const T* row = gy.data() + o * cols;
              T acc = 0;
              for (std::size_t j = 0; j < cols; ++j) acc += row[j];
              (*gb)[o] += acc;
            }
          }
          if (gx) {
            T* dst = gx->data() + n * in_stride;
            if (plan->is_pointwise()) {
              MatrixMap<T>(dst, rows, cols).noalias() += wm.transpose() * gy;
            } else {
              MatrixMap<T>(dcol.data(), rows, cols).noalias() = wm.transpose() * gy;
              col2im_add(*plan, dcol.data(), dst);
            }
          }
        }
      },
      "dilated_conv2d");
}

template <typename T>
Var<T> batch_norm(const Var<T>& input, const Var<T>& scale, const Var<T>& shift,
                  RunningStats<T>& stats, bool training,
                  const BatchNormOptions& options) {
  const Shape& xs = input.shape();
  require_rank4(xs, "batch_norm");
  const std::size_t batch = xs[0], channels = xs[1], plane = xs[2] * xs[3];
  const std::size_t count = batch * plane;
  if (count == 0) throw ShapeError("batch_norm: zero-size batch");
  const Shape cshape{channels};
  if (scale.shape() != cshape || shift.shape() != cshape ||
      stats.mean.shape() != cshape || stats.var.shape() != cshape) {
    throw ShapeError("batch_norm: per-channel parameters must have length " +
                     std::to_string(channels));
  }
  const Tensor<T>& x = input.value();
  const Tensor<T>& gamma = scale.value();
  const Tensor<T>& beta = shift.value();
  const T eps = static_cast<T>(options.epsilon);
  const T momentum = static_cast<T>(options.momentum);

  auto normalized = std::make_shared<Tensor<T>>(xs);
  auto inv_std = std::make_shared<std::vector<T>>(channels);
  for (std::size_t c = 0; c < channels; ++c) {
    T mu, var;
    if (training) {
      T acc = 0;
      for (std::size_t n = 0; n < batch; ++n) {
        const T* p = x.data() + (n * channels + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) acc += p[i];
      }
      mu = acc / static_cast<T>(count);
      T sq = 0;
      for (std::size_t n = 0; n < batch; ++n) {
        const T* p = x.data() + (n * channels + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) {
          const T d = p[i] - mu;
          sq += d * d;
        }
      }
      var = sq / static_cast<T>(count);
      stats.mean[c] = momentum * stats.mean[c] + (T(1) - momentum) * mu;
      stats.var[c] = momentum * stats.var[c] + (T(1) - momentum) * var;
    } else {
      mu = stats.mean[c];
      var = stats.var[c];
    }
    const T is = T(1) / std::sqrt(var + eps);
    (*inv_std)[c] = is;
    for (std::size_t n = 0; n < batch; ++n) {
      const std::size_t off = (n * channels + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        (*normalized)[off + i] = (x[off + i] - mu) * is;
      }
    }
  }
  Tensor<T> out(xs);
  for (std::size_t n = 0; n < batch; ++n) {
    for (std::size_t c = 0; c < channels; ++c) {
      const std::size_t off = (n * channels + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        out[off + i] = gamma[c] * (*normalized)[off + i] + beta[c];
      }
    }
  }
  return input.tape()->record(
      std::move(out), {input, scale, shift},
      [normalized, inv_std, training, batch, channels, plane,
       count](const BackwardContext<T>& ctx) {
        const Tensor<T>& gamma = *ctx.inputs[1];
        const Tensor<T>& gy = ctx.out_grad;
        const Tensor<T>& xhat = *normalized;
        for (std::size_t c = 0; c < channels; ++c) {
          T sum_dy = 0, sum_dy_xhat = 0;
          for (std::size_t n = 0; n < batch; ++n) {
            const std::size_t off = (n * channels + c) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
              sum_dy += gy[off + i];
              sum_dy_xhat += gy[off + i] * xhat[off + i];
            }
          }
          if (ctx.grads[1]) (*ctx.grads[1])[c] += sum_dy_xhat;
          if (ctx.grads[2]) (*ctx.grads[2])[c] += sum_dy;
          if (!ctx.grads[0]) continue;
          Tensor<T>& gx = *ctx.grads[0];
          const T k = gamma[c] * (*inv_std)[c];
          const T inv_m = T(1) / static_cast<T>(count);
          for (std::size_t n = 0; n < batch; ++n) {
            const std::size_t off = (n * channels + c) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
              if (training) {
                gx[off + i] += k * (gy[off + i] - inv_m * sum_dy -
                                    xhat[off + i] * inv_m * sum_dy_xhat);
              } else {
                gx[off + i] += k * gy[off + i];
              }
            }
          }
        }
      },
      "batch_norm");
}

template <typename T>
Var<T> global_avg_pool(const Var<T>& input) {
  const Shape& xs = input.shape();
  require_rank4(xs, "global_avg_pool");
  const std::size_t nc = xs[0] * xs[1], plane = xs[2] * xs[3];
  if (plane == 0) throw ShapeError("global_avg_pool: empty spatial extent");
  const Tensor<T>& x = input.value();
  Tensor<T> out(Shape{xs[0], xs[1], 1, 1});
  const T inv = T(1) / static_cast<T>(plane);
  for (std::size_t k = 0; k < nc; ++k) {
    T acc = 0;
    for (std::size_t i = 0; i < plane; ++i) acc += x[k * plane + i];
    out[k] = acc * inv;
  }
  return input.tape()->record(
      std::move(out), {input},
      [nc, plane, inv](const BackwardContext<T>& ctx) {
        Tensor<T>& gx = *ctx.grads[0];
        for (std::size_t k = 0; k < nc; ++k) {
          const T g = ctx.out_grad[k] * inv;
          for (std::size_t i = 0; i < plane; ++i) gx[k * plane + i] += g;
        }
      },
      "global_avg_pool");
}

namespace {

struct AxisSampling {
  std::vector<std::size_t> lo, hi;
  std::vector<double> frac;
};

AxisSampling half_pixel_sampling(std::size_t in, std::size_t out) {
  AxisSampling s;
  s.lo.resize(out);
  s.hi.resize(out);
  s.frac.resize(out);
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  const double max_src = static_cast<double>(in - 1);
  for (std::size_t i = 0; i < out; ++i) {
    double src = (static_cast<double>(i) + 0.5) * scale - 0.5;
    src = std::clamp(src, 0.0, max_src);
    const auto lo = static_cast<std::size_t>(std::floor(src));
    s.lo[i] = lo;
    s.hi[i] = std::min(lo + 1, in - 1);
    s.frac[i] = src - static_cast<double>(lo);
  }
  return s;
}

}  // namespace

template <typename T>
Var<T> bilinear_resize(const Var<T>& input, std::size_t out_h,
                       std::size_t out_w) {
  const Shape& xs = input.shape();
  require_rank4(xs, "bilinear_resize");
  if (out_h == 0 || out_w == 0) throw ShapeError("bilinear_resize: empty output");
  if (xs[2] == 0 || xs[3] == 0) throw ShapeError("bilinear_resize: empty input");
  const std::size_t nc = xs[0] * xs[1], in_h = xs[2], in_w = xs[3];
  if (in_h == out_h && in_w == out_w) {
    return reshape(input, xs);
  }
  auto ys = std::make_shared<AxisSampling>(half_pixel_sampling(in_h, out_h));
  auto xs_s = std::make_shared<AxisSampling>(half_pixel_sampling(in_w, out_w));
  const Tensor<T>& x = input.value();
  Tensor<T> out(Shape{xs[0], xs[1], out_h, out_w});
  for (std::size_t k = 0; k < nc; ++k) {
    const T* src = x.data() + k * in_h * in_w;
    T* dst = out.data() + k * out_h * out_w;
    for (std::size_t i = 0; i < out_h; ++i) {
      const T fy = static_cast<T>(ys->frac[i]);
      const T* r0 = src + ys->lo[i] * in_w;
      const T* r1 = src + ys->hi[i] * in_w;
      for (std::size_t j = 0; j < out_w; ++j) {
        const T fx = static_cast<T>(xs_s->frac[j]);
        const std::size_t c0 = xs_s->lo[j], c1 = xs_s->hi[j];
        const T top = r0[c0] + fx * (r0[c1] - r0[c0]);
        const T bot = r1[c0] + fx * (r1[c1] - r1[c0]);
        dst[i * out_w + j] = top + fy * (bot - top);
      }
    }
  }
  return input.tape()->record(
      std::move(out), {input},
      [ys, xs_s, nc, in_h, in_w, out_h, out_w](const BackwardContext<T>& ctx) {
        Tensor<T>& gx = *ctx.grads[0];
        for (std::size_t k = 0; k < nc; ++k) {
          const T* go = ctx.out_grad.data() + k * out_h * out_w;
          T* g = gx.data() + k * in_h * in_w;
          for (std::size_t i = 0; i < out_h; ++i) {
            const T fy = static_cast<T>(ys->frac[i]);
            T* r0 = g + ys->lo[i] * in_w;
            T* r1 = g + ys->hi[i] * in_w;
            for (std::size_t j = 0; j < out_w; ++j) {
              const T fx = static_cast<T>(xs_s->frac[j]);
              const std::size_t c0 = xs_s->lo[j], c1 = xs_s->hi[j];
              const T v = go[i * out_w + j];
              r0[c0] += v * (T(1) - fy) * (T(1) - fx);
              r0[c1] += v * (T(1) - fy) * fx;
              r1[c0] += v * fy * (T(1) - fx);
              r1[c1] += v * fy * fx;
            }
          }
        }
      },
      "bilinear_resize");
}

template <typename T>
Var<T> softmax(const Var<T>& logits, std::size_t axis) {
  const Shape& s = logits.shape();
  if (axis >= s.size()) throw ShapeError("softmax: axis out of range");
  std::size_t outer = 1, inner = 1;
  for (std::size_t ax = 0; ax < axis; ++ax) outer *= s[ax];
  for (std::size_t ax = axis + 1; ax < s.size(); ++ax) inner *= s[ax];
  const std::size_t channels = s[axis];
  const Tensor<T>& z = logits.value();
  Tensor<T> out(s);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t i = 0; i < inner; ++i) {
      const std::size_t base = o * channels * inner + i;
      T m = z[base];
      for (std::size_t c = 1; c < channels; ++c) m = std::max(m, z[base + c * inner]);
      T total = 0;
      for (std::size_t c = 0; c < channels; ++c) {
        const T e = std::exp(z[base + c * inner] - m);
        out[base + c * inner] = e;
        total += e;
      }
      for (std::size_t c = 0; c < channels; ++c) out[base + c * inner] /= total;
    }
  }
  return logits.tape()->record(
      std::move(out), {logits},
      [outer, inner, channels](const BackwardContext<T>& ctx) {
        const Tensor<T>& y = ctx.out_value;
        const Tensor<T>& gy = ctx.out_grad;
        Tensor<T>& gx = *ctx.grads[0];
        for (std::size_t o = 0; o < outer; ++o) {
          for (std::size_t i = 0; i < inner; ++i) {
            const std::size_t base = o * channels * inner + i;
            T dot = 0;
            for (std::size_t c = 0; c < channels; ++c) {
              dot += y[base + c * inner] * gy[base + c * inner];
            }
            for (std::size_t c = 0; c < channels; ++c) {
              const std::size_t k = base + c * inner;
              gx[k] += y[k] * (gy[k] - dot);
            }
          }
        }
      },
      "softmax");
}

template <typename T>
Var<T> sigmoid(const Var<T>& x) {
  const Tensor<T>& xv = x.value();
  Tensor<T> out(xv.shape());
  for (std::size_t i = 0; i < xv.numel(); ++i) {
    const T v = xv[i];
    if (v >= T(0)) {
      out[i] = T(1) / (T(1) + std::exp(-v));
    } else {
      const T e = std::exp(v);
      out[i] = e / (T(1) + e);
    }
  }
  return x.tape()->record(
      std::move(out), {x},
      [](const BackwardContext<T>& ctx) {
        const Tensor<T>& y = ctx.out_value;
        Tensor<T>& gx = *ctx.grads[0];
        for (std::size_t i = 0; i < y.numel(); ++i) {
          gx[i] += ctx.out_grad[i] * y[i] * (T(1) - y[i]);
        }
      },
      "sigmoid");
}

template <typename T>
Var<T> depthwise_conv2d_replicate(const Var<T>& input, const Tensor<T>& kernel) {
  const Shape& xs = input.shape();
  require_rank4(xs, "depthwise_conv2d_replicate");
  if (kernel.rank() != 2) throw ShapeError("depthwise kernel must be 2-D");
  const std::size_t kh = kernel.dim(0), kw = kernel.dim(1);
  const std::size_t nc = xs[0] * xs[1], h = xs[2], w = xs[3];
  const std::ptrdiff_t pt = static_cast<std::ptrdiff_t>((kh - 1) / 2);
  const std::ptrdiff_t pl = static_cast<std::ptrdiff_t>((kw - 1) / 2);
  // Clamped source index per (output coordinate, tap).
  auto rows = std::make_shared<std::vector<std::size_t>>(h * kh);
  auto cols = std::make_shared<std::vector<std::size_t>>(w * kw);
  const auto hi_h = static_cast<std::ptrdiff_t>(h) - 1;
  const auto hi_w = static_cast<std::ptrdiff_t>(w) - 1;
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t u = 0; u < kh; ++u) {
      const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y + u) - pt;
      (*rows)[y * kh + u] = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(sy, 0, hi_h));
    }
  }
  for (std::size_t x = 0; x < w; ++x) {
    for (std::size_t v = 0; v < kw; ++v) {
      const std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(x + v) - pl;
      (*cols)[x * kw + v] = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(sx, 0, hi_w));
    }
  }
  const Tensor<T>& xv = input.value();
  Tensor<T> out(xs);
  for (std::size_t k = 0; k < nc; ++k) {
    const T* src = xv.data() + k * h * w;
    T* dst = out.data() + k * h * w;
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        T acc = 0;
        for (std::size_t u = 0; u < kh; ++u) {
          const T* row = src + (*rows)[y * kh + u] * w;
          for (std::size_t v = 0; v < kw; ++v) {
            const T kv = kernel[u * kw + v];
            if (kv != T(0)) acc += kv * row[(*cols)[x * kw + v]];
          }
        }
        dst[y * w + x] = acc;
      }
    }
  }
  return input.tape()->record(
      std::move(out), {input},
      [kernel, rows, cols, nc, h, w, kh, kw](const BackwardContext<T>& ctx) {
        Tensor<T>& gx = *ctx.grads[0];
        for (std::size_t k = 0; k < nc; ++k) {
          const T* go = ctx.out_grad.data() + k * h * w;
          T* g = gx.data() + k * h * w;
          for (std::size_t y = 0; y < h; ++y) {
            for (std::size_t x = 0; x < w; ++x) {
              const T v0 = go[y * w + x];
              for (std::size_t u = 0; u < kh; ++u) {
                T* row = g + (*rows)[y * kh + u] * w;
                for (std::size_t v = 0; v < kw; ++v) {
                  const T kv = kernel[u * kw + v];
                  if (kv != T(0)) row[(*cols)[x * kw + v]] += kv * v0;
                }
              }
            }
          }
        }
      },
      "depthwise_conv2d_replicate");
}

template <typename T>
Var<T> channel_l2_norm(const Var<T>& input) {
  const Shape& xs = input.shape();
  require_rank4(xs, "channel_l2_norm");
  const std::size_t batch = xs[0], channels = xs[1], plane = xs[2] * xs[3];
  const Tensor<T>& x = input.value();
  Tensor<T> out(Shape{batch, 1, xs[2], xs[3]});
  for (std::size_t n = 0; n < batch; ++n) {
    for (std::size_t i = 0; i < plane; ++i) {
      T acc = 0;
      for (std::size_t c = 0; c < channels; ++c) {
        const T v = x[(n * channels + c) * plane + i];
        acc += v * v;
      }
      out[n * plane + i] = std::sqrt(acc);
    }
  }
  return input.tape()->record(
      std::move(out), {input},
      [batch, channels, plane](const BackwardContext<T>& ctx) {
        const Tensor<T>& x = *ctx.inputs[0];
        const Tensor<T>& norm = ctx.out_value;
        Tensor<T>& gx = *ctx.grads[0];
        for (std::size_t n = 0; n < batch; ++n) {
          for (std::size_t i = 0; i < plane; ++i) {
            const T r = norm[n * plane + i];
            if (r <= T(0)) continue;
            const T s = ctx.out_grad[n * plane + i] / r;
            for (std::size_t c = 0; c < channels; ++c) {
              const std::size_t k = (n * channels + c) * plane + i;
              gx[k] += s * x[k];
            }
          }
        }
      },
      "channel_l2_norm");
}

#define ELKPP_INSTANTIATE(T)                                                   \
  template Var<T> dilated_conv2d(const Var<T>&, const ConvSpec&, const Var<T>&, \
                                 const Var<T>&);                               \
  template Var<T> batch_norm(const Var<T>&, const Var<T>&, const Var<T>&,      \
                             RunningStats<T>&, bool, const BatchNormOptions&); \
  template Var<T> global_avg_pool(const Var<T>&);                              \
  template Var<T> bilinear_resize(const Var<T>&, std::size_t, std::size_t);    \
  template Var<T> softmax(const Var<T>&, std::size_t);                         \
  template Var<T> sigmoid(const Var<T>&);                                      \
  template Var<T> depthwise_conv2d_replicate(const Var<T>&, const Tensor<T>&); \
  template Var<T> channel_l2_norm(const Var<T>&);

ELKPP_INSTANTIATE(float)
ELKPP_INSTANTIATE(double)
#undef ELKPP_INSTANTIATE

}  // namespace elkpp
