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
#include <gtest/gtest.h>

#include <cmath>

#include "elkpp/error.h"
#include "elkpp/nn.h"
#include "support/fd.h"

namespace elkpp {
namespace {

using testing::random_tensor;

ConvSpec spec_of(int kh, int kw, int rh, int rw, int stride = 1, int cin = 1, int cout = 1) {
  return ConvSpec{kh, kw, rh, rw, stride, cin, cout, false, Padding::kSameZero};
}

Tensor<double> conv(const Tensor<double>& x, const ConvSpec& s, const Tensor<double>& w) {
  Tape<double> tape;
  return dilated_conv2d(tape.constant(x), s, tape.constant(w)).value();
}

// Direct loops, zero padding with the same geometry, no im2col.
Tensor<double> naive_conv(const Tensor<double>& x, const ConvSpec& s, const Tensor<double>& w) {
  const ConvGeometry g = conv_geometry(s, x.dim(2), x.dim(3));
  Tensor<double> out(Shape{x.dim(0), static_cast<std::size_t>(s.out_channels), g.out_h, g.out_w});
  for (std::size_t n = 0; n < x.dim(0); ++n)
    for (int o = 0; o < s.out_channels; ++o)
      for (std::size_t oy = 0; oy < g.out_h; ++oy)
        for (std::size_t ox = 0; ox < g.out_w; ++ox) {
          double acc = 0;
          for (int c = 0; c < s.in_channels; ++c)
            for (int i = 0; i < s.kernel_h; ++i)
              for (int j = 0; j < s.kernel_w; ++j) {
                const long y = static_cast<long>(oy * s.stride) - static_cast<long>(g.pad_top) +
                               i * s.rate_h;
                const long xx = static_cast<long>(ox * s.stride) - static_cast<long>(g.pad_left) +
                                j * s.rate_w;
                if (y < 0 || xx < 0 || y >= static_cast<long>(x.dim(2)) ||
                    xx >= static_cast<long>(x.dim(3)))
                  continue;
                acc += x.at(n, c, y, xx) * w.at(o, c, i, j);
              }
          out.at(n, o, oy, ox) = acc;
        }
  return out;
}

TEST(Conv, IdentityKernel) {
  const Tensor<double> x = random_tensor({1, 1, 5, 6}, 1);
  EXPECT_EQ(conv(x, spec_of(1, 1, 1, 1), Tensor<double>(Shape{1, 1, 1, 1}, 1.0)), x);
}

TEST(Conv, ImpulseThroughDilatedOnes) {
  Tensor<double> x(Shape{1, 1, 9, 9});
  x.at(0, 0, 4, 4) = 1;
  const Tensor<double> y = conv(x, spec_of(3, 3, 2, 2), Tensor<double>(Shape{1, 1, 3, 3}, 1.0));
  for (int r = 0; r < 9; ++r) {
    for (int c = 0; c < 9; ++c) {
      const bool on = (r == 2 || r == 4 || r == 6) && (c == 2 || c == 4 || c == 6);
      EXPECT_EQ(y.at(0, 0, r, c), on ? 1.0 : 0.0) << r << "," << c;
    }
  }
}

TEST(Conv, ZeroSumKernelAnnihilatesConstantsInInterior) {
  const Tensor<double> x(Shape{1, 1, 8, 8}, 0.7);
  const Tensor<double> lap(Shape{1, 1, 3, 3}, {1, 1, 1, 1, -8, 1, 1, 1, 1});
  const Tensor<double> y = conv(x, spec_of(3, 3, 1, 1), lap);
  for (int r = 1; r < 7; ++r)
    for (int c = 1; c < 7; ++c) EXPECT_NEAR(y.at(0, 0, r, c), 0.0, 1e-15);
}

TEST(Conv, EffectiveKernelExtent) {
  EXPECT_EQ(effective_kernel_extent(3, 1), 3);
  EXPECT_EQ(effective_kernel_extent(3, 2), 5);
  EXPECT_EQ(effective_kernel_extent(7, 3), 19);
}

// The impulse response is the kernel laid out on the dilated grid.
TEST(Conv, FootprintLaw) {
  for (int k = 1; k <= 7; ++k) {
    for (int r = 1; r <= 4; ++r) {
      const int kd = effective_kernel_extent(k, r);
      const int n = kd + 4;
      Tensor<double> x(Shape{1, 1, static_cast<std::size_t>(n), static_cast<std::size_t>(n)});
      const int cy = n / 2, cx = n / 2;
      x.at(0, 0, cy, cx) = 1;
      Tensor<double> w(Shape{1, 1, static_cast<std::size_t>(k), static_cast<std::size_t>(k)});
      for (std::size_t i = 0; i < w.numel(); ++i) w[i] = static_cast<double>(i + 1);
      const ConvSpec s = spec_of(k, k, r, r);
      const ConvGeometry g = conv_geometry(s, n, n);
      const Tensor<double> y = conv(x, s, w);
      for (int oy = 0; oy < n; ++oy) {
        for (int ox = 0; ox < n; ++ox) {
          // y[oy,ox] picks tap (i,j) with oy - pad + i*r == cy.
          double expect = 0;
          for (int i = 0; i < k; ++i)
            for (int j = 0; j < k; ++j)
              if (oy - static_cast<int>(g.pad_top) + i * r == cy &&
                  ox - static_cast<int>(g.pad_left) + j * r == cx)
                expect = w.at(0, 0, i, j);
          ASSERT_EQ(y.at(0, 0, oy, ox), expect) << "k=" << k << " r=" << r;
        }
      }
    }
  }
}

TEST(Conv, MatchesDirectLoops) {
  for (const ConvSpec& s : {ConvSpec{3, 3, 2, 2, 1, 3, 4, false, Padding::kSameZero},
                            ConvSpec{3, 7, 1, 3, 2, 2, 3, false, Padding::kSameZero},
                            ConvSpec{1, 1, 1, 1, 2, 3, 2, false, Padding::kSameZero},
                            ConvSpec{4, 4, 1, 1, 1, 2, 2, false, Padding::kSameZero},
                            ConvSpec{3, 3, 1, 1, 2, 2, 2, false, Padding::kValid}}) {
    const Tensor<double> x = random_tensor({2, static_cast<std::size_t>(s.in_channels), 11, 10}, 5);
    const Tensor<double> w = random_tensor(s.weight_shape(), 6);
    const Tensor<double> a = conv(x, s, w), b = naive_conv(x, s, w);
    ASSERT_EQ(a.shape(), b.shape());
    for (std::size_t i = 0; i < a.numel(); ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
  }
}

TEST(Conv, LinearInFloat32) {
  const ConvSpec s{3, 3, 2, 2, 1, 2, 3, false, Padding::kSameZero};
  auto to_f = [](const Tensor<double>& t) { return t.cast<float>(); };
  const Tensor<float> x = to_f(random_tensor({1, 2, 8, 8}, 7));
  const Tensor<float> y = to_f(random_tensor({1, 2, 8, 8}, 8));
  const Tensor<float> w = to_f(random_tensor(s.weight_shape(), 9));
  Tape<float> tape;
  auto c = [&](const Tensor<float>& in) {
    return dilated_conv2d(tape.constant(in), s, tape.constant(w)).value();
  };
  Tensor<float> comb(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) comb[i] = 2.f * x[i] - 0.5f * y[i];
  const Tensor<float> lhs = c(comb), cx = c(x), cy = c(y);
  double num = 0, den = 0;
  for (std::size_t i = 0; i < lhs.numel(); ++i) {
    const double rhs = 2.0 * cx[i] - 0.5 * cy[i];
    num += (lhs[i] - rhs) * (lhs[i] - rhs);
    den += rhs * rhs;
  }
  EXPECT_LT(std::sqrt(num / den), 1e-5);
}

TEST(Conv, Errors) {
  Tape<double> tape;
  Var<double> x = tape.constant(Tensor<double>(Shape{1, 2, 4, 4}));
  const ConvSpec s = spec_of(3, 3, 1, 1, 1, 3, 1);
  EXPECT_THROW(dilated_conv2d(x, s, tape.constant(Tensor<double>(s.weight_shape()))), ShapeError);
  const ConvSpec s2 = spec_of(3, 3, 1, 1, 1, 2, 1);
  EXPECT_THROW(dilated_conv2d(x, s2, tape.constant(Tensor<double>(Shape{1, 2, 2, 2}))), ShapeError);
  EXPECT_THROW(spec_of(0, 3, 1, 1).validate(), ConfigError);
}

TEST(BatchNorm, Examples) {
  Tape<double> tape;
  // Normalized input is a fixed point.
  Tensor<double> x(Shape{2, 1, 2, 2}, {-1, 1, -1, 1, 1, -1, 1, -1});
  RunningStats<double> st = RunningStats<double>::neutral(1);
  Var<double> one = tape.constant(Tensor<double>(Shape{1}, 1.0));
  Var<double> zero = tape.constant(Tensor<double>(Shape{1}, 0.0));
  const Tensor<double> y = batch_norm(tape.constant(x), one, zero, st, true).value();
  for (std::size_t i = 0; i < y.numel(); ++i) EXPECT_NEAR(y[i], x[i], 1e-4);
  // Constant input collapses to the shift.
  Var<double> three = tape.constant(Tensor<double>(Shape{1}, 3.0));
  Var<double> two = tape.constant(Tensor<double>(Shape{1}, 2.0));
  const Tensor<double> c = batch_norm(tape.constant(Tensor<double>(Shape{2, 1, 3, 3}, 4.2)), two,
                                      three, st, true).value();
  for (double v : c.values()) EXPECT_NEAR(v, 3.0, 1e-12);
  // Affine on normalized input.
  const Tensor<double> a = batch_norm(tape.constant(x), two, three, st, true).value();
  for (std::size_t i = 0; i < a.numel(); ++i) EXPECT_NEAR(a[i], 2 * x[i] + 3, 2e-4);
}

TEST(BatchNorm, RunningStatisticsMomentum) {
  Tape<double> tape;
  Tensor<double> x(Shape{2, 1, 1, 2}, {1, 3, 5, 7});  // mean 4, biased var 5
  RunningStats<double> st = RunningStats<double>::neutral(1);
  Var<double> one = tape.constant(Tensor<double>(Shape{1}, 1.0));
  Var<double> zero = tape.constant(Tensor<double>(Shape{1}, 0.0));
  batch_norm(tape.constant(x), one, zero, st, true);
  EXPECT_NEAR(st.mean[0], 0.1 * 4, 1e-12);
  EXPECT_NEAR(st.var[0], 0.9 + 0.1 * 5, 1e-12);
  // Inference uses the running statistics and leaves them alone.
  const Tensor<double> y = batch_norm(tape.constant(x), one, zero, st, false).value();
  EXPECT_NEAR(y[0], (1 - 0.4) / std::sqrt(1.4 + 1e-5), 1e-12);
  EXPECT_NEAR(st.mean[0], 0.4, 1e-12);
}

TEST(Pool, GlobalAverage) {
  Tape<double> tape;
  EXPECT_EQ(global_avg_pool(tape.constant(Tensor<double>(Shape{1, 1, 2, 2}, {1, 3, 5, 7})))
                .value()
                .item(),
            4.0);
  const Tensor<double> c =
      global_avg_pool(tape.constant(Tensor<double>(Shape{2, 3, 4, 5}, 1.25))).value();
  EXPECT_EQ(c.shape(), (Shape{2, 3, 1, 1}));
  for (double v : c.values()) EXPECT_DOUBLE_EQ(v, 1.25);
  const Tensor<double> one = random_tensor({2, 3, 1, 1}, 3);
  EXPECT_EQ(global_avg_pool(tape.constant(one)).value(), one);
}

TEST(Resize, Examples) {
  Tape<double> tape;
  const Tensor<double> x = random_tensor({1, 2, 3, 5}, 4);
  EXPECT_EQ(bilinear_resize(tape.constant(x), 3, 5).value(), x);
  for (double v : bilinear_resize(tape.constant(Tensor<double>(Shape{1, 1, 3, 3}, 0.3)), 7, 4)
                      .value()
                      .values())
    EXPECT_NEAR(v, 0.3, 1e-15);
  const Tensor<double> r =
      bilinear_resize(tape.constant(Tensor<double>(Shape{1, 1, 1, 1}, 2.5)), 4, 4).value();
  EXPECT_EQ(r.numel(), 16u);
  for (double v : r.values()) EXPECT_EQ(v, 2.5);
}

TEST(Resize, HalfPixelCenters) {
  Tape<double> tape;
  // 1x2 -> 1x4: sample centres at 0.25*... map to -0.25, 0.25, 0.75, 1.25.
  const Tensor<double> y =
      bilinear_resize(tape.constant(Tensor<double>(Shape{1, 1, 1, 2}, {0, 1})), 1, 4).value();
  EXPECT_DOUBLE_EQ(y[0], 0.0);
  EXPECT_DOUBLE_EQ(y[1], 0.25);
  EXPECT_DOUBLE_EQ(y[2], 0.75);
  EXPECT_DOUBLE_EQ(y[3], 1.0);
}

TEST(Softmax, Properties) {
  Tape<double> tape;
  const Tensor<double> eq = softmax(tape.constant(Tensor<double>(Shape{1, 4, 1, 1}, 3.0)), 1).value();
  for (double v : eq.values()) EXPECT_DOUBLE_EQ(v, 0.25);
  const Tensor<double> z = random_tensor({2, 5, 3, 3}, 5, -20, 20);
  Tensor<double> shifted = z;
  for (auto& v : shifted.values()) v += 123.0;
  const Tensor<double> p = softmax(tape.constant(z), 1).value();
  const Tensor<double> q = softmax(tape.constant(shifted), 1).value();
  for (std::size_t i = 0; i < p.numel(); ++i) EXPECT_NEAR(p[i], q[i], 1e-12);
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t y = 0; y < 3; ++y)
      for (std::size_t x = 0; x < 3; ++x) {
        double s = 0;
        std::size_t am_p = 0, am_z = 0;
        for (std::size_t c = 0; c < 5; ++c) {
          s += p.at(n, c, y, x);
          if (p.at(n, c, y, x) > p.at(n, am_p, y, x)) am_p = c;
          if (z.at(n, c, y, x) > z.at(n, am_z, y, x)) am_z = c;
        }
        EXPECT_NEAR(s, 1.0, 1e-6);
        EXPECT_EQ(am_p, am_z);
      }
}

TEST(Sigmoid, Values) {
  Tape<double> tape;
  const Tensor<double> s =
      sigmoid(tape.constant(Tensor<double>(Shape{3}, {0, -800, 800}))).value();
  EXPECT_EQ(s[0], 0.5);
  EXPECT_GE(s[1], 0.0);
  EXPECT_LE(s[2], 1.0);
  EXPECT_TRUE(s.all_finite());
}

}  // namespace
}  // namespace elkpp
