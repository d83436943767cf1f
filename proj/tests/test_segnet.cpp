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

#include "elkpp/edge_loss.h"
#include "elkpp/error.h"
#include "elkpp/gradcheck.h"
#include "elkpp/segnet.h"
#include "support/fd.h"

namespace elkpp {
namespace {

using testing::random_tensor;

LabelBatch blocky_labels(std::size_t n, std::size_t h, std::size_t w, int classes) {
  LabelBatch l(n, h, w);
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x)
        l.at(b, y, x) = static_cast<std::uint8_t>((y / 8 + x / 8 + b) % classes);
  return l;
}

TEST(SegNet, StageExtentsAndChannels) {
  const SegNet net{ModelConfig{}};
  ModelState<double> st = net.init<double>(1);
  Tape<double> tape;
  Context<double> ctx(tape, st, false);
  const auto f = net.encode(ctx, tape.constant(random_tensor({1, 3, 64, 64}, 2)));
  const std::size_t ext[4] = {16, 8, 4, 2}, ch[4] = {16, 32, 64, 128};
  for (int i = 0; i < 4; ++i)
    EXPECT_EQ(f[i].value().shape(), (Shape{1, ch[i], ext[i], ext[i]})) << "stage " << i;
}

TEST(SegNet, TopFeatureOfWideInput) {
  const SegNet net{tiny_model_config()};
  EXPECT_EQ(net.config().backbone.total_stride(), 32);
  ModelState<double> st = net.init<double>(1);
  Tape<double> tape;
  Context<double> ctx(tape, st, false);
  const auto f = net.encode(ctx, tape.constant(Tensor<double>(Shape{1, 3, 224, 448}, 0.1)));
  EXPECT_EQ(f[3].value().dim(2), 7u);
  EXPECT_EQ(f[3].value().dim(3), 14u);
}

TEST(SegNet, IndivisibleExtentThrows) {
  const SegNet net{tiny_model_config()};
  ModelState<double> st = net.init<double>(1);
  Tape<double> tape;
  Context<double> ctx(tape, st, false);
  EXPECT_THROW(net.forward(ctx, tape.constant(Tensor<double>(Shape{1, 3, 48, 40}))), ShapeError);
}

TEST(SegNet, LogitsShapeForSeveralExtents) {
  const SegNet net{ModelConfig{}};
  ModelState<float> st = net.init<float>(3);
  for (auto [h, w] : {std::pair<std::size_t, std::size_t>{64, 64}, {32, 96}}) {
    Tape<float> tape;
    Context<float> ctx(tape, st, false);
    const Tensor<float> y =
        net.forward(ctx, tape.constant(random_tensor({2, 3, h, w}, 4).cast<float>())).value();
    EXPECT_EQ(y.shape(), (Shape{2, 4, h, w}));
    EXPECT_TRUE(y.all_finite());
  }
}

TEST(SegNet, ZeroImageIsFinite) {
  const SegNet net{ModelConfig{}};
  ModelState<double> st = net.init<double>(5);
  for (bool training : {false, true}) {
    Tape<double> tape;
    Context<double> ctx(tape, st, training);
    const Tensor<double> y =
        net.forward(ctx, tape.constant(Tensor<double>(Shape{2, 3, 64, 64}))).value();
    EXPECT_TRUE(y.all_finite());
  }
}

TEST(SegNet, InitIsSeeded) {
  const SegNet net{tiny_model_config()};
  const ModelState<double> a = net.init<double>(9), b = net.init<double>(9),
                           c = net.init<double>(10);
  bool differs = false;
  for (const auto& [name, p] : a.params.entries()) {
    EXPECT_EQ(p.value, b.params.value(name));
    if (!(p.value == c.params.value(name))) differs = true;
  }
  EXPECT_TRUE(differs);
}

TEST(Transfer, IdentityWeightsGiveRelu) {
  const ModelConfig cfg = tiny_model_config();
  // Stage 0 has as many channels as its transfer layer.
  ASSERT_EQ(cfg.backbone.stages[0].channels, cfg.decoder.transfer_widths[2]);
  const SegNet net{cfg};
  ModelState<double> st = net.init<double>(1);
  Tensor<double>& w = st.params.value("decoder.transfer2.conv.weight");
  w.fill(0);
  for (std::size_t c = 0; c < w.dim(0); ++c) w.at(c, c, 0, 0) = 1;
  const Tensor<double> x = random_tensor({1, w.dim(0), 5, 3}, 8, -1, 1);
  Tape<double> tape;
  Context<double> ctx(tape, st, false);
  const Tensor<double> y = net.transfer(ctx, 0, tape.constant(x)).value();
  ASSERT_EQ(y.shape(), x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i)
    EXPECT_NEAR(y[i], std::max(x[i], 0.0) / std::sqrt(1 + 1e-5), 1e-12);
}

TEST(Transfer, ZeroWeightsCutSkipGradient) {
  const SegNet net{tiny_model_config()};
  for (bool zero : {false, true}) {
    ModelState<double> st = net.init<double>(2);
    if (zero) st.params.value("decoder.transfer2.conv.weight").fill(0);
    Tape<double> tape;
    Context<double> ctx(tape, st, false);
    const auto f = net.encode(ctx, tape.constant(random_tensor({1, 3, 64, 64}, 3)));
    // Re-enter stage 0 as a leaf so its only consumer is the transfer layer.
    const Var<double> leaf0 = tape.leaf(f[0].value());
    const std::array<Var<double>, 3> skips{net.transfer(ctx, 2, f[2]), net.transfer(ctx, 1, f[1]),
                                           net.transfer(ctx, 0, leaf0)};
    const Var<double> out = net.decode(ctx, net.pyramid(ctx, f[3]), skips, 64, 64);
    EXPECT_EQ(out.value().dim(2), 64u);
    EXPECT_EQ(out.value().dim(1), static_cast<std::size_t>(net.config().decoder.widths[2]));
    tape.backward(reduce(ReduceOp::kSum, mul(out, tape.constant(random_tensor(
                                                          out.value().shape(), 4)))));
    double n2 = 0;
    const Tensor<double> g0 = tape.grad(leaf0);
    for (double g : g0.values()) n2 += g * g;
    if (zero)
      EXPECT_EQ(n2, 0.0);
    else
      EXPECT_GT(n2, 0.0);
  }
}

TEST(Decoder, TopDownPathWithZeroSkips) {
  const SegNet net{tiny_model_config()};
  ModelState<double> st = net.init<double>(2);
  Tape<double> tape;
  Context<double> ctx(tape, st, false);
  const auto f = net.encode(ctx, tape.constant(random_tensor({1, 3, 64, 64}, 3)));
  const auto& d = net.config().decoder;
  std::array<Var<double>, 3> skips;
  const std::size_t ext[3] = {4, 8, 16};
  for (int i = 0; i < 3; ++i)
    skips[i] = tape.constant(Tensor<double>(
        Shape{1, static_cast<std::size_t>(d.transfer_widths[i]), ext[i], ext[i]}));
  const Tensor<double> y = net.decode(ctx, net.pyramid(ctx, f[3]), skips, 64, 64).value();
  EXPECT_TRUE(y.all_finite());
  // Wrong skip extent.
  skips[0] = tape.constant(
      Tensor<double>(Shape{1, static_cast<std::size_t>(d.transfer_widths[0]), 5, 5}));
  EXPECT_THROW(net.decode(ctx, net.pyramid(ctx, f[3]), skips, 64, 64), ShapeError);
}

TEST(Head, ShiftInvarianceAndNormalization) {
  const SegNet net{ModelConfig{}};
  ModelState<double> st = net.init<double>(6);
  Tape<double> tape;
  Context<double> ctx(tape, st, false);
  const Var<double> logits = net.forward(ctx, tape.constant(random_tensor({1, 3, 64, 64}, 7)));
  const Tensor<double> p = softmax(logits, 1).value();
  const Tensor<double> q = softmax(add(logits, 17.5), 1).value();
  const std::size_t plane = 64 * 64;
  for (std::size_t i = 0; i < plane; ++i) {
    double s = 0;
    std::size_t am = 0, am_shift = 0;
    for (std::size_t c = 0; c < 4; ++c) {
      s += p[c * plane + i];
      if (p[c * plane + i] > p[am * plane + i]) am = c;
      if (q[c * plane + i] > q[am_shift * plane + i]) am_shift = c;
    }
    ASSERT_NEAR(s, 1.0, 1e-6);
    ASSERT_EQ(am, am_shift);
  }
}

TEST(SegNet, EveryParameterGetsEceGradient) {
  const SegNet net{tiny_model_config()};
  ModelState<double> st = net.init<double>(4);
  Tape<double> tape;
  Context<double> ctx(tape, st, true);
  const Var<double> logits = net.forward(ctx, tape.constant(random_tensor({2, 3, 64, 64}, 5)));
  std::vector<Var<double>> bound;
  for (const auto& [n, v] : tape.bound_parameters()) bound.push_back(v);
  const EdgeLossParams lp;
  const EceTerms<double> t = ece_loss<double>(logits, blocky_labels(2, 64, 64, 3), lp, bound);
  st.params.zero_grad();
  backward(t.total, st.params);
  EXPECT_EQ(bound.size(), st.params.size());
  for (const auto& [name, p] : st.params.entries()) {
    double n2 = 0;
    for (double g : p.grad.values()) n2 += g * g;
    EXPECT_GT(n2, 0.0) << name;
  }
}

TEST(ModelConfig, Validation) {
  ModelConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.num_classes = 1;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = ModelConfig{};
  cfg.backbone.stages[2].channels = 16;  // not increasing
  EXPECT_THROW(cfg.validate(), ConfigError);
}

}  // namespace
}  // namespace elkpp
