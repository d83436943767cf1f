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
#include "elkpp/lkpp.h"
#include "support/fd.h"

namespace elkpp {
namespace {

using testing::random_tensor;

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

LkppConfig small_config(HadcMode mode, int w = 3) {
  LkppConfig cfg;
  cfg.mode = mode;
  cfg.block_widths = {w, w + 1, w + 2};
  cfg.skip_width = w;
  cfg.global_width = 2;
  return cfg;
}

Tensor<double> run_lkpp(const Lkpp& m, ModelState<double>& st, const Tensor<double>& x,
                        bool training = false) {
  Tape<double> tape;
  Context<double> ctx(tape, st, training);
  return m.forward(ctx, tape.constant(x)).value();
}

TEST(HadcBlock, CascadeFootprintIsSolidRectangle) {
  const HadcBlockSpec b = HadcBlockSpec::make(3, 7, HadcMode::kCascade, 4);
  const Footprint f = footprint_oracle(cascade_equivalent_chain(b));
  EXPECT_EQ(cascade_equivalent_chain(b).layers.size(), 6u);
  EXPECT_EQ(f.holes(), 0u);
  EXPECT_EQ(f.count(), static_cast<std::size_t>(f.width() * f.height()));
  EXPECT_EQ(f, hadc_block_footprint(b));
  // Long axis dilated 1,2,3 => 1 + 6 + 12 + 18; short axis 1 + 2*3 on both.
  EXPECT_EQ(f.width(), 1 + 2 * (6 + 12 + 18) / 2 + 6);
  const std::vector<int> r123{1, 2, 3};
  EXPECT_FALSE(has_gridding(LayerChainSpec::square(3, r123)));
}

TEST(HadcBlock, ParallelPairIsCross) {
  const HadcPairSpec p{3, 7, 1};
  const auto ls = p.layers();
  ASSERT_EQ(ls.size(), 2u);
  const Footprint cross = footprint_union(layer_footprint(ls[0]), layer_footprint(ls[1]));
  EXPECT_EQ(cross.count(), 21u + 21u - 9u);
  EXPECT_EQ(cross.width(), 7);
  EXPECT_EQ(cross.height(), 7);
  EXPECT_TRUE(cross.contains(0, 3));
  EXPECT_TRUE(cross.contains(3, 0));
  EXPECT_FALSE(cross.contains(2, 2));
  // Dilated cross: gaps along the long arms only.
  const auto ld = HadcPairSpec{3, 7, 2}.layers();
  const Footprint dc = footprint_union(layer_footprint(ld[0]), layer_footprint(ld[1]));
  EXPECT_EQ(dc.width(), 13);
  EXPECT_TRUE(dc.contains(0, 6));
  EXPECT_FALSE(dc.contains(0, 5));
  EXPECT_TRUE(dc.contains(1, 0));
}

TEST(HadcBlock, DilationOnLongAxisOnly) {
  const auto ls = HadcPairSpec{3, 5, 3}.layers();
  EXPECT_EQ(ls[0].kernel_h, 3);
  EXPECT_EQ(ls[0].kernel_w, 5);
  EXPECT_EQ(ls[0].rate_h, 1);
  EXPECT_EQ(ls[0].rate_w, 3);
  EXPECT_EQ(ls[1].rate_h, 3);
  EXPECT_EQ(ls[1].rate_w, 1);
  EXPECT_EQ((HadcPairSpec{3, 3, 2}.layers().size()), 1u);
}

// With unit weights and neutral statistics the real block's impulse response
// has exactly the analytical footprint, in both modes.
TEST(HadcBlock, ImpulseResponseMatchesFootprint) {
  for (HadcMode mode : {HadcMode::kCascade, HadcMode::kParallel}) {
    for (auto [k1, k2] : {std::pair{3, 3}, {3, 5}, {7, 3}}) {
      const HadcBlockSpec spec = HadcBlockSpec::make(k1, k2, mode, 1);
      HadcBlock block("b", spec, 1);
      ModelState<double> st;
      Rng rng(1);
      block.init(st, rng);
      for (auto& [name, p] : st.params.entries())
        if (ends_with(name, ".weight")) p.value.fill(1.0);
      const int n = 61, c = 30;
      Tensor<double> x(Shape{1, 1, n, n});
      x.at(0, 0, c, c) = 1;
      Tape<double> tape;
      Context<double> ctx(tape, st, false);
      const Tensor<double> y = block.forward(ctx, tape.constant(x)).value();
      std::vector<std::pair<int, int>> offs;
      for (int oy = 0; oy < n; ++oy)
        for (int ox = 0; ox < n; ++ox)
          if (y.at(0, 0, oy, ox) != 0) offs.emplace_back(c - oy, c - ox);
      EXPECT_EQ(Footprint::from_offsets(offs), hadc_block_footprint(spec))
          << hadc_mode_name(mode) << " " << k1 << "x" << k2;
    }
  }
}

TEST(HadcBlock, ChannelMismatchThrows) {
  HadcBlock block("b", HadcBlockSpec::make(3, 5, HadcMode::kCascade, 2), 3);
  ModelState<double> st;
  Rng rng(1);
  block.init(st, rng);
  Tape<double> tape;
  Context<double> ctx(tape, st, false);
  EXPECT_THROW(block.forward(ctx, tape.constant(Tensor<double>(Shape{1, 2, 5, 5}))), ShapeError);
}

TEST(HadcBlock, InvalidSpecs) {
  HadcBlockSpec b = HadcBlockSpec::make(1, 5, HadcMode::kCascade, 2);
  EXPECT_THROW(b.validate(), ConfigError);
  b = HadcBlockSpec::make(3, 5, HadcMode::kCascade, 2);
  b.pairs[1].rate = 3;
  EXPECT_THROW(b.validate(), ConfigError);
  EXPECT_NO_THROW(HadcBlockSpec::make(3, 3, HadcMode::kParallel, 2).validate());
  EXPECT_THROW(parse_hadc_mode("serial"), ConfigError);
  EXPECT_EQ(parse_hadc_mode("parallel"), HadcMode::kParallel);
}

TEST(Lkpp, ChannelArithmetic) {
  LkppConfig cfg;
  cfg.block_widths = {64, 64, 64};
  cfg.skip_width = 64;
  cfg.global_width = 64;
  EXPECT_EQ(cfg.out_channels(), 320);
  cfg.global_branch = false;
  EXPECT_EQ(cfg.out_channels(), 256);
}

TEST(Lkpp, PreservesExtentIncludingOneByOne) {
  for (HadcMode mode : {HadcMode::kCascade, HadcMode::kParallel}) {
    const LkppConfig cfg = small_config(mode);
    Lkpp m("lkpp", cfg, 4);
    ModelState<double> st;
    Rng rng(2);
    m.init(st, rng);
    for (auto [h, w] : {std::pair<std::size_t, std::size_t>{1, 1}, {5, 7}, {9, 4}}) {
      const Tensor<double> y = run_lkpp(m, st, random_tensor({2, 4, h, w}, 3));
      EXPECT_EQ(y.shape(), (Shape{2, static_cast<std::size_t>(cfg.out_channels()), h, w}));
      EXPECT_TRUE(y.all_finite());
    }
  }
}

TEST(Lkpp, ConstantInputGivesUniformSkipAndGlobal) {
  const LkppConfig cfg = small_config(HadcMode::kCascade);
  Lkpp m("lkpp", cfg, 4);
  ModelState<double> st;
  Rng rng(4);
  m.init(st, rng);
  Tensor<double> x(Shape{1, 4, 8, 8});
  for (std::size_t c = 0; c < 4; ++c)
    for (std::size_t i = 0; i < 64; ++i) x[c * 64 + i] = 0.3 * static_cast<double>(c) - 0.4;
  Tape<double> tape;
  Context<double> ctx(tape, st, false);
  const auto branches = m.forward_branches(ctx, tape.constant(x));
  ASSERT_EQ(branches.size(), 5u);
  for (std::size_t b : {std::size_t{0}, std::size_t{4}}) {
    const Tensor<double>& t = branches[b].value();
    for (std::size_t c = 0; c < t.dim(1); ++c)
      for (std::size_t i = 0; i < 64; ++i)
        EXPECT_NEAR(t[c * 64 + i], t[c * 64], 1e-12) << "branch " << b;
  }
}

TEST(GlobalContext, UniformOutputInFloat32) {
  GlobalContextBranch g("g", 3, 4);
  ModelState<float> st;
  Rng rng(5);
  g.init(st, rng);
  Tape<float> tape;
  Context<float> ctx(tape, st, true);
  const Tensor<float> y =
      g.forward(ctx, tape.constant(random_tensor({2, 3, 9, 11}, 6, -3, 3).cast<float>())).value();
  ASSERT_EQ(y.shape(), (Shape{2, 4, 9, 11}));
  for (std::size_t nc = 0; nc < 8; ++nc) {
    float lo = y[nc * 99], hi = y[nc * 99];
    for (std::size_t i = 0; i < 99; ++i) {
      lo = std::min(lo, y[nc * 99 + i]);
      hi = std::max(hi, y[nc * 99 + i]);
    }
    EXPECT_LE(hi - lo, 1e-5f);
  }
}

TEST(GlobalContext, IdentityOnConstantInput) {
  GlobalContextBranch g("g", 2, 2);
  ModelState<double> st;
  Rng rng(5);
  g.init(st, rng);
  Tensor<double>& w = st.params.value("g.conv.weight");
  w.fill(0.0);
  w.at(0, 0, 0, 0) = 1;
  w.at(1, 1, 0, 0) = 1;
  Tape<double> tape;
  Context<double> ctx(tape, st, false);
  const Tensor<double> y =
      g.forward(ctx, tape.constant(Tensor<double>(Shape{1, 2, 4, 3}, 0.8))).value();
  for (double v : y.values()) EXPECT_NEAR(v, 0.8 / std::sqrt(1 + 1e-5), 1e-12);
  const Tensor<double> one = random_tensor({1, 2, 1, 1}, 9);
  Tape<double> t2;
  Context<double> c2(t2, st, false);
  const Tensor<double> y1 = g.forward(c2, t2.constant(one)).value();
  for (std::size_t i = 0; i < 2; ++i) EXPECT_NEAR(y1[i], one[i] / std::sqrt(1 + 1e-5), 1e-12);
}

TEST(Lkpp, BranchIsolation) {
  LkppConfig full = small_config(HadcMode::kParallel);
  LkppConfig ablated = full;
  ablated.global_branch = false;
  Lkpp a("lkpp", full, 3), b("lkpp", ablated, 3);
  ModelState<double> st;
  Rng rng(7);
  a.init(st, rng);
  const Tensor<double> x = random_tensor({2, 3, 6, 6}, 8);
  const Tensor<double> ya = run_lkpp(a, st, x), yb = run_lkpp(b, st, x);
  const std::size_t keep = static_cast<std::size_t>(ablated.out_channels());
  ASSERT_EQ(yb.dim(1), keep);
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t c = 0; c < keep; ++c)
      for (std::size_t i = 0; i < 36; ++i)
        EXPECT_EQ(ya.at(n, c, i / 6, i % 6), yb.at(n, c, i / 6, i % 6));
}

TEST(Lkpp, EveryParameterReceivesGradient) {
  for (HadcMode mode : {HadcMode::kCascade, HadcMode::kParallel}) {
    Lkpp m("lkpp", small_config(mode), 3);
    ModelState<double> st;
    Rng rng(9);
    m.init(st, rng);
    Tape<double> tape;
    Context<double> ctx(tape, st, true);
    const Var<double> y = m.forward(ctx, tape.constant(random_tensor({2, 3, 7, 7}, 10)));
    const Var<double> loss =
        reduce(ReduceOp::kSum, mul(y, tape.constant(random_tensor(y.value().shape(), 11))));
    st.params.zero_grad();
    backward(loss, st.params);
    for (const auto& [name, p] : st.params.entries()) {
      double n2 = 0;
      for (double g : p.grad.values()) n2 += g * g;
      EXPECT_GT(n2, 0.0) << hadc_mode_name(mode) << " " << name;
    }
  }
}

}  // namespace
}  // namespace elkpp
