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
#include "elkpp/lkpp.h"

#include "elkpp/error.h"

namespace elkpp {

const char* hadc_mode_name(HadcMode mode) {
  return mode == HadcMode::kCascade ? "cascade" : "parallel";
}

HadcMode parse_hadc_mode(const std::string& name) {
  if (name == "cascade") return HadcMode::kCascade;
  if (name == "parallel") return HadcMode::kParallel;
  throw ConfigError("unknown LKPP mode '" + name + "' (cascade|parallel)");
}

std::vector<LayerDesc> HadcPairSpec::layers() const {
  if (is_square()) return {{k1, k1, rate, rate}};
  // Rate goes on whichever axis carries the longer extent.
  auto oriented = [this](int kh, int kw) {
    LayerDesc l{kh, kw, 1, 1};
    if (kh > kw) l.rate_h = rate;
    if (kw > kh) l.rate_w = rate;
    return l;
  };
  return {oriented(k1, k2), oriented(k2, k1)};
}

HadcBlockSpec HadcBlockSpec::make(int k1, int k2, HadcMode mode, int width) {
  HadcBlockSpec spec;
  for (int i = 0; i < 3; ++i) spec.pairs[i] = {k1, k2, i + 1};
  spec.mode = mode;
  spec.width = width;
  return spec;
}

void HadcBlockSpec::validate() const {
  if (width < 1) throw ConfigError("HADC block width must be >= 1");
  for (int i = 0; i < 3; ++i) {
    const HadcPairSpec& p = pairs[i];
    if (p.rate != i + 1) throw ConfigError("HADC block rates must be (1, 2, 3)");
    if (!hadc_pair_valid(p.k1, p.k2, /*allow_square_3x3=*/true)) {
      throw ConfigError("invalid HADC kernel pair " + std::to_string(p.k1) +
                        "x" + std::to_string(p.k2));
    }
  }
}

LayerChainSpec cascade_equivalent_chain(const HadcBlockSpec& block) {
  LayerChainSpec chain;
  for (const HadcPairSpec& p : block.pairs) {
    for (const LayerDesc& l : p.layers()) chain.layers.push_back(l);
  }
  return chain;
}

Footprint hadc_block_footprint(const HadcBlockSpec& block) {
  if (block.mode == HadcMode::kCascade) {
    return footprint_oracle(cascade_equivalent_chain(block));
  }
  Footprint total = Footprint::point();
  for (const HadcPairSpec& p : block.pairs) {
    Footprint stage;
    for (const LayerDesc& l : p.layers()) {
      stage = stage.count() == 0 ? layer_footprint(l)
                                 : footprint_union(stage, layer_footprint(l));
    }
    total = minkowski_sum(total, stage);
  }
  return total;
}

HadcBlockSpec LkppConfig::block(std::size_t i) const {
  return HadcBlockSpec::make(kernels.at(i)[0], kernels.at(i)[1], mode,
                             block_widths.at(i));
}

int LkppConfig::out_channels() const {
  int total = block_widths[0] + block_widths[1] + block_widths[2];
  if (skip_branch) total += skip_width;
  if (global_branch) total += global_width;
  return total;
}

void LkppConfig::validate() const {
  for (std::size_t i = 0; i < 3; ++i) block(i).validate();
  if (skip_branch && skip_width < 1) throw ConfigError("LKPP skip width < 1");
  if (global_branch && global_width < 1) throw ConfigError("LKPP global width < 1");
}

// ---------------------------------------------------------------------------

HadcBlock::HadcBlock(std::string name, HadcBlockSpec spec, int in_channels)
    : name_(std::move(name)), spec_(spec) {
  spec_.validate();
  int channels = in_channels;
  for (std::size_t i = 0; i < spec_.pairs.size(); ++i) {
    const HadcPairSpec& pair = spec_.pairs[i];
    const std::string prefix = name_ + ".pair" + std::to_string(i);
    const auto layers = pair.layers();
    auto conv_spec = [&](const LayerDesc& l, int in) {
      ConvSpec s;
      s.kernel_h = l.kernel_h;
      s.kernel_w = l.kernel_w;
      s.rate_h = l.rate_h;
      s.rate_w = l.rate_w;
      s.in_channels = in;
      s.out_channels = spec_.width;
      return s;
    };
    Stage stage;
    if (pair.is_square()) {
      stage.first = ConvBnRelu(prefix, conv_spec(layers[0], channels));
    } else if (spec_.mode == HadcMode::kCascade) {
      stage.first = ConvBnRelu(prefix + ".a", conv_spec(layers[0], channels));
      stage.second = ConvBnRelu(prefix + ".b", conv_spec(layers[1], spec_.width));
      stage.has_second = true;
    } else {
      stage.parallel = true;
      stage.branch_a = Conv2d{prefix + ".a.conv", conv_spec(layers[0], channels)};
      stage.branch_b = Conv2d{prefix + ".b.conv", conv_spec(layers[1], channels)};
      stage.merge_bn = BatchNorm{prefix + ".bn", spec_.width};
    }
    stages_.push_back(std::move(stage));
    channels = spec_.width;
  }
}

template <typename T>
void HadcBlock::init(ModelState<T>& state, Rng& rng) const {
  for (const Stage& s : stages_) {
    if (s.parallel) {
      s.branch_a.init(state, rng);
      s.branch_b.init(state, rng);
      s.merge_bn.init(state);
    } else {
      s.first.init(state, rng);
      if (s.has_second) s.second.init(state, rng);
    }
  }
}

template <typename T>
Var<T> HadcBlock::forward(Context<T>& ctx, const Var<T>& x) const {
  Var<T> y = x;
  for (const Stage& s : stages_) {
    if (s.parallel) {
      Var<T> merged = add(s.branch_a.forward(ctx, y), s.branch_b.forward(ctx, y));
      y = relu(s.merge_bn.forward(ctx, merged));
    } else {
      y = s.first.forward(ctx, y);
      if (s.has_second) y = s.second.forward(ctx, y);
    }
  }
  return y;
}

std::vector<ConvSpec> HadcBlock::conv_specs() const {
  std::vector<ConvSpec> out;
  for (const Stage& s : stages_) {
    if (s.parallel) {
      out.push_back(s.branch_a.spec);
      out.push_back(s.branch_b.spec);
    } else {
      out.push_back(s.first.conv.spec);
      if (s.has_second) out.push_back(s.second.conv.spec);
    }
  }
  return out;
}

GlobalContextBranch::GlobalContextBranch(std::string name, int in_channels,
                                         int width)
    : conv_{name + ".conv", ConvSpec{1, 1, 1, 1, 1, in_channels, width}},
      bn_{name + ".bn", width} {}

template <typename T>
void GlobalContextBranch::init(ModelState<T>& state, Rng& rng) const {
  conv_.init(state, rng);
  bn_.init(state);
}

template <typename T>
Var<T> GlobalContextBranch::forward(Context<T>& ctx, const Var<T>& x) const {
  const Shape& s = x.shape();
  Var<T> pooled = global_avg_pool(x);
  Var<T> y = bn_.forward(ctx, conv_.forward(ctx, pooled));
  return bilinear_resize(y, s[2], s[3]);
}

Lkpp::Lkpp(std::string name, LkppConfig config, int in_channels)
    : config_(config),
      in_channels_(in_channels),
      skip_(name + ".skip", ConvSpec{1, 1, 1, 1, 1, in_channels, config.skip_width}),
      global_(name + ".global", in_channels, config.global_width) {
  config_.validate();
  for (std::size_t i = 0; i < 3; ++i) {
    blocks_.emplace_back(name + ".block" + std::to_string(i), config_.block(i),
                         in_channels);
  }
}

template <typename T>
void Lkpp::init(ModelState<T>& state, Rng& rng) const {
  if (config_.skip_branch) skip_.init(state, rng);
  for (const HadcBlock& b : blocks_) b.init(state, rng);
  if (config_.global_branch) global_.init(state, rng);
}

template <typename T>
std::vector<Var<T>> Lkpp::forward_branches(Context<T>& ctx,
                                           const Var<T>& x) const {
  std::vector<Var<T>> out;
  if (config_.skip_branch) out.push_back(skip_.forward(ctx, x));
  for (const HadcBlock& b : blocks_) out.push_back(b.forward(ctx, x));
  if (config_.global_branch) out.push_back(global_.forward(ctx, x));
  const Shape& s = x.shape();
  for (const Var<T>& v : out) {
    if (v.shape()[2] != s[2] || v.shape()[3] != s[3]) {
      throw ShapeError("LKPP branch changed spatial extent to " +
                       shape_str(v.shape()));
    }
  }
  return out;
}

template <typename T>
Var<T> Lkpp::forward(Context<T>& ctx, const Var<T>& x) const {
  return concat(forward_branches(ctx, x), 1);
}

std::vector<ConvSpec> Lkpp::conv_specs() const {
  std::vector<ConvSpec> out;
  if (config_.skip_branch) out.push_back(skip_.conv.spec);
  for (const HadcBlock& b : blocks_) {
    for (const ConvSpec& s : b.conv_specs()) out.push_back(s);
  }
  if (config_.global_branch) out.push_back(global_.conv_spec());
  return out;
}

#define ELKPP_INSTANTIATE(T)                                                   \
  template void HadcBlock::init(ModelState<T>&, Rng&) const;                   \
  template Var<T> HadcBlock::forward(Context<T>&, const Var<T>&) const;        \
  template void GlobalContextBranch::init(ModelState<T>&, Rng&) const;         \
  template Var<T> GlobalContextBranch::forward(Context<T>&, const Var<T>&)     \
      const;                                                                   \
  template void Lkpp::init(ModelState<T>&, Rng&) const;                        \
  template Var<T> Lkpp::forward(Context<T>&, const Var<T>&) const;             \
  template std::vector<Var<T>> Lkpp::forward_branches(Context<T>&,             \
                                                      const Var<T>&) const;

ELKPP_INSTANTIATE(float)
ELKPP_INSTANTIATE(double)
#undef ELKPP_INSTANTIATE

}  // namespace elkpp
