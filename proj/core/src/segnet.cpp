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
#include "elkpp/segnet.h"

#include "elkpp/error.h"

namespace elkpp {
namespace {

ConvSpec conv(int k, int in, int out, int stride = 1) {
  ConvSpec s;
  s.kernel_h = s.kernel_w = k;
  s.stride = stride;
  s.in_channels = in;
  s.out_channels = out;
  return s;
}

}  // namespace

void BackboneConfig::validate() const {
  if (stem_channels < 1) throw ConfigError("backbone: stem_channels < 1");
  int prev = 0;
  for (const StageConfig& s : stages) {
    if (s.blocks < 1) throw ConfigError("backbone: each stage needs >= 1 block");
    if (s.stride < 1) throw ConfigError("backbone: stride < 1");
    if (s.channels <= prev) {
      throw ConfigError("backbone: stage channels must strictly increase");
    }
    prev = s.channels;
  }
}

int BackboneConfig::total_stride() const {
  int total = 2;
  for (const StageConfig& s : stages) total *= s.stride;
  return total;
}

void DecoderConfig::validate() const {
  for (int w : widths) {
    if (w < 1) throw ConfigError("decoder: width < 1");
  }
  for (int w : transfer_widths) {
    if (w < 1) throw ConfigError("decoder: transfer width < 1");
  }
  if (head_channels < 1) throw ConfigError("decoder: head_channels < 1");
}

void ModelConfig::validate() const {
  if (input_channels < 1) throw ConfigError("model: input_channels < 1");
  if (num_classes < 2) throw ConfigError("model: num_classes must be >= 2");
  backbone.validate();
  decoder.validate();
  lkpp.validate();
}

ResidualBlock::ResidualBlock(std::string name, int in_channels,
                             int out_channels, int stride)
    : conv1_(name + ".conv1", conv(3, in_channels, out_channels, stride)),
      conv2_(name + ".conv2", conv(3, out_channels, out_channels), false) {
  if (stride != 1 || in_channels != out_channels) {
    projection_ = ConvBnRelu(name + ".proj", conv(1, in_channels, out_channels, stride),
                             false);
    has_projection_ = true;
  }
}

template <typename T>
void ResidualBlock::init(ModelState<T>& state, Rng& rng) const {
  conv1_.init(state, rng);
  conv2_.init(state, rng);
  if (has_projection_) projection_.init(state, rng);
}

template <typename T>
Var<T> ResidualBlock::forward(Context<T>& ctx, const Var<T>& x) const {
  Var<T> y = conv2_.forward(ctx, conv1_.forward(ctx, x));
  Var<T> shortcut = has_projection_ ? projection_.forward(ctx, x) : x;
  return relu(add(y, shortcut));
}

std::vector<ConvSpec> ResidualBlock::conv_specs() const {
  std::vector<ConvSpec> out{conv1_.conv.spec, conv2_.conv.spec};
  if (has_projection_) out.push_back(projection_.conv.spec);
  return out;
}

namespace {

int top_channels(const ModelConfig& c) { return c.backbone.stages[3].channels; }

}  // namespace

SegNet::SegNet(ModelConfig config)
    : config_((config.validate(), config)),
      stem_("encoder.stem", conv(3, config_.input_channels,
                                 config_.backbone.stem_channels, 2)),
      lkpp_("lkpp", config_.lkpp, top_channels(config_)) {
  int channels = config_.backbone.stem_channels;
  for (std::size_t s = 0; s < 4; ++s) {
    const StageConfig& sc = config_.backbone.stages[s];
    for (int b = 0; b < sc.blocks; ++b) {
      const std::string name =
          "encoder.stage" + std::to_string(s + 1) + ".block" + std::to_string(b);
      stages_[s].emplace_back(name, channels, sc.channels, b == 0 ? sc.stride : 1);
      channels = sc.channels;
    }
  }
  const DecoderConfig& d = config_.decoder;
  int prev = lkpp_.out_channels();
  for (std::size_t i = 0; i < 3; ++i) {
    const int enc = config_.backbone.stages[2 - i].channels;
    transfer_[i] = ConvBnRelu("decoder.transfer" + std::to_string(i),
                              conv(1, enc, d.transfer_widths[i]));
    fuse_[i] = ConvBnRelu("decoder.fuse" + std::to_string(i),
                          conv(3, prev + d.transfer_widths[i], d.widths[i]));
    prev = d.widths[i];
  }
  head_conv_ = ConvBnRelu("head.conv", conv(3, prev, d.head_channels));
  ConvSpec cls = conv(1, d.head_channels, config_.num_classes);
  cls.has_bias = true;
  head_classifier_ = Conv2d{"head.classifier", cls};
}

template <typename T>
ModelState<T> SegNet::init(std::uint64_t seed) const {
  ModelState<T> state;
  Rng rng(seed);
  stem_.init(state, rng);
  for (const auto& stage : stages_) {
    for (const ResidualBlock& b : stage) b.init(state, rng);
  }
  lkpp_.init(state, rng);
  for (std::size_t i = 0; i < 3; ++i) {
    transfer_[i].init(state, rng);
    fuse_[i].init(state, rng);
  }
  head_conv_.init(state, rng);
  head_classifier_.init(state, rng);
  return state;
}

template <typename T>
std::array<Var<T>, 4> SegNet::encode(Context<T>& ctx, const Var<T>& image) const {
  const Shape& s = image.shape();
  if (s.size() != 4 || s[1] != static_cast<std::size_t>(config_.input_channels)) {
    throw ShapeError("encoder: expected N x " +
                     std::to_string(config_.input_channels) + " x H x W, got " +
                     shape_str(s));
  }
  const auto div = static_cast<std::size_t>(config_.backbone.total_stride());
  if (s[2] % div != 0 || s[3] % div != 0) {
    throw ShapeError("encoder: input extent " + std::to_string(s[2]) + "x" +
                     std::to_string(s[3]) + " not divisible by " +
                     std::to_string(div));
  }
  std::array<Var<T>, 4> out;
  Var<T> x = stem_.forward(ctx, image);
  for (std::size_t i = 0; i < 4; ++i) {
    for (const ResidualBlock& b : stages_[i]) x = b.forward(ctx, x);
    out[i] = x;
  }
  return out;
}

template <typename T>
Var<T> SegNet::transfer(Context<T>& ctx, std::size_t stage,
                        const Var<T>& feature) const {
  if (stage > 2) throw Error("transfer: stage index must be 0..2");
  return transfer_[2 - stage].forward(ctx, feature);
}

template <typename T>
Var<T> SegNet::pyramid(Context<T>& ctx, const Var<T>& top) const {
  return lkpp_.forward(ctx, top);
}

template <typename T>
Var<T> SegNet::decode(Context<T>& ctx, const Var<T>& lkpp_out,
                      const std::array<Var<T>, 3>& skips, std::size_t out_h,
                      std::size_t out_w) const {
  Var<T> x = lkpp_out;
  for (std::size_t i = 0; i < 3; ++i) {
    const Shape& xs = x.shape();
    const Shape& ss = skips[i].shape();
    if (ss[2] != 2 * xs[2] || ss[3] != 2 * xs[3]) {
      throw ShapeError("decoder: skip extent " + shape_str(ss) +
                       " is not twice " + shape_str(xs));
    }
    Var<T> up = bilinear_resize(x, ss[2], ss[3]);
    x = fuse_[i].forward(ctx, concat(std::vector<Var<T>>{up, skips[i]}, 1));
  }
  return bilinear_resize(x, out_h, out_w);
}

template <typename T>
Var<T> SegNet::classify(Context<T>& ctx, const Var<T>& decoded) const {
  return head_classifier_.forward(ctx, head_conv_.forward(ctx, decoded));
}

template <typename T>
Var<T> SegNet::forward(Context<T>& ctx, const Var<T>& image) const {
  const auto features = encode(ctx, image);
  Var<T> top = pyramid(ctx, features[3]);
  std::array<Var<T>, 3> skips{transfer(ctx, 2, features[2]),
                              transfer(ctx, 1, features[1]),
                              transfer(ctx, 0, features[0])};
  const Shape& s = image.shape();
  return classify(ctx, decode(ctx, top, skips, s[2], s[3]));
}

std::vector<ConvSpec> SegNet::conv_specs() const {
  std::vector<ConvSpec> out{stem_.conv.spec};
  for (const auto& stage : stages_) {
    for (const ResidualBlock& b : stage) {
      for (const ConvSpec& s : b.conv_specs()) out.push_back(s);
    }
  }
  for (const ConvSpec& s : lkpp_.conv_specs()) out.push_back(s);
  for (std::size_t i = 0; i < 3; ++i) {
    out.push_back(transfer_[i].conv.spec);
    out.push_back(fuse_[i].conv.spec);
  }
  out.push_back(head_conv_.conv.spec);
  out.push_back(head_classifier_.spec);
  return out;
}

#define ELKPP_INSTANTIATE(T)                                                   \
  template void ResidualBlock::init(ModelState<T>&, Rng&) const;               \
  template Var<T> ResidualBlock::forward(Context<T>&, const Var<T>&) const;    \
  template ModelState<T> SegNet::init(std::uint64_t) const;                    \
  template std::array<Var<T>, 4> SegNet::encode(Context<T>&, const Var<T>&)    \
      const;                                                                   \
  template Var<T> SegNet::transfer(Context<T>&, std::size_t, const Var<T>&)    \
      const;                                                                   \
  template Var<T> SegNet::pyramid(Context<T>&, const Var<T>&) const;           \
  template Var<T> SegNet::decode(Context<T>&, const Var<T>&,                   \
                                 const std::array<Var<T>, 3>&, std::size_t,    \
                                 std::size_t) const;                           \
  template Var<T> SegNet::classify(Context<T>&, const Var<T>&) const;          \
  template Var<T> SegNet::forward(Context<T>&, const Var<T>&) const;

ELKPP_INSTANTIATE(float)
ELKPP_INSTANTIATE(double)
#undef ELKPP_INSTANTIATE

}  // namespace elkpp
