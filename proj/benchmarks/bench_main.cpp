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
#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "elkpp/nn.h"
#include "elkpp/receptive_field.h"
#include "elkpp/segnet.h"

namespace {

using elkpp::Shape;
using elkpp::Tape;
using elkpp::Tensor;

Tensor<float> noise(Shape s, unsigned seed) {
  Tensor<float> t(s);
  std::mt19937 rng(seed);
  std::normal_distribution<float> z;
  for (auto& v : t.values()) v = z(rng);
  return t;
}

// args: channels, extent, rate
void BM_ConvForward(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0));
  const auto n = static_cast<std::size_t>(state.range(1));
  const int r = static_cast<int>(state.range(2));
  const elkpp::ConvSpec spec{3, 3, r, r, 1, c, c, true, elkpp::Padding::kSameZero};
  const Tensor<float> x = noise(Shape{4, static_cast<std::size_t>(c), n, n}, 1);
  const Tensor<float> w = noise(spec.weight_shape(), 2);
  const Tensor<float> b = noise(Shape{static_cast<std::size_t>(c)}, 3);
  for (auto _ : state) {
    Tape<float> tape;
    auto y = elkpp::dilated_conv2d(tape.constant(x), spec, tape.constant(w), tape.constant(b));
    benchmark::DoNotOptimize(y.value()[0]);
  }
}
BENCHMARK(BM_ConvForward)->Args({16, 32, 1})->Args({32, 16, 2})->Args({64, 16, 3});

void BM_ConvBackward(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0));
  const auto n = static_cast<std::size_t>(state.range(1));
  const elkpp::ConvSpec spec{3, 3, 2, 2, 1, c, c, true, elkpp::Padding::kSameZero};
  const Tensor<float> x = noise(Shape{4, static_cast<std::size_t>(c), n, n}, 1);
  const Tensor<float> w = noise(spec.weight_shape(), 2);
  const Tensor<float> b = noise(Shape{static_cast<std::size_t>(c)}, 3);
  for (auto _ : state) {
    Tape<float> tape;
    auto wv = tape.leaf(w);
    auto y = elkpp::dilated_conv2d(tape.leaf(x), spec, wv, tape.leaf(b));
    tape.backward(elkpp::sum(y));
    benchmark::DoNotOptimize(tape.grad(wv)[0]);
  }
}
BENCHMARK(BM_ConvBackward)->Args({16, 32})->Args({64, 16});

void BM_FootprintOracle(benchmark::State& state) {
  const std::vector<int> rates(static_cast<std::size_t>(state.range(0)), 3);
  const auto chain = elkpp::LayerChainSpec::square(3, rates);
  for (auto _ : state) benchmark::DoNotOptimize(elkpp::footprint_oracle(chain).count());
}
BENCHMARK(BM_FootprintOracle)->Arg(3)->Arg(8);

void BM_SegNetForward(benchmark::State& state) {
  const elkpp::SegNet net{elkpp::ModelConfig{}};
  auto st = net.init<float>(1);
  const Tensor<float> x = noise(Shape{8, 3, 64, 64}, 4);
  for (auto _ : state) {
    Tape<float> tape;
    elkpp::Context<float> ctx(tape, st, false);
    benchmark::DoNotOptimize(net.forward(ctx, tape.constant(x)).value()[0]);
  }
}
BENCHMARK(BM_SegNetForward)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
