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

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "elkpp/labels.h"
#include "elkpp/tensor.h"

namespace elkpp {

struct SegmentationSample {
  std::string id;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> image;   // H x W x 3 bytes; value = byte / 255
  std::vector<std::uint8_t> labels;  // H x W; kVoidLabel = void

  void validate(int num_classes) const;
  float pixel(std::size_t y, std::size_t x, std::size_t c) const {
    return static_cast<float>(image[(y * width + x) * 3 + c]) / 255.0f;
  }
};

enum ShapeKind : unsigned { kRectangle = 1, kDisc = 2, kTriangle = 4 };

struct SynthConfig {
  std::size_t height = 64;
  std::size_t width = 64;
  int num_classes = 4;            // class 0 is the background
  int min_shapes_per_class = 1;
  int max_shapes_per_class = 2;
  unsigned shape_kinds = kRectangle | kDisc | kTriangle;
  double min_size = 0.15;         // shape extent as a fraction of the canvas
  double max_size = 0.35;
  double noise_amplitude = 0.08;  // value noise, in [0,1] intensity units
  double color_jitter = 0.06;     // per-shape base colour jitter
  int void_border = 0;
  std::uint64_t seed = 1;

  void validate() const;
};

// Sample i depends only on (cfg, first_index + i).
std::vector<SegmentationSample> generate_synthetic(const SynthConfig& cfg,
                                                   std::size_t count,
                                                   std::size_t first_index = 0);

SegmentationSample load_sample(const std::filesystem::path& image_path,
                               const std::filesystem::path& label_path,
                               int num_classes, std::string id = {});
void save_sample(const std::filesystem::path& image_path,
                 const std::filesystem::path& label_path,
                 const SegmentationSample& sample);

// <root>/images/<id>.ppm, <root>/labels/<id>.pgm, <root>/<split>.txt
void save_dataset_sample(const std::filesystem::path& root,
                         const SegmentationSample& sample);
void write_split(const std::filesystem::path& root, const std::string& split,
                 std::span<const SegmentationSample> samples);
std::vector<std::string> read_split(const std::filesystem::path& root,
                                    const std::string& split);
std::vector<SegmentationSample> load_split(const std::filesystem::path& root,
                                           const std::string& split,
                                           int num_classes);

SegmentationSample mirror_flip(const SegmentationSample& sample, bool apply);

// Seeded Fisher-Yates permutation of [0, n) for one epoch.
std::vector<std::size_t> epoch_permutation(std::size_t n, std::uint64_t seed,
                                           std::uint64_t epoch);
// Pure function of its arguments; true with the given probability.
bool flip_decision(std::uint64_t seed, std::uint64_t iteration,
                   std::size_t slot, double probability);

template <typename T>
struct Batch {
  Tensor<T> images;  // N x 3 x H x W
  LabelBatch labels;
};

template <typename T>
Batch<T> make_batch(std::span<const SegmentationSample> samples,
                    std::span<const std::size_t> indices,
                    const std::vector<bool>& flips = {});

std::uint64_t mix64(std::uint64_t x);

}  // namespace elkpp
