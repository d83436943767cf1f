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
#include "elkpp/dataset.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include "elkpp/error.h"
#include "elkpp/netpbm.h"

namespace elkpp {

std::uint64_t mix64(std::uint64_t x) {
  // splitmix64 finalizer
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

namespace {

// Small explicit generator so datasets do not depend on the standard
// library's distribution implementations.
class Stream {
 public:
  explicit Stream(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next() { return mix64(state_++ * 0x2545f4914f6cdd1dULL); }
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::size_t below(std::size_t n) {
    return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
  }

 private:
  std::uint64_t state_;
};

using Rgb = std::array<double, 3>;

Rgb class_color(int c) {
  static constexpr std::array<Rgb, 8> kPalette{{
      {0.45, 0.45, 0.45},
      {0.85, 0.20, 0.20},
      {0.20, 0.75, 0.25},
      {0.20, 0.30, 0.85},
      {0.90, 0.85, 0.20},
      {0.80, 0.25, 0.80},
      {0.20, 0.80, 0.85},
      {0.95, 0.55, 0.15},
  }};
  if (c < static_cast<int>(kPalette.size())) return kPalette[c];
  const double hue = std::fmod(c * 0.618033988749895, 1.0) * 6.0;
  const double f = hue - std::floor(hue);
  switch (static_cast<int>(hue)) {
    case 0: return {0.9, 0.2 + 0.7 * f, 0.2};
    case 1: return {0.9 - 0.7 * f, 0.9, 0.2};
    case 2: return {0.2, 0.9, 0.2 + 0.7 * f};
    case 3: return {0.2, 0.9 - 0.7 * f, 0.9};
    case 4: return {0.2 + 0.7 * f, 0.2, 0.9};
    default: return {0.9, 0.2, 0.9 - 0.7 * f};
  }
}

// Bilinear value noise on a coarse lattice, range [-1, 1].
std::vector<double> value_noise(Stream& rng, std::size_t h, std::size_t w,
                                std::size_t cell) {
  const std::size_t gh = h / cell + 2, gw = w / cell + 2;
  std::vector<double> grid(gh * gw);
  for (double& g : grid) g = rng.uniform(-1.0, 1.0);
  std::vector<double> out(h * w);
  for (std::size_t y = 0; y < h; ++y) {
    const double fy = static_cast<double>(y) / cell;
    const auto y0 = static_cast<std::size_t>(fy);
    const double ty = fy - y0;
    for (std::size_t x = 0; x < w; ++x) {
      const double fx = static_cast<double>(x) / cell;
      const auto x0 = static_cast<std::size_t>(fx);
      const double tx = fx - x0;
      const double a = grid[y0 * gw + x0], b = grid[y0 * gw + x0 + 1];
      const double c = grid[(y0 + 1) * gw + x0], d = grid[(y0 + 1) * gw + x0 + 1];
      out[y * w + x] = (a * (1 - tx) + b * tx) * (1 - ty) + (c * (1 - tx) + d * tx) * ty;
    }
  }
  return out;
}

struct ShapeDraw {
  int cls;
  unsigned kind;
  double cy, cx, ry, rx;
  std::array<double, 6> tri;  // triangle vertices (y, x)
  Rgb color;
};

bool inside(const ShapeDraw& s, double y, double x) {
  switch (s.kind) {
    case kRectangle:
      return std::abs(y - s.cy) <= s.ry && std::abs(x - s.cx) <= s.rx;
    case kDisc: {
      const double dy = (y - s.cy) / s.ry, dx = (x - s.cx) / s.rx;
      return dy * dy + dx * dx <= 1.0;
    }
    default: {
      auto cross = [&](int i, int j) {
        return (s.tri[2 * j + 1] - s.tri[2 * i + 1]) * (y - s.tri[2 * i]) -
               (s.tri[2 * j] - s.tri[2 * i]) * (x - s.tri[2 * i + 1]);
      };
      const double a = cross(0, 1), b = cross(1, 2), c = cross(2, 0);
      return (a >= 0 && b >= 0 && c >= 0) || (a <= 0 && b <= 0 && c <= 0);
    }
  }
}

SegmentationSample render(const SynthConfig& cfg, std::uint64_t index) {
  const std::size_t h = cfg.height, w = cfg.width;
  std::vector<unsigned> kinds;
  for (unsigned k : {kRectangle, kDisc, kTriangle}) {
    if (cfg.shape_kinds & k) kinds.push_back(k);
  }
  const double extent = static_cast<double>(std::min(h, w));
  SegmentationSample s;
  s.height = h;
  s.width = w;
  s.labels.assign(h * w, 0);
  s.image.assign(h * w * 3, 0);
  std::vector<double> rgb(h * w * 3);

  for (int attempt = 0;; ++attempt) {
    Stream rng(mix64(cfg.seed) ^ mix64(index * 0x100 + attempt + 1));
    std::vector<ShapeDraw> draws;
    for (int c = 1; c < cfg.num_classes; ++c) {
      const int n = cfg.min_shapes_per_class +
                    static_cast<int>(rng.below(static_cast<std::size_t>(
                        cfg.max_shapes_per_class - cfg.min_shapes_per_class + 1)));
      for (int i = 0; i < n; ++i) {
        ShapeDraw d{};
        d.cls = c;
        d.kind = kinds[rng.below(kinds.size())];
        d.ry = 0.5 * extent * rng.uniform(cfg.min_size, cfg.max_size);
        d.rx = 0.5 * extent * rng.uniform(cfg.min_size, cfg.max_size);
        d.cy = rng.uniform(0.0, static_cast<double>(h));
        d.cx = rng.uniform(0.0, static_cast<double>(w));
        const double phase = rng.uniform(0.0, 2 * std::numbers::pi);
        for (int v = 0; v < 3; ++v) {
          const double ang = phase + v * 2 * std::numbers::pi / 3 +
                             rng.uniform(-0.4, 0.4);
          d.tri[2 * v] = d.cy + 1.3 * d.ry * std::sin(ang);
          d.tri[2 * v + 1] = d.cx + 1.3 * d.rx * std::cos(ang);
        }
        d.color = class_color(c);
        for (double& ch : d.color) ch += rng.uniform(-cfg.color_jitter, cfg.color_jitter);
        draws.push_back(d);
      }
    }
    // Paint order is shuffled so no class is always on top.
    for (std::size_t i = draws.size(); i > 1; --i) {
      std::swap(draws[i - 1], draws[rng.below(i)]);
    }

    const std::vector<double> coarse = value_noise(rng, h, w, 8);
    Rgb bg = class_color(0);
    for (double& ch : bg) ch += rng.uniform(-cfg.color_jitter, cfg.color_jitter);
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        const std::size_t i = y * w + x;
        s.labels[i] = 0;
        Rgb colour = bg;
        const double py = y + 0.5, px = x + 0.5;
        for (const ShapeDraw& d : draws) {
          if (inside(d, py, px)) {
            s.labels[i] = static_cast<std::uint8_t>(d.cls);
            colour = d.color;
          }
        }
        const double tex = cfg.noise_amplitude * coarse[i];
        for (int c = 0; c < 3; ++c) {
          const double grain = 0.5 * cfg.noise_amplitude * rng.uniform(-1.0, 1.0);
          rgb[i * 3 + c] = colour[c] + tex + grain;
        }
      }
    }
    std::vector<std::size_t> hist(cfg.num_classes, 0);
    for (auto v : s.labels) ++hist[v];
    const bool all_present = std::all_of(hist.begin(), hist.end(),
                                         [](std::size_t n) { return n > 0; });
    if (all_present || attempt >= 63) {
      if (!all_present) {
        throw Error("synthetic: could not place every class after 64 attempts");
      }
      break;
    }
  }
  for (std::size_t i = 0; i < rgb.size(); ++i) {
    const double v = std::clamp(rgb[i], 0.0, 1.0);
    s.image[i] = static_cast<std::uint8_t>(std::lround(v * 255.0));
  }
  const auto b = static_cast<std::size_t>(cfg.void_border);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      if (y < b || x < b || y + b >= h || x + b >= w) s.labels[y * w + x] = kVoidLabel;
    }
  }
  return s;
}

}  // namespace

void SegmentationSample::validate(int num_classes) const {
  if (image.size() != height * width * 3 || labels.size() != height * width) {
    throw ShapeError("sample " + id + ": image and labels do not share an extent");
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != kVoidLabel && labels[i] >= num_classes) {
      throw FormatError("sample " + id + ": label " + std::to_string(labels[i]) +
                        " at (x=" + std::to_string(i % width) + ", y=" +
                        std::to_string(i / width) + ") outside [0, " +
                        std::to_string(num_classes) + ") and not void");
    }
  }
}

void SynthConfig::validate() const {
  if (num_classes < 2 || num_classes > 254) {
    throw ConfigError("synthetic: class count must be in [2, 254]");
  }
  if (height == 0 || width == 0 || height % 32 != 0 || width % 32 != 0) {
    throw ConfigError("synthetic: extents must be positive multiples of 32");
  }
  if (min_shapes_per_class < 1 || max_shapes_per_class < min_shapes_per_class) {
    throw ConfigError("synthetic: need 1 <= min_shapes_per_class <= max_shapes_per_class");
  }
  if ((shape_kinds & (kRectangle | kDisc | kTriangle)) == 0) {
    throw ConfigError("synthetic: no shape kinds enabled");
  }
  if (!(min_size > 0 && max_size >= min_size && max_size <= 1)) {
    throw ConfigError("synthetic: need 0 < min_size <= max_size <= 1");
  }
  if (noise_amplitude < 0 || color_jitter < 0) {
    throw ConfigError("synthetic: noise amplitudes must be nonnegative");
  }
  if (void_border < 0 || 2 * static_cast<std::size_t>(void_border) >= std::min(height, width)) {
    throw ConfigError("synthetic: void border must be >= 0 and leave an interior");
  }
}

std::vector<SegmentationSample> generate_synthetic(const SynthConfig& cfg,
                                                   std::size_t count,
                                                   std::size_t first_index) {
  cfg.validate();
  std::vector<SegmentationSample> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    SegmentationSample s = render(cfg, first_index + i);
    char id[32];
    std::snprintf(id, sizeof id, "synth_%06zu", first_index + i);
    s.id = id;
    out.push_back(std::move(s));
  }
  return out;
}

SegmentationSample load_sample(const std::filesystem::path& image_path,
                               const std::filesystem::path& label_path,
                               int num_classes, std::string id) {
  const Raster img = read_netpbm(image_path);
  const Raster lab = read_netpbm(label_path);
  if (img.channels != 3) throw FormatError(image_path.string() + ": expected P6 (RGB)");
  if (lab.channels != 1) throw FormatError(label_path.string() + ": expected P5 (gray)");
  if (img.width != lab.width || img.height != lab.height) {
    throw FormatError(image_path.string() + ": extent differs from " + label_path.string());
  }
  SegmentationSample s;
  s.id = id.empty() ? image_path.stem().string() : std::move(id);
  s.height = img.height;
  s.width = img.width;
  s.image = img.pixels;
  s.labels = lab.pixels;
  try {
    s.validate(num_classes);
  } catch (const Error& e) {
    throw FormatError(label_path.string() + ": " + e.what());
  }
  return s;
}

void save_sample(const std::filesystem::path& image_path,
                 const std::filesystem::path& label_path,
                 const SegmentationSample& sample) {
  write_netpbm(image_path, Raster{sample.width, sample.height, 3, sample.image});
  write_netpbm(label_path, Raster{sample.width, sample.height, 1, sample.labels});
}

void save_dataset_sample(const std::filesystem::path& root,
                         const SegmentationSample& sample) {
  std::filesystem::create_directories(root / "images");
  std::filesystem::create_directories(root / "labels");
  save_sample(root / "images" / (sample.id + ".ppm"),
              root / "labels" / (sample.id + ".pgm"), sample);
}

void write_split(const std::filesystem::path& root, const std::string& split,
                 std::span<const SegmentationSample> samples) {
  std::filesystem::create_directories(root);
  std::ofstream f(root / (split + ".txt"), std::ios::binary);
  if (!f) throw FormatError((root / (split + ".txt")).string() + ": cannot open for writing");
  for (const auto& s : samples) f << s.id << '\n';
}

std::vector<std::string> read_split(const std::filesystem::path& root,
                                    const std::string& split) {
  const auto path = root / (split + ".txt");
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError(path.string() + ": cannot open split file");
  std::vector<std::string> ids;
  std::string line;
  while (std::getline(f, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ids.push_back(line);
  }
  return ids;
}

std::vector<SegmentationSample> load_split(const std::filesystem::path& root,
                                           const std::string& split,
                                           int num_classes) {
  std::vector<SegmentationSample> out;
  for (const std::string& id : read_split(root, split)) {
    out.push_back(load_sample(root / "images" / (id + ".ppm"),
                              root / "labels" / (id + ".pgm"), num_classes, id));
  }
  if (out.empty()) throw FormatError((root / (split + ".txt")).string() + ": empty split");
  return out;
}

SegmentationSample mirror_flip(const SegmentationSample& sample, bool apply) {
  if (!apply) return sample;
  SegmentationSample out = sample;
  const std::size_t w = sample.width;
  for (std::size_t y = 0; y < sample.height; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const std::size_t src = y * w + x, dst = y * w + (w - 1 - x);
      out.labels[dst] = sample.labels[src];
      for (int c = 0; c < 3; ++c) out.image[dst * 3 + c] = sample.image[src * 3 + c];
    }
  }
  return out;
}

std::vector<std::size_t> epoch_permutation(std::size_t n, std::uint64_t seed,
                                           std::uint64_t epoch) {
  std::vector<std::size_t> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = i;
  Stream rng(mix64(seed ^ 0x5eedULL) ^ mix64(epoch + 0x1000));
  for (std::size_t i = n; i > 1; --i) std::swap(p[i - 1], p[rng.below(i)]);
  return p;
}

bool flip_decision(std::uint64_t seed, std::uint64_t iteration,
                   std::size_t slot, double probability) {
  const std::uint64_t h =
      mix64(mix64(seed ^ 0xf11bULL) ^ mix64(iteration) ^ mix64(slot * 0x9e37ULL + 7));
  return static_cast<double>(h >> 11) * 0x1.0p-53 < probability;
}

template <typename T>
Batch<T> make_batch(std::span<const SegmentationSample> samples,
                    std::span<const std::size_t> indices,
                    const std::vector<bool>& flips) {
  if (indices.empty()) throw ShapeError("make_batch: empty batch");
  if (!flips.empty() && flips.size() != indices.size()) {
    throw ShapeError("make_batch: flip vector length differs from batch");
  }
  const std::size_t h = samples[indices[0]].height, w = samples[indices[0]].width;
  const std::size_t n = indices.size(), plane = h * w;
  Batch<T> b{Tensor<T>(Shape{n, 3, h, w}), LabelBatch(n, h, w)};
  for (std::size_t k = 0; k < n; ++k) {
    if (indices[k] >= samples.size()) throw ShapeError("make_batch: index out of range");
    const SegmentationSample& s = samples[indices[k]];
    if (s.height != h || s.width != w) throw ShapeError("make_batch: mixed extents");
    const bool flip = !flips.empty() && flips[k];
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        const std::size_t sx = flip ? w - 1 - x : x;
        const std::size_t src = y * w + sx;
        b.labels.values[k * plane + y * w + x] = s.labels[src];
        for (std::size_t c = 0; c < 3; ++c) {
          b.images[((k * 3 + c) * h + y) * w + x] =
              static_cast<T>(s.image[src * 3 + c]) / static_cast<T>(255);
        }
      }
    }
  }
  return b;
}

template Batch<float> make_batch(std::span<const SegmentationSample>,
                                 std::span<const std::size_t>, const std::vector<bool>&);
template Batch<double> make_batch(std::span<const SegmentationSample>,
                                  std::span<const std::size_t>, const std::vector<bool>&);

}  // namespace elkpp
