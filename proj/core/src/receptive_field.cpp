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
#include "elkpp/receptive_field.h"

#include <algorithm>
#include <cstdlib>
#include <set>
#include <sstream>

#include "elkpp/error.h"

namespace elkpp {

void LayerChainSpec::validate() const {
  if (layers.empty()) throw ConfigError("layer chain is empty");
  for (const LayerDesc& l : layers) {
    if (l.kernel_h < 1 || l.kernel_w < 1 || l.rate_h < 1 || l.rate_w < 1) {
      throw ConfigError("layer chain: kernel extents and rates must be >= 1");
    }
  }
}

LayerChainSpec LayerChainSpec::square(int k, std::span<const int> rates) {
  LayerChainSpec chain;
  for (int r : rates) chain.layers.push_back({k, k, r, r});
  return chain;
}

Footprint::Footprint(std::vector<std::pair<int, int>> cells)
    : cells_(std::move(cells)) {
  std::sort(cells_.begin(), cells_.end());
  cells_.erase(std::unique(cells_.begin(), cells_.end()), cells_.end());
}

Footprint Footprint::point() { return Footprint({{0, 0}}); }

Footprint Footprint::from_offsets(std::span<const std::pair<int, int>> offsets) {
  return Footprint(std::vector<std::pair<int, int>>(offsets.begin(), offsets.end()));
}

bool Footprint::contains(int dy, int dx) const {
  return std::binary_search(cells_.begin(), cells_.end(), std::make_pair(dy, dx));
}

int Footprint::min_dy() const { return cells_.empty() ? 0 : cells_.front().first; }
int Footprint::max_dy() const { return cells_.empty() ? 0 : cells_.back().first; }
int Footprint::min_dx() const {
  int m = 0;
  for (std::size_t i = 0; i < cells_.size(); ++i) {
    m = i == 0 ? cells_[i].second : std::min(m, cells_[i].second);
  }
  return m;
}
int Footprint::max_dx() const {
  int m = 0;
  for (std::size_t i = 0; i < cells_.size(); ++i) {
    m = i == 0 ? cells_[i].second : std::max(m, cells_[i].second);
  }
  return m;
}

std::size_t Footprint::holes() const {
  return static_cast<std::size_t>(height()) * static_cast<std::size_t>(width()) -
         cells_.size();
}

bool Footprint::symmetric_under_rotation() const {
  for (const auto& [dy, dx] : cells_) {
    if (!contains(-dy, -dx)) return false;
  }
  return true;
}

std::vector<std::uint8_t> Footprint::mask() const {
  const int h = height(), w = width(), y0 = min_dy(), x0 = min_dx();
  std::vector<std::uint8_t> m(static_cast<std::size_t>(h) * w, 0);
  for (const auto& [dy, dx] : cells_) {
    m[static_cast<std::size_t>(dy - y0) * w + (dx - x0)] = 1;
  }
  return m;
}

std::string Footprint::to_ascii() const {
  const auto m = mask();
  const int h = height(), w = width();
  std::ostringstream os;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const bool center = y + min_dy() == 0 && x + min_dx() == 0;
      os << (center ? 'o' : (m[static_cast<std::size_t>(y) * w + x] ? '#' : '.'));
    }
    os << '\n';
  }
  return os.str();
}

Footprint layer_footprint(const LayerDesc& layer) {
  const int kd_h = effective_kernel_extent(layer.kernel_h, layer.rate_h);
  const int kd_w = effective_kernel_extent(layer.kernel_w, layer.rate_w);
  const int top = (kd_h - 1) / 2, left = (kd_w - 1) / 2;
  std::vector<std::pair<int, int>> cells;
  for (int i = 0; i < layer.kernel_h; ++i) {
    for (int j = 0; j < layer.kernel_w; ++j) {
      cells.emplace_back(i * layer.rate_h - top, j * layer.rate_w - left);
    }
  }
  return Footprint::from_offsets(cells);
}

Footprint minkowski_sum(const Footprint& a, const Footprint& b) {
  std::vector<std::pair<int, int>> cells;
  cells.reserve(a.count() * b.count());
  for (const auto& [ay, ax] : a.cells()) {
    for (const auto& [by, bx] : b.cells()) cells.emplace_back(ay + by, ax + bx);
  }
  return Footprint::from_offsets(cells);
}

Footprint footprint_union(const Footprint& a, const Footprint& b) {
  std::vector<std::pair<int, int>> cells(a.cells());
  cells.insert(cells.end(), b.cells().begin(), b.cells().end());
  return Footprint::from_offsets(cells);
}

Footprint footprint_oracle(const LayerChainSpec& chain) {
  chain.validate();
  // Dense canvas large enough for the full chain extent.
  int reach_h = 0, reach_w = 0;
  for (const LayerDesc& l : chain.layers) {
    reach_h += effective_kernel_extent(l.kernel_h, l.rate_h);
    reach_w += effective_kernel_extent(l.kernel_w, l.rate_w);
  }
  const int h = 2 * reach_h + 1, w = 2 * reach_w + 1;
  const int cy = reach_h, cx = reach_w;
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(h) * w, 0);
  std::vector<std::uint8_t> next(mask.size(), 0);
  mask[static_cast<std::size_t>(cy) * w + cx] = 1;
  for (auto it = chain.layers.rbegin(); it != chain.layers.rend(); ++it) {
    const Footprint taps = layer_footprint(*it);
    std::fill(next.begin(), next.end(), 0);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        if (!mask[static_cast<std::size_t>(y) * w + x]) continue;
        for (const auto& [dy, dx] : taps.cells()) {
          next[static_cast<std::size_t>(y + dy) * w + (x + dx)] = 1;
        }
      }
    }
    mask.swap(next);
  }
  std::vector<std::pair<int, int>> cells;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (mask[static_cast<std::size_t>(y) * w + x]) cells.emplace_back(y - cy, x - cx);
    }
  }
  return Footprint::from_offsets(cells);
}

bool has_gridding(const Footprint& footprint) { return footprint.holes() > 0; }

bool has_gridding(const LayerChainSpec& chain) {
  return has_gridding(footprint_oracle(chain));
}

NonzeroDistance max_nonzero_distance(std::span<const int> rates, int k) {
  if (rates.empty()) throw DomainError("max_nonzero_distance: no rates");
  for (int r : rates) {
    if (r < 1) throw DomainError("max_nonzero_distance: rates must be >= 1");
  }
  if (k < 2) throw DomainError("max_nonzero_distance: k must be >= 2");
  NonzeroDistance out;
  const std::size_t n = rates.size();
  out.distances.assign(n, 0);
  out.distances[n - 1] = rates[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) {
    out.distances[i] =
        std::max(std::abs(out.distances[i + 1] - 2 * rates[i]), rates[i]);
  }
  out.m2 = n >= 2 ? out.distances[1] : out.distances[0];
  out.covers = out.m2 <= k;
  return out;
}

std::size_t param_count(std::span<const ConvSpec> specs) {
  std::size_t total = 0;
  for (const ConvSpec& s : specs) {
    total += s.weight_count();
    if (s.has_bias) total += static_cast<std::size_t>(s.out_channels);
  }
  return total;
}

bool hadc_pair_valid(int k1, int k2, bool allow_square_3x3) {
  if (allow_square_3x3 && k1 == 3 && k2 == 3) return true;
  return std::min(k1, k2) >= 2 && k1 != k2 && std::max(k1, k2) > 3;
}

}  // namespace elkpp
