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
#include "elkpp/reports.h"

#include <cstdio>
#include <sstream>

#include "elkpp/error.h"

namespace elkpp {

namespace {

std::string describe(const ChainVerdict& v) {
  char buf[256];
  const Footprint& f = v.footprint;
  std::snprintf(buf, sizeof buf, "%-34s extent %3dx%-3d cells %5zu  holes %5zu  %s\n",
                v.label.c_str(), f.height(), f.width(), f.count(), f.holes(),
                v.gridding ? "GRIDDING" : "hole-free");
  return buf;
}

std::string rates_label(int k, std::span<const int> rates) {
  std::string s = std::to_string(k) + "x" + std::to_string(k) + " rates (";
  for (std::size_t i = 0; i < rates.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(rates[i]);
  }
  return s + ")";
}

std::string distances(const NonzeroDistance& d, int k) {
  std::string s = "M = [";
  for (std::size_t i = 0; i < d.distances.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(d.distances[i]);
  }
  s += "], M2 = " + std::to_string(d.m2);
  s += d.covers ? " <= " : " > ";
  return s + std::to_string(k) + (d.covers ? " (formula passes)" : " (formula fails)");
}

}  // namespace

std::vector<ChainVerdict> lkpp_block_verdicts(const LkppConfig& cfg) {
  cfg.validate();
  std::vector<ChainVerdict> out;
  for (std::size_t i = 0; i < 3; ++i) {
    const HadcBlockSpec block = cfg.block(i);
    ChainVerdict v;
    v.label = "block" + std::to_string(i) + " " + std::to_string(block.pairs[0].k1) + "x" +
              std::to_string(block.pairs[0].k2) + " " + hadc_mode_name(block.mode) +
              " rates (1,2,3)";
    v.footprint = hadc_block_footprint(block);
    v.gridding = has_gridding(v.footprint);
    out.push_back(std::move(v));
  }
  return out;
}

std::string rf_report(const LkppConfig& cfg, bool ascii) {
  std::ostringstream out;
  out << "LKPP receptive fields (" << hadc_mode_name(cfg.mode) << ")\n";
  for (const ChainVerdict& v : lkpp_block_verdicts(cfg)) {
    out << describe(v);
    if (ascii) out << v.footprint.to_ascii() << '\n';
  }
  return out.str();
}

std::vector<ChainVerdict> gridding_demo() {
  std::vector<ChainVerdict> out;
  for (const std::vector<int>& rates : {std::vector<int>{2, 2, 2}, std::vector<int>{1, 2, 3}}) {
    ChainVerdict v;
    v.label = rates_label(3, rates);
    v.footprint = footprint_oracle(LayerChainSpec::square(3, rates));
    v.gridding = has_gridding(v.footprint);
    out.push_back(std::move(v));
  }
  return out;
}

std::string gridding_report(bool ascii) {
  std::ostringstream out;
  const std::vector<ChainVerdict> demo = gridding_demo();
  const std::vector<std::vector<int>> rates{{2, 2, 2}, {1, 2, 3}};
  for (std::size_t i = 0; i < demo.size(); ++i) {
    out << describe(demo[i]);
    out << "  " << distances(max_nonzero_distance(rates[i], 3), 3) << '\n';
    if (ascii) out << demo[i].footprint.to_ascii() << '\n';
  }
  return out.str();
}

FactorizationCount factorization_count(int k) {
  if (k < 2) throw DomainError("factorization_count: k must be >= 2");
  FactorizationCount c;
  c.k = k;
  const ConvSpec square{k, k, 1, 1, 1, 1, 1, false, Padding::kSameZero};
  const ConvSpec col{k, 1, 1, 1, 1, 1, 1, false, Padding::kSameZero};
  const ConvSpec row{1, k, 1, 1, 1, 1, 1, false, Padding::kSameZero};
  c.square = param_count(std::span<const ConvSpec>(&square, 1));
  const std::vector<ConvSpec> pair{col, row};
  c.factorized = param_count(pair);
  c.reduction = 1.0 - static_cast<double>(c.factorized) / static_cast<double>(c.square);
  return c;
}

std::string param_report(int k, const ModelConfig& model) {
  std::ostringstream out;
  char buf[256];
  const FactorizationCount c = factorization_count(k);
  std::snprintf(buf, sizeof buf,
                "%dx%d conv: %zu weights\n%dx1 + 1x%d factorized: %zu weights\n"
                "reduction: %.1f%%\n",
                k, k, c.square, k, k, c.factorized, 100.0 * c.reduction);
  out << buf;

  const SegNet net(model);
  out << "\nLKPP blocks (convolution weights)\n";
  for (std::size_t i = 0; i < net.lkpp().blocks().size(); ++i) {
    const HadcBlock& block = net.lkpp().blocks()[i];
    std::snprintf(buf, sizeof buf, "  block%zu %dx%d %s: %zu\n", i, block.spec().pairs[0].k1,
                  block.spec().pairs[0].k2, hadc_mode_name(block.spec().mode),
                  param_count(block.conv_specs()));
    out << buf;
  }
  std::snprintf(buf, sizeof buf, "model parameters: %zu\n",
                net.init<float>(0).params.total_elements());
  out << buf;
  return out.str();
}

}  // namespace elkpp
