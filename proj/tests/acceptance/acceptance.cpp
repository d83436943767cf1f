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
// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria. `--out DIR` keeps the training artifacts of
// criteria 8 and 9; `--only N[,M..]` runs a subset.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "elkpp/checkpoint.h"
#include "elkpp/config.h"
#include "elkpp/dataset.h"
#include "elkpp/edge_loss.h"
#include "elkpp/gradcheck.h"
#include "elkpp/metrics.h"
#include "elkpp/nn.h"
#include "elkpp/receptive_field.h"
#include "elkpp/reports.h"
#include "elkpp/trainer.h"

namespace fs = std::filesystem;
using namespace elkpp;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// 1. Gradient fidelity.
Outcome gradient_fidelity() {
  const auto t0 = Clock::now();
  const GradcheckReport loss = gradcheck_loss_only({});
  const GradcheckReport model = gradcheck_model({});
  const double secs = seconds_since(t0);
  const SegNet net{tiny_model_config()};
  const std::size_t params = net.init<double>(1).params.total_elements();
  Outcome o;
  o.pass = loss.max_rel_error <= 1e-6 && model.max_rel_error <= 1e-3 && params <= 5000 &&
           secs <= 300;
  o.detail = "loss-only " + fmt("%.2e", loss.max_rel_error) + " (<= 1e-6), model " +
             fmt("%.2e", model.max_rel_error) + " (<= 1e-3, worst " + model.worst + ", " +
             std::to_string(params) + " params), " + fmt("%.1f", secs) + " s (<= 300)";
  return o;
}

// 2. Gridding reproduction.
Outcome gridding() {
  const auto t0 = Clock::now();
  const std::vector<int> r222{2, 2, 2}, r123{1, 2, 3};
  const Footprint grid = footprint_oracle(LayerChainSpec::square(3, r222));
  bool checker = grid.width() == 13 && grid.height() == 13;
  for (int dy = -6; dy <= 6; ++dy)
    for (int dx = -6; dx <= 6; ++dx)
      checker = checker && grid.contains(dy, dx) == (dy % 2 == 0 && dx % 2 == 0);
  const Footprint solid = footprint_oracle(LayerChainSpec::square(3, r123));
  const bool solid_ok = !has_gridding(solid) && solid.count() == 169;
  int blocks_ok = 0;
  for (const auto& v : lkpp_block_verdicts(LkppConfig{}))
    blocks_ok += !v.gridding && v.footprint.holes() == 0;
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = checker && has_gridding(grid) && solid_ok && blocks_ok == 3 && secs <= 1.0;
  o.detail = std::string("rate-2 stack ") + (checker ? "checkerboard" : "NOT checkerboard") +
             " (" + std::to_string(grid.count()) + "/169 cells), rates 1,2,3 " +
             (solid_ok ? "hole-free" : "holes") + ", LKPP blocks hole-free " +
             std::to_string(blocks_ok) + "/3, " + fmt("%.3f", secs) + " s (<= 1)";
  return o;
}

// 3. Parameter claim.
Outcome parameters() {
  const ConvSpec sq{5, 5, 1, 1, 1, 1, 1, false, Padding::kSameZero};
  const ConvSpec a{5, 1, 1, 1, 1, 1, 1, false, Padding::kSameZero};
  const ConvSpec b{1, 5, 1, 1, 1, 1, 1, false, Padding::kSameZero};
  const std::size_t square = param_count(std::vector<ConvSpec>{sq});
  const std::size_t fact = param_count(std::vector<ConvSpec>{a, b});
  const FactorizationCount c = factorization_count(5);
  const std::string report = param_report(5, ModelConfig{});
  Outcome o;
  o.pass = square == 25 && fact == 10 && c.square == 25 && c.factorized == 10 &&
           c.reduction == 1.0 - 10.0 / 25.0 && report.find("60.0%") != std::string::npos;
  o.detail = std::to_string(fact) + " vs " + std::to_string(square) + " weights, reduction " +
             fmt("%.1f%%", 100 * c.reduction) + " (report prints " +
             (report.find("60.0%") != std::string::npos ? "60.0%" : "no 60.0%") + ")";
  return o;
}

// Nonzero pattern of an impulse through real all-ones convolutions.
Footprint impulse_footprint(const std::vector<LayerDesc>& layers, int n) {
  Tape<double> tape;
  Tensor<double> x(Shape{1, 1, static_cast<std::size_t>(n), static_cast<std::size_t>(n)});
  const int c = n / 2;
  x.at(0, 0, c, c) = 1;
  Var<double> v = tape.constant(x);
  for (const auto& l : layers) {
    const ConvSpec s{l.kernel_h, l.kernel_w, l.rate_h, l.rate_w, 1, 1, 1, false,
                     Padding::kSameZero};
    v = dilated_conv2d(v, s, tape.constant(Tensor<double>(s.weight_shape(), 1.0)));
  }
  std::vector<std::pair<int, int>> offs;
  for (int y = 0; y < n; ++y)
    for (int z = 0; z < n; ++z)
      if (v.value().at(0, 0, y, z) != 0) offs.emplace_back(c - y, c - z);
  return Footprint::from_offsets(offs);
}

// 4. Receptive-field equivalence.
Outcome rf_equivalence() {
  LayerChainSpec fact, square;
  fact.layers = {{5, 1, 1, 1}, {1, 5, 1, 1}};
  square.layers = {{5, 5, 1, 1}};
  const Footprint f = footprint_oracle(fact), s = footprint_oracle(square);
  const Footprint fi = impulse_footprint(fact.layers, 15), si = impulse_footprint(square.layers, 15);
  Outcome o;
  o.pass = f == s && fi == f && si == s && f.count() == 25;
  o.detail = std::string("5x1->1x5 ") + (f == s ? "==" : "!=") + " 5x5 (" +
             std::to_string(f.count()) + " cells), impulse responses " +
             (fi == f && si == s ? "agree" : "DISAGREE");
  return o;
}

// 5. Loss reduction.
Outcome loss_reduction() {
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> z(0, 2);
  EdgeLossParams p;
  p.lambda1 = 0;
  p.lambda2 = 0;
  double worst = 0;
  for (int b = 0; b < 100; ++b) {
    Tensor<double> logits(Shape{2, 4, 8, 8});
    for (auto& v : logits.values()) v = z(rng);
    LabelBatch l(2, 8, 8);
    for (auto& v : l.values) v = rng() % 13 == 0 ? kVoidLabel : static_cast<std::uint8_t>(rng() % 4);
    Tensor<double> w(Shape{16});
    for (auto& v : w.values()) v = z(rng);
    Tape<double> tape;
    const std::vector<Var<double>> ps{tape.leaf(w)};
    const Var<double> lv = tape.leaf(logits);
    const double ece = ece_loss<double>(lv, l, p, ps).total.value().item();
    const double ce = ce_loss(lv, l, p).value.value().item();
    worst = std::max(worst, std::abs(ece - ce));
  }
  Outcome o;
  o.pass = worst <= 1e-12;
  o.detail = "max |ECE - CE| over 100 batches " + fmt("%.3g", worst) + " (<= 1e-12)";
  return o;
}

// 6. Edge extractor analytics.
Outcome edge_analytics() {
  double template_sum = 0;
  for (int k = 1; k <= 4; ++k) {
    double s = 0;
    const Tensor<double> t = laplacian_template<double>(k);
    for (double v : t.values()) s += v;
    template_sum = std::max(template_sum, std::abs(s));
  }
  double interior = 0;
  for (int k = 1; k <= 4; ++k) {
    const std::size_t n = 40;
    Tensor<double> c(Shape{1, 2, n, n}, 0.42), ramp(Shape{1, 2, n, n});
    for (std::size_t ch = 0; ch < 2; ++ch)
      for (std::size_t y = 0; y < n; ++y)
        for (std::size_t x = 0; x < n; ++x)
          ramp.at(0, ch, y, x) = 0.01 * static_cast<double>(x) - 0.007 * static_cast<double>(y) +
                                 0.2 * static_cast<double>(ch);
    for (const Tensor<double>* in : {&c, &ramp}) {
      Tape<double> tape;
      const Tensor<double> g = gradient_map(tape.constant(*in), k).value();
      const std::size_t m = static_cast<std::size_t>(3 * k);
      for (std::size_t ch = 0; ch < 2; ++ch)
        for (std::size_t y = m; y < n - m; ++y)
          for (std::size_t x = m; x < n - m; ++x)
            interior = std::max(interior, std::abs(g.at(0, ch, y, x)));
    }
  }
  const double alpha = 1.7;
  Tape<double> tape;
  Tensor<double> g(Shape{1, 1, 1, 3}, {0.0, alpha, 1e6 * alpha});
  const Tensor<double> e = squash(tape.constant(g), alpha).value();
  const bool squash_ok = std::abs(e[0]) <= 1e-9 && std::abs(e[1] - 0.5) <= 1e-9 && e[2] > 0.999;
  Outcome o;
  o.pass = template_sum == 0 && interior <= 1e-6 && squash_ok;
  o.detail = "template sums " + fmt("%.3g", template_sum) + ", interior response " +
             fmt("%.3g", interior) + " (<= 1e-6), squash -> (" + fmt("%.3g", e[0]) + ", " +
             fmt("%.12g", e[1]) + ", " + fmt("%.9f", e[2]) + ")";
  return o;
}

// 7. Metrics oracle.
Outcome metrics_oracle() {
  std::mt19937 rng(77);
  const int n = 4;
  ConfusionMatrix cm(n);
  std::vector<double> tp(n), truth(n), pred(n);
  double correct = 0, total = 0;
  for (int m = 0; m < 100; ++m) {
    std::vector<std::uint8_t> p(32 * 32), t(32 * 32);
    for (std::size_t i = 0; i < p.size(); ++i) {
      t[i] = rng() % 9 == 0 ? kVoidLabel : static_cast<std::uint8_t>(rng() % n);
      p[i] = (rng() % 2 && t[i] != kVoidLabel) ? t[i] : static_cast<std::uint8_t>(rng() % n);
      if (t[i] == kVoidLabel) continue;
      total += 1;
      truth[t[i]] += 1;
      pred[p[i]] += 1;
      if (p[i] == t[i]) {
        correct += 1;
        tp[t[i]] += 1;
      }
    }
    cm.update(p, t);
  }
  double acc = 0, iou = 0, fw = 0;
  for (int k = 0; k < n; ++k) {
    acc += tp[k] / truth[k] / n;
    const double u = truth[k] + pred[k] - tp[k];
    iou += tp[k] / u / n;
    fw += truth[k] * tp[k] / u / total;
  }
  const double d = std::max({std::abs(pixel_acc(cm) - correct / total),
                             std::abs(mean_class_acc(cm) - acc), std::abs(miou(cm) - iou),
                             std::abs(fwiou(cm) - fw)});
  ConfusionMatrix hand(2);
  hand.add(0, 0, 3);
  hand.add(0, 1, 1);
  hand.add(1, 0, 1);
  hand.add(1, 1, 3);
  const bool exact = pixel_acc(hand) == 0.75 && miou(hand) == 0.6 && fwiou(hand) == 0.6;
  Outcome o;
  o.pass = d <= 1e-12 && exact;
  o.detail = "max deviation from per-pixel tally " + fmt("%.3g", d) + ", [[3,1],[1,3]] -> " +
             fmt("%.6g", pixel_acc(hand)) + " / " + fmt("%.6g", miou(hand)) + " / " +
             fmt("%.6g", fwiou(hand)) + (exact ? " exact" : " NOT exact");
  return o;
}

SynthConfig reference_synth() {
  SynthConfig s;  // 4 classes, 64x64, seed 1
  return s;
}

// 8. End-to-end training sanity.
Outcome training(const fs::path& out) {
  const auto t0 = Clock::now();
  const SynthConfig s = reference_synth();
  const auto train_set = generate_synthetic(s, 128, 0);
  const auto val_set = generate_synthetic(s, 32, 128);
  TrainConfig ece;  // defaults: 2000 iterations, lambda1 0.5, lambda2 5e-4
  ece.log_interval = 50;
  ece.checkpoint_interval = 0;
  TrainConfig ce = ece;
  ce.edge_loss.lambda1 = 0;
  TrainOptions oe, oc;
  if (!out.empty()) {
    oe.out_dir = out / "ece";
    oc.out_dir = out / "ce";
  }
  const TrainResult<float> re = train<float>(ece, train_set, val_set, oe);
  const TrainResult<float> rc = train<float>(ce, train_set, val_set, oc);
  const double secs = seconds_since(t0);
  const EvalResult& e = *re.final_eval;
  const EvalResult& c = *rc.final_eval;
  if (!out.empty()) {
    nlohmann::json j;
    j["ece"] = eval_to_json(e);
    j["ce"] = eval_to_json(c);
    j["seconds"] = secs;
    std::ofstream(out / "summary.json") << j.dump(2) << '\n';
  }
  Outcome o;
  o.pass = e.miou >= 0.85 && e.boundary.score >= c.boundary.score && secs <= 1200;
  o.detail = "ECE val mIoU " + fmt("%.4f", e.miou) + " (>= 0.85), boundary ECE " +
             fmt("%.4f", e.boundary.score) + " vs lambda1=0 " + fmt("%.4f", c.boundary.score) +
             " (CE mIoU " + fmt("%.4f", c.miou) + "), " + fmt("%.0f", secs) + " s (<= 1200)";
  return o;
}

// 9. Determinism and persistence.
Outcome determinism(const fs::path& out) {
  const SynthConfig s = reference_synth();
  const auto train_set = generate_synthetic(s, 128, 0);
  TrainConfig cfg;
  cfg.total_iterations = 200;
  cfg.eval_interval = 0;
  cfg.checkpoint_interval = 200;
  const fs::path base = out.empty() ? fs::temp_directory_path() / "elkpp_acceptance_det" : out;
  fs::remove_all(base / "det_a");
  fs::remove_all(base / "det_b");
  TrainOptions a, b;
  a.out_dir = base / "det_a";
  b.out_dir = base / "det_b";
  train<float>(cfg, train_set, {}, a);
  std::vector<std::vector<char>> heap_shift;
  for (int i = 1; i < 64; ++i) heap_shift.emplace_back(static_cast<std::size_t>(i) * 37);
  train<float>(cfg, train_set, {}, b);
  auto slurp = [](const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(f), {});
  };
  const std::string ba = slurp(a.out_dir / "ckpt_000200.elkp");
  const std::string bb = slurp(b.out_dir / "ckpt_000200.elkp");
  const Checkpoint ck = decode_checkpoint(ba);
  const fs::path rt = base / "roundtrip.elkp";
  write_checkpoint(rt, ck);
  const bool roundtrip = read_checkpoint(rt) == ck && slurp(rt) == ba;
  const bool same = !ba.empty() && ba == bb;
  if (out.empty()) fs::remove_all(base);
  Outcome o;
  o.pass = same && roundtrip && ck.iteration == 200;
  o.detail = "iteration-200 checkpoints " + std::string(same ? "bit-identical" : "DIFFER") + " (" +
             std::to_string(ba.size()) + " bytes, " + std::to_string(ck.tensors.size()) +
             " tensors), round-trip " + (roundtrip ? "bit-exact" : "NOT exact");
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  fs::path out;
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--out" && i + 1 < argc) {
      out = argv[++i];
    } else if (a == "--only" && i + 1 < argc) {
      std::stringstream ss(argv[++i]);
      for (std::string t; std::getline(ss, t, ',');) only.insert(std::stoi(t));
    } else {
      std::fprintf(stderr, "usage: %s [--out DIR] [--only N,M,...]\n", argv[0]);
      return 64;
    }
  }
  if (!out.empty()) fs::create_directories(out);

  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"gradient fidelity", gradient_fidelity},
      {"gridding reproduction", gridding},
      {"parameter claim", parameters},
      {"receptive-field equivalence", rf_equivalence},
      {"loss reduction", loss_reduction},
      {"edge extractor analytics", edge_analytics},
      {"metrics oracle", metrics_oracle},
      {"end-to-end training", [&] { return training(out); }},
      {"determinism and persistence", [&] { return determinism(out); }},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s criterion %d (%s): %s\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first,
                o.detail.c_str());
    std::fflush(stdout);
  }
  return failed;
}
