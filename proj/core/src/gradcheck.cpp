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
#include "elkpp/gradcheck.h"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>

#include "elkpp/error.h"

namespace elkpp {

namespace {

using Clock = std::chrono::steady_clock;

double norm(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

GradcheckEntry compare(const std::string& name, const std::vector<double>& analytic,
                       const std::vector<double>& numeric) {
  GradcheckEntry e;
  e.name = name;
  e.elements = analytic.size();
  std::vector<double> diff(analytic.size());
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    diff[i] = analytic[i] - numeric[i];
    e.max_abs_error = std::max(e.max_abs_error, std::abs(diff[i]));
  }
  const double scale = std::max({norm(analytic), norm(numeric), 1e-300});
  e.rel_error = norm(diff) / scale;
  // Both sides vanish: nothing to compare but also nothing wrong.
  if (norm(analytic) < 1e-12 && norm(numeric) < 1e-12) e.rel_error = 0;
  return e;
}

void finish(GradcheckReport& r, Clock::time_point t0) {
  r.max_rel_error = 0;
  for (const auto& e : r.entries) {
    if (e.skipped) continue;
    const std::string module = e.name.substr(0, e.name.find('.'));
    double& m = r.module_max[module];
    m = std::max(m, e.rel_error);
    if (e.rel_error >= r.max_rel_error) {
      r.max_rel_error = e.rel_error;
      r.worst = e.name;
    }
  }
  r.passed = r.max_rel_error <= r.tolerance;
  r.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
}

LabelBatch random_labels(std::mt19937_64& rng, std::size_t n, std::size_t h,
                         std::size_t w, int classes) {
  // Blocky maps so edges exist, plus a few void pixels.
  LabelBatch labels(n, h, w);
  std::uniform_int_distribution<int> cls(0, classes - 1);
  std::uniform_real_distribution<double> u(0, 1);
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t y = 0; y < h; y += 2) {
      for (std::size_t x = 0; x < w; x += 2) {
        const auto v = static_cast<std::uint8_t>(cls(rng));
        for (std::size_t dy = 0; dy < 2 && y + dy < h; ++dy) {
          for (std::size_t dx = 0; dx < 2 && x + dx < w; ++dx) labels.at(b, y + dy, x + dx) = v;
        }
      }
    }
    labels.at(b, 0, w - 1) = kVoidLabel;
    if (u(rng) < 0.5) labels.at(b, h - 1, 0) = kVoidLabel;
  }
  return labels;
}

}  // namespace

ModelConfig tiny_model_config() {
  ModelConfig m;
  m.input_channels = 3;
  m.num_classes = 3;
  m.backbone.stem_channels = 2;
  m.backbone.stages = {{{1, 2, 2}, {1, 3, 2}, {1, 4, 2}, {1, 5, 2}}};
  m.lkpp.block_widths = {2, 2, 2};
  m.lkpp.skip_width = 2;
  m.lkpp.global_width = 2;
  m.decoder.widths = {4, 3, 2};
  m.decoder.transfer_widths = {2, 2, 2};
  m.decoder.head_channels = 2;
  return m;
}

GradcheckReport gradcheck_loss_only(GradcheckOptions o) {
  const auto t0 = Clock::now();
  if (o.step <= 0) o.step = 1e-5;
  std::mt19937_64 rng(o.seed);
  std::normal_distribution<double> normal(0, 1.5);
  const std::size_t n = 2, c = 4, h = 8, w = 8;
  Tensor<double> logits(Shape{n, c, h, w});
  for (auto& v : logits.values()) v = normal(rng);
  const LabelBatch labels = random_labels(rng, n, h, w, static_cast<int>(c));

  auto loss_of = [&](const Tensor<double>& z, Tensor<double>* grad) {
    Tape<double> tape;
    Var<double> leaf = tape.leaf(z);
    EceTerms<double> t = ece_loss(leaf, labels, o.loss, std::span<const Var<double>>());
    if (grad) {
      tape.backward(t.total);
      *grad = tape.grad(leaf);
    }
    return t.total.value().item();
  };

  Tensor<double> g;
  loss_of(logits, &g);
  std::vector<double> numeric(logits.numel());
  Tensor<double> probe = logits;
  for (std::size_t i = 0; i < logits.numel(); ++i) {
    probe[i] = logits[i] + o.step;
    const double up = loss_of(probe, nullptr);
    probe[i] = logits[i] - o.step;
    const double down = loss_of(probe, nullptr);
    probe[i] = logits[i];
    numeric[i] = (up - down) / (2 * o.step);
  }
  GradcheckReport r;
  r.tolerance = o.tolerance;
  r.entries.push_back(compare("logits", g.vector(), numeric));
  finish(r, t0);
  return r;
}

GradcheckReport gradcheck_model(GradcheckOptions o, const ModelConfig& model) {
  const auto t0 = Clock::now();
  if (o.step <= 0) o.step = 1e-7;
  const SegNet net(model);
  ModelState<double> state = net.init<double>(o.seed);
  for (const std::string& name : o.frozen) {
    if (state.params.contains(name)) state.params.set_frozen(name, true);
  }
  std::mt19937_64 rng(o.seed + 1);
  std::uniform_real_distribution<double> u(0, 1);
  const std::size_t n = 2, h = 64, w = 64;
  Tensor<double> images(Shape{n, static_cast<std::size_t>(model.input_channels), h, w});
  for (auto& v : images.values()) v = u(rng);
  const LabelBatch labels = random_labels(rng, n, h, w, model.num_classes);
  // BN running statistics must not drift between probes.
  const auto stats = state.bn_stats;

  auto loss_of = [&](bool backward) {
    state.bn_stats = stats;
    Tape<double> tape;
    Context<double> ctx(tape, state, /*training=*/true);
    Var<double> logits = net.forward(ctx, tape.constant(images));
    std::vector<Var<double>> trainable;
    for (const auto& [name, v] : tape.bound_parameters()) {
      if (v.requires_grad()) trainable.push_back(v);
    }
    EceTerms<double> t =
        ece_loss(logits, labels, o.loss, std::span<const Var<double>>(trainable));
    if (backward) {
      tape.backward(t.total);
      state.params.zero_grad();
      tape.accumulate_parameter_grads(state.params);
    }
    return t.total.value().item();
  };

  loss_of(true);
  GradcheckReport r;
  r.tolerance = o.tolerance;
  for (auto& [name, p] : state.params.entries()) {
    if (p.frozen) {
      GradcheckEntry e;
      e.name = name;
      e.elements = p.value.numel();
      e.skipped = true;
      r.entries.push_back(e);
      continue;
    }
    const std::vector<double> analytic = p.grad.vector();
    std::vector<double> numeric(p.value.numel());
    for (std::size_t i = 0; i < p.value.numel(); ++i) {
      const double orig = p.value[i];
      p.value[i] = orig + o.step;
      const double up = loss_of(false);
      p.value[i] = orig - o.step;
      const double down = loss_of(false);
      p.value[i] = orig;
      numeric[i] = (up - down) / (2 * o.step);
    }
    r.entries.push_back(compare(name, analytic, numeric));
  }
  state.bn_stats = stats;
  finish(r, t0);
  return r;
}

std::string format_gradcheck(const GradcheckReport& r) {
  std::ostringstream out;
  char buf[256];
  for (const auto& e : r.entries) {
    if (e.skipped) {
      std::snprintf(buf, sizeof buf, "%-48s %6zu  skipped (frozen)\n", e.name.c_str(), e.elements);
    } else {
      std::snprintf(buf, sizeof buf, "%-48s %6zu  rel %.3e  abs %.3e\n", e.name.c_str(),
                    e.elements, e.rel_error, e.max_abs_error);
    }
    out << buf;
  }
  out << "per module:\n";
  for (const auto& [m, v] : r.module_max) {
    std::snprintf(buf, sizeof buf, "  %-12s max rel %.3e\n", m.c_str(), v);
    out << buf;
  }
  std::snprintf(buf, sizeof buf, "max rel error %.3e (%s), tolerance %.1e: %s (%.1fs)\n",
                r.max_rel_error, r.worst.c_str(), r.tolerance, r.passed ? "ok" : "FAILED",
                r.seconds);
  out << buf;
  return out.str();
}

}  // namespace elkpp
