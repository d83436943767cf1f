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
#include <map>
#include <numeric>
#include <random>

#include "elkpp/error.h"
#include "elkpp/metrics.h"

namespace elkpp {
namespace {

ConfusionMatrix from_rows(const std::vector<std::vector<std::uint64_t>>& rows) {
  ConfusionMatrix cm(static_cast<int>(rows.size()));
  for (std::size_t t = 0; t < rows.size(); ++t)
    for (std::size_t p = 0; p < rows.size(); ++p)
      cm.add(static_cast<int>(t), static_cast<int>(p), rows[t][p]);
  return cm;
}

TEST(ConfusionMatrix, UpdateExamples) {
  const std::vector<std::uint8_t> labels{0, 0, 0, 0, 1, 1, 1, 1};
  const std::vector<std::uint8_t> preds{0, 0, 0, 1, 1, 1, 1, 0};
  ConfusionMatrix cm(2);
  cm.update(preds, labels);
  EXPECT_EQ(cm, from_rows({{3, 1}, {1, 3}}));

  ConfusionMatrix perfect(3);
  const std::vector<std::uint8_t> l3{0, 1, 2, 2, 1};
  perfect.update(l3, l3);
  EXPECT_EQ(perfect, from_rows({{1, 0, 0}, {0, 2, 0}, {0, 0, 2}}));

  ConfusionMatrix untouched = cm;
  const std::vector<std::uint8_t> voids(8, kVoidLabel);
  untouched.update(preds, voids);
  EXPECT_EQ(untouched, cm);
}

TEST(ConfusionMatrix, Errors) {
  ConfusionMatrix cm(2);
  const std::vector<std::uint8_t> a{0, 2}, b{0, 1}, c{0};
  EXPECT_THROW(cm.update(a, b), DomainError);
  EXPECT_THROW(cm.update(b, c), ShapeError);
  EXPECT_THROW(cm.update(b, a), DomainError);
}

TEST(Metrics, DiagonalIsPerfect) {
  const ConfusionMatrix cm = from_rows({{5, 0, 0}, {0, 2, 0}, {0, 0, 9}});
  EXPECT_EQ(pixel_acc(cm), 1.0);
  EXPECT_EQ(mean_class_acc(cm), 1.0);
  EXPECT_EQ(miou(cm), 1.0);
  EXPECT_EQ(fwiou(cm), 1.0);
}

TEST(Metrics, ThreeOneOneThree) {
  const ConfusionMatrix cm = from_rows({{3, 1}, {1, 3}});
  EXPECT_DOUBLE_EQ(pixel_acc(cm), 0.75);
  EXPECT_DOUBLE_EQ(mean_class_acc(cm), 0.75);
  EXPECT_EQ(per_class_iou(cm), (std::vector<double>{0.6, 0.6}));
  EXPECT_DOUBLE_EQ(miou(cm), 0.6);
  EXPECT_DOUBLE_EQ(fwiou(cm), 0.6);
}

TEST(Metrics, AbsentClassesSkipped) {
  const ConfusionMatrix cm = from_rows({{3, 1, 0}, {1, 3, 0}, {0, 0, 0}});
  EXPECT_DOUBLE_EQ(mean_class_acc(cm), 0.75);
  EXPECT_DOUBLE_EQ(miou(cm), 0.6);
  EXPECT_TRUE(std::isnan(per_class_iou(cm)[2]));
  // Predicted but never true: counts in the union, not in mean_class_acc.
  const ConfusionMatrix fp = from_rows({{2, 2}, {0, 0}});
  EXPECT_DOUBLE_EQ(mean_class_acc(fp), 0.5);
  EXPECT_DOUBLE_EQ(miou(fp), 0.25);
}

TEST(Metrics, EmptyIsUndefined) {
  const ConfusionMatrix cm(3);
  EXPECT_TRUE(std::isnan(pixel_acc(cm)));
  EXPECT_TRUE(std::isnan(mean_class_acc(cm)));
  EXPECT_TRUE(std::isnan(miou(cm)));
  EXPECT_TRUE(std::isnan(fwiou(cm)));
}

TEST(Metrics, FrequencyBias) {
  // IoU 0.9 on the class holding 99% of pixels, about 0.09 on the other.
  const ConfusionMatrix cm = from_rows({{891, 99}, {0, 10}});
  const auto iou = per_class_iou(cm);
  EXPECT_DOUBLE_EQ(iou[0], 0.9);
  EXPECT_NEAR(fwiou(cm), 0.892, 5e-4);
  EXPECT_NEAR(fwiou(cm), 0.99 * 0.9 + 0.01 * iou[1], 1e-12);
  EXPECT_LT(miou(cm), 0.5);
}

struct Tally {
  double pa, mca, miou, fw;
};

// Straight from the pixel lists, without a confusion matrix.
Tally brute_force(const std::vector<std::uint8_t>& pred, const std::vector<std::uint8_t>& truth,
                  int n) {
  double correct = 0, total = 0;
  std::vector<double> tp(n), in_truth(n), in_pred(n);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (truth[i] == kVoidLabel) continue;
    total += 1;
    in_truth[truth[i]] += 1;
    in_pred[pred[i]] += 1;
    if (pred[i] == truth[i]) {
      correct += 1;
      tp[truth[i]] += 1;
    }
  }
  double acc_sum = 0, acc_n = 0, iou_sum = 0, iou_n = 0, fw = 0;
  for (int k = 0; k < n; ++k) {
    if (in_truth[k] > 0) {
      acc_sum += tp[k] / in_truth[k];
      acc_n += 1;
    }
    const double uni = in_truth[k] + in_pred[k] - tp[k];
    if (uni > 0) {
      iou_sum += tp[k] / uni;
      iou_n += 1;
      fw += in_truth[k] * tp[k] / uni;
    }
  }
  return {correct / total, acc_sum / acc_n, iou_sum / iou_n, fw / total};
}

TEST(Metrics, IncrementalMatchesBruteForce) {
  std::mt19937 rng(12);
  const int n = 5;
  std::vector<std::uint8_t> all_p, all_t;
  ConfusionMatrix cm(n);
  for (int map = 0; map < 100; ++map) {
    std::vector<std::uint8_t> p(32 * 32), t(32 * 32);
    for (std::size_t i = 0; i < p.size(); ++i) {
      t[i] = rng() % 11 == 0 ? kVoidLabel : static_cast<std::uint8_t>(rng() % n);
      // Biased towards correct so the metrics are not all near chance.
      p[i] = (rng() % 3 && t[i] != kVoidLabel) ? t[i] : static_cast<std::uint8_t>(rng() % n);
    }
    ConfusionMatrix one(n);
    one.update(p, t);
    cm.merge(one);
    all_p.insert(all_p.end(), p.begin(), p.end());
    all_t.insert(all_t.end(), t.begin(), t.end());
  }
  const Tally b = brute_force(all_p, all_t, n);
  EXPECT_NEAR(pixel_acc(cm), b.pa, 1e-12);
  EXPECT_NEAR(mean_class_acc(cm), b.mca, 1e-12);
  EXPECT_NEAR(miou(cm), b.miou, 1e-12);
  EXPECT_NEAR(fwiou(cm), b.fw, 1e-12);
  for (double v : {pixel_acc(cm), mean_class_acc(cm), miou(cm), fwiou(cm)}) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(Metrics, InvariantUnderClassPermutation) {
  std::mt19937 rng(13);
  const int n = 4;
  std::vector<std::uint8_t> p(400), t(400);
  for (std::size_t i = 0; i < p.size(); ++i) {
    t[i] = static_cast<std::uint8_t>(rng() % n);
    p[i] = rng() % 2 ? t[i] : static_cast<std::uint8_t>(rng() % n);
  }
  ConfusionMatrix a(n);
  a.update(p, t);
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  for (int trial = 0; trial < 5; ++trial) {
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<std::uint8_t> pp(p.size()), tt(t.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
      pp[i] = static_cast<std::uint8_t>(perm[p[i]]);
      tt[i] = static_cast<std::uint8_t>(perm[t[i]]);
    }
    ConfusionMatrix b(n);
    b.update(pp, tt);
    EXPECT_NEAR(pixel_acc(a), pixel_acc(b), 1e-15);
    EXPECT_NEAR(mean_class_acc(a), mean_class_acc(b), 1e-15);
    EXPECT_NEAR(miou(a), miou(b), 1e-15);
    EXPECT_NEAR(fwiou(a), fwiou(b), 1e-15);
  }
}

TEST(Metrics, EqualFrequenciesGiveFwEqualMiou) {
  std::mt19937 rng(14);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 3;
    ConfusionMatrix cm(n);
    for (int t = 0; t < n; ++t) {
      // Every row sums to 60.
      const std::uint64_t a = rng() % 40, b = rng() % (60 - a);
      cm.add(t, t, 60 - a - b);
      cm.add(t, (t + 1) % n, a);
      cm.add(t, (t + 2) % n, b);
    }
    EXPECT_NEAR(fwiou(cm), miou(cm), 1e-12);
  }
}

LabelBatch halves(std::size_t h, std::size_t w, std::size_t split) {
  LabelBatch l(1, h, w, 0);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = split; x < w; ++x) l.at(0, y, x) = 1;
  return l;
}

TEST(Boundary, Agreement) {
  const LabelBatch truth = halves(8, 16, 8);
  const BoundaryScore same = boundary_agreement(truth, truth);
  EXPECT_EQ(same.predicted_edges, 16u);
  EXPECT_EQ(same.score, 1.0);
  // Shifted by two columns stays within tolerance, by five it does not.
  EXPECT_EQ(boundary_agreement(halves(8, 16, 10), truth).score, 1.0);
  EXPECT_EQ(boundary_agreement(halves(8, 16, 13), truth).score, 0.0);
  // Shifted by three: the pixel pair straddling the boundary is split.
  EXPECT_DOUBLE_EQ(boundary_agreement(halves(8, 16, 11), truth).score, 0.5);
  // A flat prediction has no predicted edges.
  EXPECT_TRUE(std::isnan(boundary_agreement(LabelBatch(1, 8, 16, 0), truth).score));
}

TEST(Boundary, VoidIsNotAnEdge) {
  LabelBatch truth(1, 6, 6, 0);
  for (std::size_t y = 0; y < 6; ++y) truth.at(0, y, 5) = kVoidLabel;
  const auto edges = label_edges(truth, truth);
  for (auto e : edges) EXPECT_EQ(e, 0);
  // Predicted edges against void in the reference are dropped.
  EXPECT_EQ(boundary_agreement(halves(6, 6, 5), truth).predicted_edges, 0u);
  const BoundaryScore s = boundary_agreement(halves(6, 6, 4), truth);
  EXPECT_EQ(s.predicted_edges, 12u);
  EXPECT_EQ(s.matched, 0u);
  EXPECT_EQ(s.score, 0.0);
}

}  // namespace
}  // namespace elkpp
