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

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "elkpp/checkpoint.h"
#include "elkpp/config.h"
#include "elkpp/dataset.h"
#include "elkpp/metrics.h"
#include "elkpp/optim.h"
#include "elkpp/segnet.h"

namespace elkpp {

struct LogRow {
  int iter = 0;
  double lr = 0;
  double l_seg = 0;
  double l_edge = 0;
  double reg = 0;
  double total = 0;
};

struct EvalResult {
  ConfusionMatrix cm{2};
  BoundaryScore boundary;
  double pixel_acc = kUndefined;
  double mean_class_acc = kUndefined;
  double miou = kUndefined;
  double fwiou = kUndefined;
  std::vector<double> class_iou;
};

// Argmax labels of an inference-mode forward pass.
template <typename T>
LabelBatch predict(const SegNet& net, ModelState<T>& state, const Tensor<T>& images);

// Per-class sigmoid probabilities of an inference-mode forward pass.
template <typename T>
Tensor<T> predict_sigmoid(const SegNet& net, ModelState<T>& state,
                          const Tensor<T>& images);

template <typename T>
EvalResult evaluate(const SegNet& net, ModelState<T>& state,
                    std::span<const SegmentationSample> samples,
                    std::size_t batch_size = 8);

struct TrainOptions {
  std::filesystem::path out_dir;  // empty: no files written
  std::optional<std::filesystem::path> resume;
  int stop_after = -1;            // stop once this many iterations completed
  bool quiet = true;
  // l_seg + lambda2 * R only; the edge branch is never built. Logged l_edge is 0.
  bool pure_ce = false;
  std::function<void(const LogRow&)> on_log;
};

template <typename T>
struct TrainResult {
  ModelState<T> state;
  AdamState<T> adam;
  int iterations_done = 0;
  std::vector<LogRow> log;
  double best_miou = kUndefined;
  int best_iter = -1;
  std::optional<EvalResult> final_eval;
};

template <typename T>
TrainResult<T> train(const TrainConfig& cfg,
                     std::span<const SegmentationSample> train_set,
                     std::span<const SegmentationSample> val_set,
                     const TrainOptions& options = {});

std::string format_eval_report(const EvalResult& r);
nlohmann::json eval_to_json(const EvalResult& r);

}  // namespace elkpp
