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
#include <string>

#include <nlohmann/json.hpp>

#include "elkpp/edge_loss.h"
#include "elkpp/segnet.h"

namespace elkpp {

// Desk-scale defaults; the full-resolution schedules are not reproduced.
struct TrainConfig {
  double base_lr = 2.5e-4;
  int total_iterations = 2000;
  int batch_size = 4;
  double poly_power = 0.9;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double mirror_flip_probability = 0.5;
  std::uint64_t seed = 1;
  bool deterministic = true;
  int checkpoint_interval = 500;  // 0 disables periodic checkpoints
  int eval_interval = 250;        // 0 evaluates only at the end
  int log_interval = 10;
  EdgeLossParams edge_loss;
  ModelConfig model;

  void validate() const;
};

nlohmann::json to_json(const TrainConfig& cfg);
nlohmann::json to_json(const ModelConfig& cfg);
// Missing keys keep their defaults; unknown keys throw ConfigError.
TrainConfig train_config_from_json(const nlohmann::json& j);
ModelConfig model_config_from_json(const nlohmann::json& j);

TrainConfig load_train_config(const std::filesystem::path& path);
void save_train_config(const std::filesystem::path& path, const TrainConfig& cfg);

// FNV-1a over the canonical JSON dump of the model and loss sections.
std::uint64_t config_digest(const TrainConfig& cfg);
std::uint64_t fnv1a64(const std::string& bytes);

}  // namespace elkpp
