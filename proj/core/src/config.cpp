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
#include "elkpp/config.h"

#include <fstream>
#include <set>
#include <sstream>

#include "elkpp/error.h"

namespace elkpp {

using nlohmann::json;

namespace {

// Reads fields out of one JSON object and rejects anything left over.
class Reader {
 public:
  Reader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + ": expected a JSON object");
  }

  template <typename V>
  void get(const char* key, V& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->template get<V>();
    } catch (const json::exception& e) {
      throw ConfigError(where_ + "." + key + ": " + e.what());
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string path(const char* key) const { return where_ + "." + key; }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) {
        throw ConfigError(where_ + ": unknown key \"" + it.key() + "\"");
      }
    }
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

json to_json(const EdgeLossParams& p) {
  return {{"k", p.k},
          {"alpha", p.alpha},
          {"gamma", p.gamma},
          {"lambda1", p.lambda1},
          {"lambda2", p.lambda2},
          {"epsilon", p.epsilon},
          {"normalize_losses", p.normalize_losses},
          {"all_ones_blocks", p.all_ones_blocks},
          {"squared_regularizer", p.squared_regularizer}};
}

EdgeLossParams edge_from_json(const json& j) {
  EdgeLossParams p;
  Reader r(j, "edge_loss");
  r.get("k", p.k);
  r.get("alpha", p.alpha);
  r.get("gamma", p.gamma);
  r.get("lambda1", p.lambda1);
  r.get("lambda2", p.lambda2);
  r.get("epsilon", p.epsilon);
  r.get("normalize_losses", p.normalize_losses);
  r.get("all_ones_blocks", p.all_ones_blocks);
  r.get("squared_regularizer", p.squared_regularizer);
  r.finish();
  return p;
}

}  // namespace

json to_json(const ModelConfig& m) {
  json stages = json::array();
  for (const StageConfig& s : m.backbone.stages) {
    stages.push_back({{"blocks", s.blocks}, {"channels", s.channels}, {"stride", s.stride}});
  }
  json kernels = json::array();
  for (const auto& k : m.lkpp.kernels) kernels.push_back({k[0], k[1]});
  return {
      {"input_channels", m.input_channels},
      {"num_classes", m.num_classes},
      {"backbone", {{"stem_channels", m.backbone.stem_channels}, {"stages", stages}}},
      {"decoder",
       {{"widths", m.decoder.widths},
        {"transfer_widths", m.decoder.transfer_widths},
        {"head_channels", m.decoder.head_channels}}},
      {"lkpp",
       {{"mode", hadc_mode_name(m.lkpp.mode)},
        {"kernels", kernels},
        {"block_widths", m.lkpp.block_widths},
        {"skip_width", m.lkpp.skip_width},
        {"global_width", m.lkpp.global_width},
        {"skip_branch", m.lkpp.skip_branch},
        {"global_branch", m.lkpp.global_branch}}},
  };
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig m;
  Reader r(j, "model");
  r.get("input_channels", m.input_channels);
  r.get("num_classes", m.num_classes);
  if (const json* b = r.child("backbone")) {
    Reader rb(*b, r.path("backbone"));
    rb.get("stem_channels", m.backbone.stem_channels);
    if (const json* st = rb.child("stages")) {
      if (!st->is_array() || st->size() != 4) {
        throw ConfigError("model.backbone.stages: expected an array of 4 stages");
      }
      for (std::size_t i = 0; i < 4; ++i) {
        Reader rs((*st)[i], "model.backbone.stages[" + std::to_string(i) + "]");
        rs.get("blocks", m.backbone.stages[i].blocks);
        rs.get("channels", m.backbone.stages[i].channels);
        rs.get("stride", m.backbone.stages[i].stride);
        rs.finish();
      }
    }
    rb.finish();
  }
  if (const json* d = r.child("decoder")) {
    Reader rd(*d, r.path("decoder"));
    rd.get("widths", m.decoder.widths);
    rd.get("transfer_widths", m.decoder.transfer_widths);
    rd.get("head_channels", m.decoder.head_channels);
    rd.finish();
  }
  if (const json* l = r.child("lkpp")) {
    Reader rl(*l, r.path("lkpp"));
    std::string mode = hadc_mode_name(m.lkpp.mode);
    rl.get("mode", mode);
    try {
      m.lkpp.mode = parse_hadc_mode(mode);
    } catch (const Error& e) {
      throw ConfigError(std::string("model.lkpp.mode: ") + e.what());
    }
    rl.get("kernels", m.lkpp.kernels);
    rl.get("block_widths", m.lkpp.block_widths);
    rl.get("skip_width", m.lkpp.skip_width);
    rl.get("global_width", m.lkpp.global_width);
    rl.get("skip_branch", m.lkpp.skip_branch);
    rl.get("global_branch", m.lkpp.global_branch);
    rl.finish();
  }
  r.finish();
  m.validate();
  return m;
}

void TrainConfig::validate() const {
  if (total_iterations <= 0) throw ConfigError("total_iterations must be > 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(base_lr > 0)) throw ConfigError("base_lr must be > 0");
  if (!(poly_power > 0)) throw ConfigError("poly_power must be > 0");
  if (!(adam_beta1 >= 0 && adam_beta1 < 1) || !(adam_beta2 >= 0 && adam_beta2 < 1)) {
    throw ConfigError("adam betas must lie in [0, 1)");
  }
  if (!(adam_epsilon > 0)) throw ConfigError("adam_epsilon must be > 0");
  if (!(mirror_flip_probability >= 0 && mirror_flip_probability <= 1)) {
    throw ConfigError("mirror_flip_probability must lie in [0, 1]");
  }
  if (checkpoint_interval < 0 || eval_interval < 0 || log_interval < 1) {
    throw ConfigError("intervals: checkpoint/eval >= 0, log >= 1");
  }
  edge_loss.validate();
  model.validate();
}

json to_json(const TrainConfig& c) {
  return {{"base_lr", c.base_lr},
          {"total_iterations", c.total_iterations},
          {"batch_size", c.batch_size},
          {"poly_power", c.poly_power},
          {"adam_beta1", c.adam_beta1},
          {"adam_beta2", c.adam_beta2},
          {"adam_epsilon", c.adam_epsilon},
          {"mirror_flip_probability", c.mirror_flip_probability},
          {"seed", c.seed},
          {"deterministic", c.deterministic},
          {"checkpoint_interval", c.checkpoint_interval},
          {"eval_interval", c.eval_interval},
          {"log_interval", c.log_interval},
          {"edge_loss", to_json(c.edge_loss)},
          {"model", to_json(c.model)}};
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig c;
  Reader r(j, "config");
  r.get("base_lr", c.base_lr);
  r.get("total_iterations", c.total_iterations);
  r.get("batch_size", c.batch_size);
  r.get("poly_power", c.poly_power);
  r.get("adam_beta1", c.adam_beta1);
  r.get("adam_beta2", c.adam_beta2);
  r.get("adam_epsilon", c.adam_epsilon);
  r.get("mirror_flip_probability", c.mirror_flip_probability);
  r.get("seed", c.seed);
  r.get("deterministic", c.deterministic);
  r.get("checkpoint_interval", c.checkpoint_interval);
  r.get("eval_interval", c.eval_interval);
  r.get("log_interval", c.log_interval);
  if (const json* e = r.child("edge_loss")) c.edge_loss = edge_from_json(*e);
  if (const json* m = r.child("model")) c.model = model_config_from_json(*m);
  r.finish();
  c.validate();
  return c;
}

TrainConfig load_train_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError(path.string() + ": cannot open config file");
  json j;
  try {
    j = json::parse(f);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": malformed JSON: " + e.what());
  }
  return train_config_from_json(j);
}

void save_train_config(const std::filesystem::path& path, const TrainConfig& cfg) {
  std::ofstream f(path);
  if (!f) throw ConfigError(path.string() + ": cannot open for writing");
  f << to_json(cfg).dump(2) << '\n';
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t config_digest(const TrainConfig& cfg) {
  const json j = {{"model", to_json(cfg.model)}, {"edge_loss", to_json(cfg.edge_loss)}};
  return fnv1a64(j.dump());
}

}  // namespace elkpp
