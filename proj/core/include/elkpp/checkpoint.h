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
#include <map>
#include <string>

#include "elkpp/layers.h"
#include "elkpp/optim.h"
#include "elkpp/tensor.h"

namespace elkpp {

inline constexpr std::uint8_t kCheckpointVersion = 1;

// Layout (little-endian): "ELKP", u8 version, u64 iteration, u64 config
// digest, u32 tensor count, then per tensor: u16 name length, name bytes,
// u8 rank, u32 dims[rank], f32 data.
struct Checkpoint {
  std::uint8_t version = kCheckpointVersion;
  std::uint64_t iteration = 0;
  std::uint64_t config_digest = 0;
  std::map<std::string, Tensor<float>> tensors;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::string& bytes,
                             const std::string& source = "<memory>");
void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& path);

// Tensor names: param/<name>, adam_m/<name>, adam_v/<name>,
// bn/<name>/mean, bn/<name>/var, meta/<key>.
template <typename T>
Checkpoint pack_checkpoint(const ModelState<T>& state, const AdamState<T>* adam,
                           std::uint64_t iteration, std::uint64_t digest);

// Overwrites values in `state` (and `adam` when given). Every tensor of the
// state must be present with a matching shape.
template <typename T>
void unpack_checkpoint(const Checkpoint& ckpt, ModelState<T>& state,
                       AdamState<T>* adam);

}  // namespace elkpp
