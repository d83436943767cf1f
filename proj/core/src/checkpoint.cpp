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
#include "elkpp/checkpoint.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "elkpp/error.h"

namespace elkpp {

static_assert(std::endian::native == std::endian::little,
              "checkpoint IO assumes a little-endian host");

namespace {

template <typename U>
void put(std::string& out, U v) {
  char buf[sizeof(U)];
  std::memcpy(buf, &v, sizeof(U));
  out.append(buf, sizeof(U));
}

class Cursor {
 public:
  Cursor(const std::string& bytes, const std::string& source)
      : bytes_(bytes), source_(source) {}

  template <typename U>
  U get(const char* what) {
    need(sizeof(U), what);
    U v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(U));
    pos_ += sizeof(U);
    return v;
  }

  std::string bytes(std::size_t n, const char* what) {
    need(n, what);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  void floats(float* dst, std::size_t n, const char* what) {
    if (n > (bytes_.size() - pos_) / sizeof(float)) fail(std::string("truncated ") + what);
    std::memcpy(dst, bytes_.data() + pos_, n * sizeof(float));
    pos_ += n * sizeof(float);
  }

  bool done() const { return pos_ == bytes_.size(); }

  [[noreturn]] void fail(const std::string& what) const {
    throw FormatError(source_ + ": checkpoint " + what + " (offset " +
                      std::to_string(pos_) + ")");
  }

 private:
  void need(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) fail(std::string("truncated ") + what);
  }

  const std::string& bytes_;
  const std::string& source_;
  std::size_t pos_ = 0;
};

template <typename T>
Tensor<float> to_f32(const Tensor<T>& t) {
  return t.template cast<float>();
}

template <typename T>
void assign(Tensor<T>& dst, const Tensor<float>& src, const std::string& name) {
  if (dst.shape() != src.shape()) {
    throw FormatError("checkpoint tensor " + name + " has shape " +
                      shape_str(src.shape()) + ", expected " + shape_str(dst.shape()));
  }
  dst = src.template cast<T>();
}

const Tensor<float>& lookup(const Checkpoint& ckpt, const std::string& name) {
  auto it = ckpt.tensors.find(name);
  if (it == ckpt.tensors.end()) throw FormatError("checkpoint lacks tensor " + name);
  return it->second;
}

}  // namespace

std::string encode_checkpoint(const Checkpoint& ckpt) {
  std::string out = "ELKP";
  put<std::uint8_t>(out, ckpt.version);
  put<std::uint64_t>(out, ckpt.iteration);
  put<std::uint64_t>(out, ckpt.config_digest);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& [name, t] : ckpt.tensors) {
    if (name.size() > std::numeric_limits<std::uint16_t>::max()) {
      throw FormatError("checkpoint: tensor name too long: " + name);
    }
    if (t.rank() > 255) throw FormatError("checkpoint: rank too large for " + name);
    put<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
    out += name;
    put<std::uint8_t>(out, static_cast<std::uint8_t>(t.rank()));
    for (std::size_t d : t.shape()) {
      if (d > std::numeric_limits<std::uint32_t>::max()) {
        throw FormatError("checkpoint: dimension too large in " + name);
      }
      put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
    }
    out.append(reinterpret_cast<const char*>(t.data()), t.numel() * sizeof(float));
  }
  return out;
}

Checkpoint decode_checkpoint(const std::string& bytes, const std::string& source) {
  Cursor in(bytes, source);
  if (in.bytes(4, "magic") != "ELKP") in.fail("bad magic");
  Checkpoint ckpt;
  ckpt.version = in.get<std::uint8_t>("version");
  if (ckpt.version != kCheckpointVersion) {
    in.fail("unsupported version " + std::to_string(ckpt.version));
  }
  ckpt.iteration = in.get<std::uint64_t>("iteration");
  ckpt.config_digest = in.get<std::uint64_t>("digest");
  const auto count = in.get<std::uint32_t>("tensor count");
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = in.get<std::uint16_t>("name length");
    std::string name = in.bytes(len, "name");
    const auto rank = in.get<std::uint8_t>("rank");
    Shape shape(rank);
    std::size_t numel = 1;
    for (auto& d : shape) {
      d = in.get<std::uint32_t>("dims");
      if (d != 0 && numel > bytes.size() / d) in.fail("implausible extent for " + name);
      numel *= d;
    }
    Tensor<float> t{shape};
    in.floats(t.data(), t.numel(), "tensor data");
    if (!ckpt.tensors.emplace(name, std::move(t)).second) {
      in.fail("duplicate tensor " + name);
    }
  }
  if (!in.done()) in.fail("has trailing bytes");
  return ckpt;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const std::string bytes = encode_checkpoint(ckpt);
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary);
    if (!f) throw FormatError(tmp.string() + ": cannot open for writing");
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw FormatError(tmp.string() + ": write failed");
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError(path.string() + ": cannot open checkpoint");
  std::ostringstream buf;
  buf << f.rdbuf();
  return decode_checkpoint(buf.str(), path.string());
}

template <typename T>
Checkpoint pack_checkpoint(const ModelState<T>& state, const AdamState<T>* adam,
                           std::uint64_t iteration, std::uint64_t digest) {
  Checkpoint c;
  c.iteration = iteration;
  c.config_digest = digest;
  for (const auto& [name, p] : state.params.entries()) {
    c.tensors.emplace("param/" + name, to_f32(p.value));
  }
  for (const auto& [name, s] : state.bn_stats) {
    c.tensors.emplace("bn/" + name + "/mean", to_f32(s.mean));
    c.tensors.emplace("bn/" + name + "/var", to_f32(s.var));
  }
  if (adam) {
    for (const auto& [name, m] : adam->m) c.tensors.emplace("adam_m/" + name, to_f32(m));
    for (const auto& [name, v] : adam->v) c.tensors.emplace("adam_v/" + name, to_f32(v));
  }
  return c;
}

template <typename T>
void unpack_checkpoint(const Checkpoint& ckpt, ModelState<T>& state,
                       AdamState<T>* adam) {
  for (auto& [name, p] : state.params.entries()) {
    assign(p.value, lookup(ckpt, "param/" + name), "param/" + name);
  }
  for (auto& [name, s] : state.bn_stats) {
    assign(s.mean, lookup(ckpt, "bn/" + name + "/mean"), "bn/" + name + "/mean");
    assign(s.var, lookup(ckpt, "bn/" + name + "/var"), "bn/" + name + "/var");
  }
  if (!adam) return;
  adam->m.clear();
  adam->v.clear();
  for (const auto& [key, t] : ckpt.tensors) {
    if (key.rfind("adam_m/", 0) == 0) adam->m.emplace(key.substr(7), t.template cast<T>());
    if (key.rfind("adam_v/", 0) == 0) adam->v.emplace(key.substr(7), t.template cast<T>());
  }
  // One optimizer step per training iteration.
  adam->step = ckpt.iteration;
}

template Checkpoint pack_checkpoint(const ModelState<float>&, const AdamState<float>*,
                                    std::uint64_t, std::uint64_t);
template Checkpoint pack_checkpoint(const ModelState<double>&, const AdamState<double>*,
                                    std::uint64_t, std::uint64_t);
template void unpack_checkpoint(const Checkpoint&, ModelState<float>&, AdamState<float>*);
template void unpack_checkpoint(const Checkpoint&, ModelState<double>&, AdamState<double>*);

}  // namespace elkpp
