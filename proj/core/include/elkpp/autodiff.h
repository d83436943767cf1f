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

#include <cstddef>
#include <functional>
#include <deque>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "elkpp/tensor.h"

namespace elkpp {

template <typename T>
class Tape;

// Handle to a value recorded on a Tape. Cheap to copy; valid only while the
// owning tape is alive and has not been cleared.
template <typename T>
class Var {
 public:
  Var() = default;

  bool valid() const { return tape_ != nullptr; }
  const Tensor<T>& value() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;
  Tape<T>* tape() const { return tape_; }
  std::size_t id() const { return id_; }

 private:
  friend class Tape<T>;
  Var(Tape<T>* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape<T>* tape_ = nullptr;
  std::size_t id_ = 0;
};

// What a backward rule sees: the node's output value and incoming gradient,
// the input values, and accumulators for the inputs that need gradients
// (nullptr otherwise). Rules must add into the accumulators, never assign.
template <typename T>
struct BackwardContext {
  const Tensor<T>& out_value;
  const Tensor<T>& out_grad;
  std::span<const Tensor<T>* const> inputs;
  std::span<Tensor<T>* const> grads;
};

template <typename T>
using BackwardFn = std::function<void(const BackwardContext<T>&)>;

template <typename T>
struct Parameter {
  Tensor<T> value;
  Tensor<T> grad;
  bool frozen = false;
};

// Named trainable tensors with gradient accumulators. Iteration order is the
// lexicographic order of names.
template <typename T>
class ParameterStore {
 public:
  void add(const std::string& name, Tensor<T> value);
  bool contains(const std::string& name) const;
  Tensor<T>& value(const std::string& name);
  const Tensor<T>& value(const std::string& name) const;
  Tensor<T>& grad(const std::string& name);
  const Tensor<T>& grad(const std::string& name) const;
  void set_frozen(const std::string& name, bool frozen);
  bool frozen(const std::string& name) const;

  void zero_grad();
  std::size_t size() const { return entries_.size(); }
  std::size_t total_elements() const;
  std::vector<std::string> names() const;

  std::map<std::string, Parameter<T>>& entries() { return entries_; }
  const std::map<std::string, Parameter<T>>& entries() const {
    return entries_;
  }

 private:
  Parameter<T>& entry(const std::string& name);
  const Parameter<T>& entry(const std::string& name) const;

  std::map<std::string, Parameter<T>> entries_;
};

// Reverse-mode tape. Nodes are appended in evaluation order, so creation
// order is a topological order and backward walks it in reverse.
template <typename T>
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<T> constant(Tensor<T> value);
  Var<T> leaf(Tensor<T> value);

  // Binds a stored parameter as a leaf, once per tape. Frozen parameters are
  // bound as constants.
  Var<T> parameter(ParameterStore<T>& store, const std::string& name);
  const std::vector<std::pair<std::string, Var<T>>>& bound_parameters() const {
    return bound_;
  }

  // Records an operation result. If no input requires a gradient the rule is
  // dropped and the result is a constant.
  Var<T> record(Tensor<T> value, std::vector<Var<T>> inputs, BackwardFn<T> fn,
                const char* op);

  // Clears all gradients, seeds d(loss)/d(loss) = 1 and propagates.
  void backward(const Var<T>& loss);

  // Gradient of the last backward pass w.r.t. `v` (zeros if unreached).
  Tensor<T> grad(const Var<T>& v) const;

  // Adds leaf gradients of bound parameters into the store's accumulators.
  void accumulate_parameter_grads(ParameterStore<T>& store) const;

  std::size_t size() const { return nodes_.size(); }
  void clear();

  const Tensor<T>& value_of(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad_of(std::size_t id) const {
    return nodes_[id].requires_grad;
  }

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    std::vector<std::size_t> inputs;
    BackwardFn<T> backward;
    bool requires_grad = false;
    bool has_grad = false;
    const char* op = "leaf";
  };

  std::deque<Node> nodes_;
  std::vector<std::pair<std::string, Var<T>>> bound_;
  std::map<std::string, std::size_t> bound_index_;
};

// backward(loss, store): run the tape from `loss` and add parameter gradients
// into `store`. Parameters never bound on the tape keep a zero contribution.
template <typename T>
void backward(const Var<T>& loss, ParameterStore<T>& store);

enum class BinaryOp { kAdd, kSub, kMul, kDiv, kMax };
enum class UnaryOp { kRelu, kExp, kLog, kSqrt, kNeg, kSquare };
enum class ReduceOp { kSum, kMean, kMax };

// Shapes must be equal, or `b` must hold a single element (scalar operand).
template <typename T>
Var<T> elementwise(BinaryOp op, const Var<T>& a, const Var<T>& b);
template <typename T>
Var<T> elementwise(BinaryOp op, const Var<T>& a, T b);
template <typename T>
Var<T> elementwise(UnaryOp op, const Var<T>& a);

// Reduces over `axes` (empty means all axes); reduced axes are dropped from
// the result shape. kMax routes the gradient to the first maximal element.
template <typename T>
Var<T> reduce(ReduceOp op, const Var<T>& a, std::vector<std::size_t> axes = {});

template <typename T>
Var<T> concat(const std::vector<Var<T>>& parts, std::size_t axis);
template <typename T>
Var<T> slice(const Var<T>& a, std::size_t axis, std::size_t begin,
             std::size_t end);
template <typename T>
Var<T> reshape(const Var<T>& a, Shape shape);

// Convenience spellings.
template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  return elementwise(BinaryOp::kAdd, a, b);
}
template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  return elementwise(BinaryOp::kSub, a, b);
}
template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  return elementwise(BinaryOp::kMul, a, b);
}
template <typename T>
Var<T> div(const Var<T>& a, const Var<T>& b) {
  return elementwise(BinaryOp::kDiv, a, b);
}
template <typename T>
Var<T> add(const Var<T>& a, T b) {
  return elementwise(BinaryOp::kAdd, a, b);
}
template <typename T>
Var<T> mul(const Var<T>& a, T b) {
  return elementwise(BinaryOp::kMul, a, b);
}
template <typename T>
Var<T> relu(const Var<T>& a) {
  return elementwise(UnaryOp::kRelu, a);
}
template <typename T>
Var<T> sum(const Var<T>& a, std::vector<std::size_t> axes = {}) {
  return reduce(ReduceOp::kSum, a, std::move(axes));
}
template <typename T>
Var<T> mean(const Var<T>& a, std::vector<std::size_t> axes = {}) {
  return reduce(ReduceOp::kMean, a, std::move(axes));
}

}  // namespace elkpp
