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
#include "elkpp/autodiff.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "elkpp/error.h"

namespace elkpp {

template <typename T>
const Tensor<T>& Var<T>::value() const {
  if (!tape_) throw Error("access to an unbound Var");
  return tape_->value_of(id_);
}

template <typename T>
bool Var<T>::requires_grad() const {
  return tape_ != nullptr && tape_->requires_grad_of(id_);
}

// ---------------------------------------------------------------------------
// ParameterStore

template <typename T>
void ParameterStore<T>::add(const std::string& name, Tensor<T> value) {
  if (entries_.count(name)) {
    throw ConfigError("duplicate parameter name '" + name + "'");
  }
  Parameter<T> p;
  p.grad = Tensor<T>::zeros_like(value);
  p.value = std::move(value);
  entries_.emplace(name, std::move(p));
}

template <typename T>
bool ParameterStore<T>::contains(const std::string& name) const {
  return entries_.count(name) != 0;
}

template <typename T>
Parameter<T>& ParameterStore<T>::entry(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw Error("unknown parameter '" + name + "'");
  return it->second;
}

template <typename T>
const Parameter<T>& ParameterStore<T>::entry(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw Error("unknown parameter '" + name + "'");
  return it->second;
}

template <typename T>
Tensor<T>& ParameterStore<T>::value(const std::string& name) {
  return entry(name).value;
}
template <typename T>
const Tensor<T>& ParameterStore<T>::value(const std::string& name) const {
  return entry(name).value;
}
template <typename T>
Tensor<T>& ParameterStore<T>::grad(const std::string& name) {
  return entry(name).grad;
}
template <typename T>
const Tensor<T>& ParameterStore<T>::grad(const std::string& name) const {
  return entry(name).grad;
}
template <typename T>
void ParameterStore<T>::set_frozen(const std::string& name, bool frozen) {
  entry(name).frozen = frozen;
}
template <typename T>
bool ParameterStore<T>::frozen(const std::string& name) const {
  return entry(name).frozen;
}

template <typename T>
void ParameterStore<T>::zero_grad() {
  for (auto& [name, p] : entries_) p.grad.fill(T(0));
}

template <typename T>
std::size_t ParameterStore<T>::total_elements() const {
  std::size_t n = 0;
  for (const auto& [name, p] : entries_) n += p.value.numel();
  return n;
}

template <typename T>
std::vector<std::string> ParameterStore<T>::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& [name, p] : entries_) out.push_back(name);
  return out;
}

// ---------------------------------------------------------------------------
// Tape

template <typename T>
Var<T> Tape<T>::constant(Tensor<T> value) {
  Node n;
  n.value = std::move(value);
  n.op = "constant";
  nodes_.push_back(std::move(n));
  return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
Var<T> Tape<T>::leaf(Tensor<T> value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
Var<T> Tape<T>::parameter(ParameterStore<T>& store, const std::string& name) {
  auto it = bound_index_.find(name);
  if (it != bound_index_.end()) return bound_[it->second].second;
  const Tensor<T>& v = store.value(name);
  Var<T> var = store.frozen(name) ? constant(v) : leaf(v);
  bound_index_.emplace(name, bound_.size());
  bound_.emplace_back(name, var);
  return var;
}

template <typename T>
Var<T> Tape<T>::record(Tensor<T> value, std::vector<Var<T>> inputs,
                       BackwardFn<T> fn, const char* op) {
  check_finite(value, op);
  Node n;
  n.value = std::move(value);
  n.op = op;
  for (const Var<T>& in : inputs) {
    if (in.tape() != this) {
      throw Error(std::string(op) + ": input recorded on a different tape");
    }
    n.requires_grad = n.requires_grad || nodes_[in.id()].requires_grad;
  }
  if (n.requires_grad) {
    n.inputs.reserve(inputs.size());
    for (const Var<T>& in : inputs) n.inputs.push_back(in.id());
    n.backward = std::move(fn);
  }
  nodes_.push_back(std::move(n));
  return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
void Tape<T>::backward(const Var<T>& loss) {
  if (loss.tape() != this) throw Error("backward: loss is not on this tape");
  if (loss.value().numel() != 1) {
    throw ShapeError("backward: loss must be a scalar, got shape " +
                     shape_str(loss.shape()));
  }
  for (Node& n : nodes_) {
    n.has_grad = false;
    n.grad = Tensor<T>();
  }
  Node& root = nodes_[loss.id()];
  if (!root.requires_grad) return;
  root.grad = Tensor<T>(root.value.shape(), T(1));
  root.has_grad = true;

  std::vector<const Tensor<T>*> in_values;
  std::vector<Tensor<T>*> in_grads;
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.has_grad || !n.backward) continue;
    in_values.clear();
    in_grads.clear();
    for (std::size_t in : n.inputs) {
      Node& src = nodes_[in];
      in_values.push_back(&src.value);
      if (src.requires_grad) {
        if (!src.has_grad) {
          src.grad = Tensor<T>::zeros_like(src.value);
          src.has_grad = true;
        }
        in_grads.push_back(&src.grad);
      } else {
        in_grads.push_back(nullptr);
      }
    }
    BackwardContext<T> ctx{n.value, n.grad, in_values, in_grads};
    n.backward(ctx);
    if (verification_mode()) {
      for (Tensor<T>* g : in_grads) {
        if (g) check_finite(*g, n.op);
      }
    }
  }
}

template <typename T>
Tensor<T> Tape<T>::grad(const Var<T>& v) const {
  const Node& n = nodes_[v.id()];
  if (!n.has_grad) return Tensor<T>::zeros_like(n.value);
  return n.grad;
}

template <typename T>
void Tape<T>::accumulate_parameter_grads(ParameterStore<T>& store) const {
  for (const auto& [name, var] : bound_) {
    const Node& n = nodes_[var.id()];
    if (n.has_grad && n.requires_grad) store.grad(name) += n.grad;
  }
}

template <typename T>
void Tape<T>::clear() {
  nodes_.clear();
  bound_.clear();
  bound_index_.clear();
}

template <typename T>
void backward(const Var<T>& loss, ParameterStore<T>& store) {
  loss.tape()->backward(loss);
  loss.tape()->accumulate_parameter_grads(store);
}

// ---------------------------------------------------------------------------
// Elementwise

namespace {

template <typename T>
T apply_binary(BinaryOp op, T a, T b) {
  switch (op) {
    case BinaryOp::kAdd: return a + b;
    case BinaryOp::kSub: return a - b;
    case BinaryOp::kMul: return a * b;
    case BinaryOp::kDiv: return a / b;
    case BinaryOp::kMax: return a >= b ? a : b;
  }
  return T(0);
}

const char* binary_name(BinaryOp op) {
  switch (op) {
    case BinaryOp::kAdd: return "add";
    case BinaryOp::kSub: return "sub";
    case BinaryOp::kMul: return "mul";
    case BinaryOp::kDiv: return "div";
    case BinaryOp::kMax: return "max";
  }
  return "binary";
}

const char* unary_name(UnaryOp op) {
  switch (op) {
    case UnaryOp::kRelu: return "relu";
    case UnaryOp::kExp: return "exp";
    case UnaryOp::kLog: return "log";
    case UnaryOp::kSqrt: return "sqrt";
    case UnaryOp::kNeg: return "neg";
    case UnaryOp::kSquare: return "square";
  }
  return "unary";
}

// d(a op b)/da and d(a op b)/db at a single point.
template <typename T>
void binary_partials(BinaryOp op, T a, T b, T& da, T& db) {
  switch (op) {
    case BinaryOp::kAdd: da = 1; db = 1; return;
    case BinaryOp::kSub: da = 1; db = -1; return;
    case BinaryOp::kMul: da = b; db = a; return;
    case BinaryOp::kDiv: da = T(1) / b; db = -a / (b * b); return;
    case BinaryOp::kMax:
      // Ties go to the first operand.
      da = a >= b ? T(1) : T(0);
      db = a >= b ? T(0) : T(1);
      return;
  }
}

}  // namespace

template <typename T>
Var<T> elementwise(BinaryOp op, const Var<T>& a, const Var<T>& b) {
  const Tensor<T>& av = a.value();
  const Tensor<T>& bv = b.value();
  const bool scalar_b = bv.numel() == 1 && av.shape() != bv.shape();
  if (!scalar_b && av.shape() != bv.shape()) {
    throw ShapeError(std::string(binary_name(op)) + ": shape mismatch " +
                     shape_str(av.shape()) + " vs " + shape_str(bv.shape()));
  }
  Tensor<T> out(av.shape());
  const std::size_t n = av.numel();
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = apply_binary(op, av[i], scalar_b ? bv[0] : bv[i]);
  }
  return a.tape()->record(
      std::move(out), {a, b},
      [op, scalar_b](const BackwardContext<T>& ctx) {
        const Tensor<T>& x = *ctx.inputs[0];
        const Tensor<T>& y = *ctx.inputs[1];
        Tensor<T>* gx = ctx.grads[0];
        Tensor<T>* gy = ctx.grads[1];
        const Tensor<T>& go = ctx.out_grad;
        T acc = 0;
        for (std::size_t i = 0; i < x.numel(); ++i) {
          T da = 0, db = 0;
          const T yi = scalar_b ? y[0] : y[i];
          binary_partials(op, x[i], yi, da, db);
          if (gx) (*gx)[i] += go[i] * da;
          if (gy) {
            if (scalar_b) {
              acc += go[i] * db;
            } else {
              (*gy)[i] += go[i] * db;
            }
          }
        }
        if (gy && scalar_b) (*gy)[0] += acc;
      },
      binary_name(op));
}

template <typename T>
Var<T> elementwise(BinaryOp op, const Var<T>& a, T b) {
  return elementwise(op, a, a.tape()->constant(Tensor<T>::scalar(b)));
}

template <typename T>
Var<T> elementwise(UnaryOp op, const Var<T>& a) {
  const Tensor<T>& av = a.value();
  if (verification_mode() && (op == UnaryOp::kLog || op == UnaryOp::kSqrt)) {
    for (T v : av.values()) {
      if (v < T(0)) {
        throw DomainError(std::string(unary_name(op)) +
                          " of negative argument " + std::to_string(v));
      }
    }
  }
  Tensor<T> out(av.shape());
  for (std::size_t i = 0; i < av.numel(); ++i) {
    const T x = av[i];
    switch (op) {
      case UnaryOp::kRelu: out[i] = x > T(0) ? x : T(0); break;
      case UnaryOp::kExp: out[i] = std::exp(x); break;
      case UnaryOp::kLog: out[i] = std::log(x); break;
      case UnaryOp::kSqrt: out[i] = std::sqrt(x); break;
      case UnaryOp::kNeg: out[i] = -x; break;
      case UnaryOp::kSquare: out[i] = x * x; break;
    }
  }
  return a.tape()->record(
      std::move(out), {a},
      [op](const BackwardContext<T>& ctx) {
        const Tensor<T>& x = *ctx.inputs[0];
        const Tensor<T>& y = ctx.out_value;
        const Tensor<T>& go = ctx.out_grad;
        Tensor<T>& gx = *ctx.grads[0];
        for (std::size_t i = 0; i < x.numel(); ++i) {
          T d = 0;
          switch (op) {
            case UnaryOp::kRelu: d = x[i] > T(0) ? T(1) : T(0); break;
            case UnaryOp::kExp: d = y[i]; break;
            case UnaryOp::kLog: d = T(1) / x[i]; break;
            // Subgradient 0 at the origin keeps sqrt usable on norms.
            case UnaryOp::kSqrt: d = y[i] > T(0) ? T(0.5) / y[i] : T(0); break;
            case UnaryOp::kNeg: d = -1; break;
            case UnaryOp::kSquare: d = T(2) * x[i]; break;
          }
          gx[i] += go[i] * d;
        }
      },
      unary_name(op));
}

// ---------------------------------------------------------------------------
// Reductions

namespace {

struct ReducePlan {
  Shape out_shape;
  std::vector<std::size_t> out_index;  // input flat index -> output flat index
  std::size_t group = 1;               // elements folded into each output
};

ReducePlan plan_reduction(const Shape& shape, std::vector<std::size_t> axes) {
  if (axes.empty()) {
    axes.resize(shape.size());
    std::iota(axes.begin(), axes.end(), 0);
  }
  std::vector<bool> reduced(shape.size(), false);
  for (std::size_t ax : axes) {
    if (ax >= shape.size()) {
      throw ShapeError("reduce: axis " + std::to_string(ax) +
                       " out of range for shape " + shape_str(shape));
    }
    if (reduced[ax]) throw ShapeError("reduce: duplicate axis");
    if (shape[ax] == 0) throw ShapeError("reduce: empty reduction axis");
    reduced[ax] = true;
  }
  ReducePlan plan;
  std::vector<std::size_t> out_stride(shape.size(), 0);
  std::size_t stride = 1;
  for (std::size_t ax = shape.size(); ax-- > 0;) {
    if (reduced[ax]) {
      plan.group *= shape[ax];
    } else {
      out_stride[ax] = stride;
      stride *= shape[ax];
    }
  }
  for (std::size_t ax = 0; ax < shape.size(); ++ax) {
    if (!reduced[ax]) plan.out_shape.push_back(shape[ax]);
  }
  const std::size_t n = shape_numel(shape);
  plan.out_index.resize(n);
  std::vector<std::size_t> coord(shape.size(), 0);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t o = 0;
    for (std::size_t ax = 0; ax < shape.size(); ++ax) {
      o += coord[ax] * out_stride[ax];
    }
    plan.out_index[i] = o;
    for (std::size_t ax = shape.size(); ax-- > 0;) {
      if (++coord[ax] < shape[ax]) break;
      coord[ax] = 0;
    }
  }
  return plan;
}

const char* reduce_name(ReduceOp op) {
  switch (op) {
    case ReduceOp::kSum: return "reduce_sum";
    case ReduceOp::kMean: return "reduce_mean";
    case ReduceOp::kMax: return "reduce_max";
  }
  return "reduce";
}

}  // namespace

template <typename T>
Var<T> reduce(ReduceOp op, const Var<T>& a, std::vector<std::size_t> axes) {
  const Tensor<T>& av = a.value();
  auto plan = std::make_shared<ReducePlan>(plan_reduction(av.shape(), axes));
  Tensor<T> out(plan->out_shape);
  const std::size_t n = av.numel();
  std::vector<std::size_t> argmax;
  if (op == ReduceOp::kMax) {
    argmax.assign(out.numel(), n);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t o = plan->out_index[i];
      if (argmax[o] == n || av[i] > out[o]) {
        out[o] = av[i];
        argmax[o] = i;
      }
    }
  } else {
    // Left-to-right accumulation in input order.
    for (std::size_t i = 0; i < n; ++i) out[plan->out_index[i]] += av[i];
    if (op == ReduceOp::kMean) {
      const T inv = T(1) / static_cast<T>(plan->group);
      for (T& v : out.values()) v *= inv;
    }
  }
  return a.tape()->record(
      std::move(out), {a},
      [op, plan, argmax = std::move(argmax)](const BackwardContext<T>& ctx) {
        Tensor<T>& gx = *ctx.grads[0];
        const Tensor<T>& go = ctx.out_grad;
        if (op == ReduceOp::kMax) {
          for (std::size_t o = 0; o < argmax.size(); ++o) {
            gx[argmax[o]] += go[o];
          }
          return;
        }
        const T scale =
            op == ReduceOp::kMean ? T(1) / static_cast<T>(plan->group) : T(1);
        for (std::size_t i = 0; i < gx.numel(); ++i) {
          gx[i] += go[plan->out_index[i]] * scale;
        }
      },
      reduce_name(op));
}

// ---------------------------------------------------------------------------
// Structural ops

template <typename T>
Var<T> concat(const std::vector<Var<T>>& parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const Shape& first = parts[0].shape();
  if (axis >= first.size()) throw ShapeError("concat: axis out of range");
  Shape out_shape = first;
  out_shape[axis] = 0;
  std::vector<std::size_t> extents;
  for (const Var<T>& p : parts) {
    const Shape& s = p.shape();
    if (s.size() != first.size()) throw ShapeError("concat: rank mismatch");
    for (std::size_t ax = 0; ax < s.size(); ++ax) {
      if (ax != axis && s[ax] != first[ax]) {
        throw ShapeError("concat: extent mismatch " + shape_str(s) + " vs " +
                         shape_str(first));
      }
    }
    extents.push_back(s[axis]);
    out_shape[axis] += s[axis];
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t ax = 0; ax < axis; ++ax) outer *= first[ax];
  for (std::size_t ax = axis + 1; ax < first.size(); ++ax) inner *= first[ax];
  const std::size_t total = out_shape[axis];

  Tensor<T> out(out_shape);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor<T>& src = parts[k].value();
    const std::size_t block = extents[k] * inner;
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(src.data() + o * block, block,
                  out.data() + (o * total + offset) * inner);
    }
    offset += extents[k];
  }
  return parts[0].tape()->record(
      std::move(out), parts,
      [extents, outer, inner, total](const BackwardContext<T>& ctx) {
        std::size_t offset = 0;
        for (std::size_t k = 0; k < extents.size(); ++k) {
          const std::size_t block = extents[k] * inner;
          if (Tensor<T>* g = ctx.grads[k]) {
            for (std::size_t o = 0; o < outer; ++o) {
              const T* src = ctx.out_grad.data() + (o * total + offset) * inner;
              T* dst = g->data() + o * block;
              for (std::size_t i = 0; i < block; ++i) dst[i] += src[i];
            }
          }
          offset += extents[k];
        }
      },
      "concat");
}

template <typename T>
Var<T> slice(const Var<T>& a, std::size_t axis, std::size_t begin,
             std::size_t end) {
  const Shape& s = a.shape();
  if (axis >= s.size() || begin > end || end > s[axis]) {
    throw ShapeError("slice: invalid range on shape " + shape_str(s));
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t ax = 0; ax < axis; ++ax) outer *= s[ax];
  for (std::size_t ax = axis + 1; ax < s.size(); ++ax) inner *= s[ax];
  Shape out_shape = s;
  out_shape[axis] = end - begin;
  const std::size_t full = s[axis];
  const std::size_t block = (end - begin) * inner;
  Tensor<T> out(out_shape);
  const Tensor<T>& src = a.value();
  for (std::size_t o = 0; o < outer; ++o) {
    std::copy_n(src.data() + (o * full + begin) * inner, block,
                out.data() + o * block);
  }
  return a.tape()->record(
      std::move(out), {a},
      [outer, inner, full, begin, block](const BackwardContext<T>& ctx) {
        Tensor<T>& g = *ctx.grads[0];
        for (std::size_t o = 0; o < outer; ++o) {
          const T* src = ctx.out_grad.data() + o * block;
          T* dst = g.data() + (o * full + begin) * inner;
          for (std::size_t i = 0; i < block; ++i) dst[i] += src[i];
        }
      },
      "slice");
}

template <typename T>
Var<T> reshape(const Var<T>& a, Shape shape) {
  Tensor<T> out = a.value().reshaped(std::move(shape));
  return a.tape()->record(
      std::move(out), {a},
      [](const BackwardContext<T>& ctx) {
        Tensor<T>& g = *ctx.grads[0];
        for (std::size_t i = 0; i < g.numel(); ++i) g[i] += ctx.out_grad[i];
      },
      "reshape");
}

#define ELKPP_INSTANTIATE(T)                                                \
  template class Var<T>;                                                    \
  template class ParameterStore<T>;                                         \
  template class Tape<T>;                                                   \
  template void backward(const Var<T>&, ParameterStore<T>&);                \
  template Var<T> elementwise(BinaryOp, const Var<T>&, const Var<T>&);      \
  template Var<T> elementwise(BinaryOp, const Var<T>&, T);                  \
  template Var<T> elementwise(UnaryOp, const Var<T>&);                      \
  template Var<T> reduce(ReduceOp, const Var<T>&, std::vector<std::size_t>); \
  template Var<T> concat(const std::vector<Var<T>>&, std::size_t);          \
  template Var<T> slice(const Var<T>&, std::size_t, std::size_t,            \
                        std::size_t);                                       \
  template Var<T> reshape(const Var<T>&, Shape);

ELKPP_INSTANTIATE(float)
ELKPP_INSTANTIATE(double)
#undef ELKPP_INSTANTIATE

}  // namespace elkpp
