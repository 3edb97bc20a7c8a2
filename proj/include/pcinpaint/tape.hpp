// Copyright 2026 The pcinpaint Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pcinpaint/tensor.hpp"

namespace pcinpaint {

class GradTape;

/// Handle to a value recorded on a GradTape. Cheap to copy; valid for the
/// lifetime of the tape that produced it.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  GradTape& tape() const { return *tape_; }
  int64_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class GradTape;
  Var(GradTape* tape, int64_t id) : tape_(tape), id_(id) {}

  GradTape* tape_ = nullptr;
  int64_t id_ = -1;
};

/// Ordered record of executed operations for reverse-mode differentiation.
///
/// Nodes are appended in execution order. backward() walks them in exact
/// reverse order, so every consumer of a value has deposited its gradient
/// before that value's own backward function runs. Gradients from multiple
/// consumers accumulate additively.
class GradTape {
 public:
  // Receives the gradient of the node's output and accumulates into inputs.
  using BackwardFn = std::function<void(GradTape&, const Tensor& grad_out)>;

  GradTape() = default;
  GradTape(const GradTape&) = delete;
  GradTape& operator=(const GradTape&) = delete;

  Var constant(Tensor value) { return push(std::move(value), false, nullptr, {}); }

  // A named leaf whose gradient is reported by backward().
  Var parameter(const std::string& name, Tensor value) {
    if (params_.count(name)) throw std::invalid_argument("duplicate parameter name: " + name);
    Var v = push(std::move(value), true, nullptr, name);
    params_.emplace(name, v.id_);
    return v;
  }

  // Records an op result. The backward function is dropped when no input
  // requires a gradient.
  Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn) {
    bool needs = false;
    for (const Var& in : inputs) {
      check_owner(in);
      needs = needs || nodes_[static_cast<size_t>(in.id_)].requires_grad;
    }
    if (!value.all_finite()) throw std::domain_error("non-finite value produced on tape");
    return push(std::move(value), needs, needs ? std::move(fn) : nullptr, {});
  }

  const Tensor& value(const Var& v) const {
    check_owner(v);
    return nodes_[static_cast<size_t>(v.id_)].value;
  }

  bool requires_grad(const Var& v) const {
    check_owner(v);
    return nodes_[static_cast<size_t>(v.id_)].requires_grad;
  }

  // Gradient accumulator for `v`, zero-initialized on first use. Only valid
  // during backward().
  Tensor& grad(const Var& v) {
    check_owner(v);
    auto& slot = grads_[static_cast<size_t>(v.id_)];
    if (!slot) slot.emplace(nodes_[static_cast<size_t>(v.id_)].value.shape());
    return *slot;
  }

  void accumulate(const Var& v, const Tensor& g) {
    if (!requires_grad(v)) return;
    Tensor& dst = grad(v);
    require_same_shape(dst, g, "accumulate");
    float* d = dst.ptr();
    const float* s = g.ptr();
    for (int64_t i = 0; i < dst.numel(); ++i) d[i] += s[i];
  }

  size_t size() const { return nodes_.size(); }

  std::optional<Var> find_parameter(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) return std::nullopt;
    return Var(this, it->second);
  }

  /// Reverse pass from a scalar loss. Returns one gradient per parameter
  /// (zeros when the loss does not depend on it).
  std::map<std::string, Tensor> backward(const Var& loss) {
    check_owner(loss);
    const Tensor& lv = value(loss);
    if (lv.numel() != 1) {
      throw ShapeError("backward: loss must be a scalar, got shape " + lv.shape().str());
    }
    grads_.assign(nodes_.size(), std::nullopt);
    grads_[static_cast<size_t>(loss.id_)] = Tensor(lv.shape(), 1.0f);
    for (int64_t i = loss.id_; i >= 0; --i) {
      auto& node = nodes_[static_cast<size_t>(i)];
      auto& g = grads_[static_cast<size_t>(i)];
      if (!g || !node.backward) continue;
      node.backward(*this, *g);
      if (node.name.empty()) g.reset();
    }
    std::map<std::string, Tensor> out;
    for (const auto& [name, id] : params_) {
      auto& g = grads_[static_cast<size_t>(id)];
      out.emplace(name, g ? std::move(*g) : Tensor(nodes_[static_cast<size_t>(id)].value.shape()));
    }
    grads_.clear();
    return out;
  }

 private:
  struct Node {
    Tensor value;
    bool requires_grad = false;
    BackwardFn backward;
    std::string name;
  };

  Var push(Tensor value, bool requires_grad, BackwardFn fn, std::string name) {
    nodes_.push_back(Node{std::move(value), requires_grad, std::move(fn), std::move(name)});
    return Var(this, static_cast<int64_t>(nodes_.size()) - 1);
  }

  void check_owner(const Var& v) const {
    if (v.tape_ != this || v.id_ < 0 || v.id_ >= static_cast<int64_t>(nodes_.size())) {
      throw std::invalid_argument("variable does not belong to this tape");
    }
  }

  std::deque<Node> nodes_;
  std::map<std::string, int64_t> params_;
  std::vector<std::optional<Tensor>> grads_;
};

inline const Tensor& Var::value() const { return tape_->value(*this); }

}  // namespace pcinpaint
