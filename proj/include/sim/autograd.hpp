// Copyright 2026  The smoothnce Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Tape-free reverse-mode autodiff. Every op builds a Node that keeps its
// parents and a closure computing the parents' gradient contributions;
// backward() walks the DAG in reverse topological order.
//
// Nodes whose inputs all have requires_grad == false drop their parents and
// closure right away, so inference builds no graph.

#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "sim/tensor.hpp"

namespace sim {

struct Node {
  Tensor value;
  Tensor grad;  // same shape as value once allocated
  bool requires_grad = false;
  std::string name;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node &)> backward_fn;

  /// Allocates a zero gradient on first use.
  Tensor &grad_buffer();
};

/// Handle to a graph node. Copies share the node.
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  /// Leaf holding `value`; parameters pass requires_grad = true.
  static Var leaf(Tensor value, bool requires_grad = false, std::string name = {});
  static Var constant(Tensor value) { return leaf(std::move(value), false); }

  const Tensor &value() const { return node_->value; }
  const Tensor &grad() const { return node_->grad; }
  Tensor &mutable_value() { return node_->value; }
  Tensor &mutable_grad() { return node_->grad_buffer(); }
  const Shape &shape() const { return node_->value.shape(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  const std::string &name() const { return node_->name; }
  bool valid() const { return static_cast<bool>(node_); }
  float item() const;

  const std::shared_ptr<Node> &node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

/// Result node for an op. `backward` receives the result node and adds into
/// each parent's grad_buffer() when that parent requires grad.
/// While alive on a thread, results record no graph (inference mode).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard &) = delete;
  NoGradGuard &operator=(const NoGradGuard &) = delete;

 private:
  bool previous_;
};
bool grad_enabled();

Var make_result(Tensor value, std::vector<Var> parents, std::function<void(Node &)> backward);

/// Reverse-mode pass from a scalar (numel == 1) loss. Parameter gradients
/// accumulate: call zero_grad between steps. Throws on a non-scalar loss.
void backward(const Var &loss);

/// Leaf copy of `v` that stops gradients (the module gradient barrier).
Var detach(const Var &v);

/// A named trainable leaf. id is a stable path such as "module1.conv0.weight".
struct Parameter {
  std::string id;
  Var var;

  const Tensor &value() const { return var.value(); }
  Tensor &value() { return var.mutable_value(); }
  const Tensor &grad() const { return var.grad(); }
};

Parameter make_parameter(std::string id, Tensor init);
void zero_grad(std::vector<Parameter *> params);

}  // namespace sim
