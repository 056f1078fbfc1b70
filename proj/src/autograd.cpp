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

#include "sim/autograd.hpp"

#include <unordered_set>
#include <utility>

namespace sim {

Tensor &Node::grad_buffer() {
  if (grad.shape() != value.shape()) grad = Tensor(value.shape(), 0.0f);
  return grad;
}

Var Var::leaf(Tensor value, bool requires_grad, std::string name) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = requires_grad;
  node->name = std::move(name);
  return Var(std::move(node));
}

float Var::item() const {
  if (value().numel() != 1)
    throw ShapeError("item() on tensor of shape " + shape_string(shape()));
  return value()[0];
}

namespace {
thread_local bool grad_mode = true;
}  // namespace

bool grad_enabled() { return grad_mode; }

NoGradGuard::NoGradGuard() : previous_(grad_mode) { grad_mode = false; }
NoGradGuard::~NoGradGuard() { grad_mode = previous_; }

Var make_result(Tensor value, std::vector<Var> parents, std::function<void(Node &)> backward) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  if (grad_mode)
    for (const auto &p : parents)
      if (p.requires_grad()) node->requires_grad = true;
  if (node->requires_grad) {
    node->parents.reserve(parents.size());
    for (auto &p : parents) node->parents.push_back(p.node());
    node->backward_fn = std::move(backward);
  }
  return Var(std::move(node));
}

void backward(const Var &loss) {
  if (!loss.valid()) throw std::invalid_argument("backward on an empty Var");
  if (loss.value().numel() != 1)
    throw ShapeError("backward requires a scalar loss, got shape " +
                     shape_string(loss.shape()));
  if (!loss.requires_grad()) return;

  // Iterative post-order DFS gives a topological order (parents first).
  std::vector<Node *> order;
  std::unordered_set<Node *> visited;
  std::vector<std::pair<Node *, std::size_t>> stack{{loss.node().get(), 0}};
  visited.insert(loss.node().get());
  while (!stack.empty()) {
    auto &[node, next] = stack.back();
    if (next < node->parents.size()) {
      Node *parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) stack.push_back({parent, 0});
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  loss.node()->grad_buffer()[0] += 1.0f;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node *node = *it;
    if (!node->backward_fn) continue;
    node->grad_buffer();
    node->backward_fn(*node);
    node->grad.check_finite("gradient of " + (node->name.empty() ? "intermediate" : node->name));
  }
  // Interior gradients are transient; leaves keep theirs.
  for (Node *node : order)
    if (node->backward_fn) node->grad = Tensor();
}

Var detach(const Var &v) { return Var::leaf(v.value(), false); }

Parameter make_parameter(std::string id, Tensor init) {
  Var var = Var::leaf(std::move(init), true, id);
  var.mutable_grad();
  return Parameter{std::move(id), std::move(var)};
}

void zero_grad(std::vector<Parameter *> params) {
  for (auto *p : params) p->var.mutable_grad().fill(0.0f);
}

}  // namespace sim
