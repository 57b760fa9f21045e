// Copyright 2026 The Reinformer-cpp Authors.
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

#include "reinformer/tensor.h"

#include <atomic>
#include <sstream>
#include <unordered_map>
#include <unordered_set>
#include <utility>

#include "reinformer/errors.h"

namespace reinformer {
namespace {

std::atomic<uint64_t> g_next_node_id{1};
thread_local bool g_grad_enabled = true;

std::shared_ptr<internal::Node> NewNode(std::string op, Shape shape,
                                        std::vector<double> value) {
  if (NumElements(shape) != static_cast<int64_t>(value.size())) {
    throw DimensionError("tensor data length " + std::to_string(value.size()) +
                         " does not match shape " + ShapeToString(shape));
  }
  auto node = std::make_shared<internal::Node>();
  node->id = g_next_node_id.fetch_add(1, std::memory_order_relaxed);
  node->op = std::move(op);
  node->shape = std::move(shape);
  node->value = std::move(value);
  return node;
}

}  // namespace

int64_t NumElements(const Shape& shape) {
  int64_t n = 1;
  for (int64_t d : shape) {
    if (d <= 0) throw DimensionError("non-positive dimension in shape " +
                                     ShapeToString(shape));
    n *= d;
  }
  return n;
}

std::string ShapeToString(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ", ";
    out << shape[i];
  }
  out << ']';
  return out.str();
}

Tensor Tensor::Zeros(Shape shape, bool requires_grad) {
  return Full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::Full(Shape shape, double value, bool requires_grad) {
  const int64_t n = NumElements(shape);
  return FromData(std::move(shape), std::vector<double>(n, value),
                  requires_grad);
}

Tensor Tensor::FromData(Shape shape, std::vector<double> data,
                        bool requires_grad) {
  auto node = NewNode("leaf", std::move(shape), std::move(data));
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::Scalar(double value, bool requires_grad) {
  return FromData({}, {value}, requires_grad);
}

const Shape& Tensor::shape() const {
  if (!node_) throw ContractError("use of an undefined tensor");
  return node_->shape;
}

int64_t Tensor::dim(int axis) const {
  const Shape& s = shape();
  if (axis < 0) axis += static_cast<int>(s.size());
  if (axis < 0 || axis >= static_cast<int>(s.size())) {
    throw DimensionError("axis " + std::to_string(axis) +
                         " out of range for shape " + ShapeToString(s));
  }
  return s[axis];
}

int64_t Tensor::size() const {
  if (!node_) throw ContractError("use of an undefined tensor");
  return static_cast<int64_t>(node_->value.size());
}

std::span<const double> Tensor::data() const {
  if (!node_) throw ContractError("use of an undefined tensor");
  return node_->value;
}

std::span<double> Tensor::mutable_data() {
  if (!node_) throw ContractError("use of an undefined tensor");
  return node_->value;
}

double Tensor::item() const {
  if (size() != 1) {
    throw DimensionError("item() on tensor of shape " +
                         ShapeToString(shape()));
  }
  return node_->value[0];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

void Tensor::set_requires_grad(bool requires_grad) {
  if (!node_) throw ContractError("use of an undefined tensor");
  node_->requires_grad = requires_grad;
}

bool Tensor::has_grad() const { return node_ && !node_->grad.empty(); }

std::vector<double> Tensor::grad() const {
  if (!node_) throw ContractError("use of an undefined tensor");
  if (node_->grad.empty()) return std::vector<double>(node_->value.size(), 0.0);
  return node_->grad;
}

void Tensor::ZeroGrad() {
  if (node_) node_->grad.clear();
}

Tensor Tensor::Detach() const {
  return FromData(shape(), node_->value, false);
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) {
  g_grad_enabled = false;
}

NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool GradRecordingEnabled() { return g_grad_enabled; }

Tape Tape::Record(const Tensor& root) {
  Tape tape;
  tape.root_ = root.shared_node();
  if (!root.defined()) throw ContractError("backward from undefined tensor");

  // Iterative post-order DFS; a node is emitted after all of its inputs.
  std::unordered_set<internal::Node*> visited;
  std::vector<std::pair<internal::Node*, size_t>> stack;
  stack.emplace_back(root.node(), 0);
  visited.insert(root.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      internal::Node* child = node->inputs[next++].get();
      if (child->requires_grad && visited.insert(child).second) {
        stack.emplace_back(child, 0);
      }
      continue;
    }
    tape.order_.push_back(node);
    stack.pop_back();
  }

  tape.entries_.reserve(tape.order_.size());
  for (internal::Node* node : tape.order_) {
    Entry entry{node->id, node->op, {}};
    for (const auto& in : node->inputs) entry.input_ids.push_back(in->id);
    tape.entries_.push_back(std::move(entry));
  }
  return tape;
}

bool Tape::IsTopologicallyOrdered() const {
  std::unordered_map<uint64_t, size_t> position;
  for (size_t i = 0; i < entries_.size(); ++i) position[entries_[i].output_id] = i;
  for (size_t i = 0; i < entries_.size(); ++i) {
    for (uint64_t in : entries_[i].input_ids) {
      auto it = position.find(in);
      if (it != position.end() && it->second >= i) return false;
    }
  }
  return true;
}

void Tape::Run() {
  if (!root_ || !root_->requires_grad) return;
  auto& seed = root_->MutableGrad();
  for (double& g : seed) g += 1.0;
  for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
    internal::Node* node = *it;
    if (node->backward && !node->grad.empty()) node->backward(*node);
  }
}

void Backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1) {
    throw ContractError("backward requires a scalar loss, got shape " +
                        (loss.defined() ? ShapeToString(loss.shape())
                                        : std::string("<undefined>")));
  }
  Tape::Record(loss).Run();
}

namespace internal {

Tensor MakeResult(std::string op, Shape shape, std::vector<double> value,
                  std::vector<Tensor> inputs,
                  std::function<void(Node&)> backward) {
  auto node = NewNode(std::move(op), std::move(shape), std::move(value));
  if (!g_grad_enabled) return Tensor(std::move(node));
  bool any = false;
  for (const Tensor& in : inputs) any = any || in.requires_grad();
  if (any) {
    node->requires_grad = true;
    node->inputs.reserve(inputs.size());
    for (Tensor& in : inputs) node->inputs.push_back(in.shared_node());
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

}  // namespace internal
}  // namespace reinformer
