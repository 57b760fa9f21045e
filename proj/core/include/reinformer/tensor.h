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

// Dense float64 tensors with reverse-mode automatic differentiation.
//
// A Tensor is a cheap handle onto a graph node. Operations in ops.h create
// new nodes that remember their inputs and a backward rule whenever any input
// requires a gradient. Backward() linearises the reachable graph into a Tape
// (inputs always precede outputs) and runs the rules in reverse order.
// Gradients accumulate additively into leaves until ZeroGrad() is called.

#ifndef REINFORMER_TENSOR_H_
#define REINFORMER_TENSOR_H_

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace reinformer {

using Shape = std::vector<int64_t>;

int64_t NumElements(const Shape& shape);
std::string ShapeToString(const Shape& shape);

namespace internal {

struct Node {
  uint64_t id = 0;
  std::string op;
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;

  std::vector<double>& MutableGrad() {
    if (grad.empty()) grad.assign(value.size(), 0.0);
    return grad;
  }
};

}  // namespace internal

class Tensor {
 public:
  Tensor() = default;

  static Tensor Zeros(Shape shape, bool requires_grad = false);
  static Tensor Full(Shape shape, double value, bool requires_grad = false);
  static Tensor FromData(Shape shape, std::vector<double> data,
                         bool requires_grad = false);
  static Tensor Scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  int64_t dim(int axis) const;
  int rank() const { return static_cast<int>(shape().size()); }
  int64_t size() const;

  std::span<const double> data() const;
  // Writable view of the values. Only meaningful on leaves; writing through
  // an interior node does not invalidate gradients already recorded.
  std::span<double> mutable_data();
  double item() const;
  double at(int64_t flat_index) const { return data()[flat_index]; }

  bool requires_grad() const;
  void set_requires_grad(bool requires_grad);
  bool has_grad() const;
  // Gradient view; zeros if nothing has been accumulated yet.
  std::vector<double> grad() const;
  void ZeroGrad();

  // New leaf holding a copy of the values, cut from the graph.
  Tensor Detach() const;

  internal::Node* node() const { return node_.get(); }
  const std::shared_ptr<internal::Node>& shared_node() const { return node_; }

  explicit Tensor(std::shared_ptr<internal::Node> node)
      : node_(std::move(node)) {}

 private:
  std::shared_ptr<internal::Node> node_;
};

// Disables graph recording on the current thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool GradRecordingEnabled();

// Topologically ordered list of the operations reachable from a root.
class Tape {
 public:
  struct Entry {
    uint64_t output_id;
    std::string op;
    std::vector<uint64_t> input_ids;
  };

  static Tape Record(const Tensor& root);

  const std::vector<Entry>& entries() const { return entries_; }
  // Every entry's inputs appear earlier on the tape (or are leaves).
  bool IsTopologicallyOrdered() const;
  // Seeds the root gradient with 1 and runs all backward rules in reverse.
  void Run();

 private:
  std::vector<internal::Node*> order_;
  std::vector<Entry> entries_;
  std::shared_ptr<internal::Node> root_;
};

// Populates gradients of every requires_grad tensor reachable from `loss`.
// Throws ContractError when `loss` is not a scalar.
void Backward(const Tensor& loss);

namespace internal {

// Builds the result node of an operation. Inputs and the backward rule are
// attached only when recording is enabled and some input requires grad.
Tensor MakeResult(std::string op, Shape shape, std::vector<double> value,
                  std::vector<Tensor> inputs,
                  std::function<void(Node&)> backward);

}  // namespace internal

}  // namespace reinformer

#endif  // REINFORMER_TENSOR_H_
