#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "pmrnet/tensor.hpp"

// Minimal reverse-mode autodiff over Tensor values.
//
// A Var is a shared handle to a graph node. Ops build nodes whose backward
// closure accumulates into the gradients of their inputs; backward() walks the
// graph from a scalar root in reverse topological order.
namespace pmrnet {

template <typename T>
struct Node;

template <typename T>
using Var = std::shared_ptr<Node<T>>;

template <typename T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<Var<T>> inputs;
  std::function<void(Node&)> backward;

  // Gradient storage, zero-initialised on first use.
  Tensor<T>& grad_buffer() {
    if (grad.shape() != value.shape()) grad = Tensor<T>(value.shape());
    return grad;
  }
  const Shape& shape() const { return value.shape(); }
};

template <typename T>
Var<T> make_leaf(Tensor<T> value, bool requires_grad = false) {
  auto node = std::make_shared<Node<T>>();
  node->value = std::move(value);
  node->requires_grad = requires_grad;
  return node;
}

// Thread-local switch: while a NoGradGuard is alive, ops record no inputs or
// closures, so forward passes release intermediates immediately.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

// Build the output node of an op. When any input requires a gradient (and
// grad mode is on) the inputs and closure are attached.
template <typename T>
Var<T> make_op(const char* op, Tensor<T> value, std::vector<Var<T>> inputs,
               std::function<void(Node<T>&)> backward) {
  auto node = std::make_shared<Node<T>>();
  node->value = std::move(value);
  node->op = op;
  bool needs = false;
  for (const auto& in : inputs) needs = needs || (in && in->requires_grad);
  if (needs && grad_enabled()) {
    node->requires_grad = true;
    node->inputs = std::move(inputs);
    node->backward = std::move(backward);
  }
  return node;
}

// Run reverse-mode accumulation from a scalar root (seed gradient 1).
template <typename T>
void backward(const Var<T>& root);

// Count graph nodes per op name reachable from root.
template <typename T>
std::map<std::string, std::size_t> count_ops(const Var<T>& root);

// Records the branch each non-differentiable op took (ReLU sign pattern,
// maxpool winner, probability clamp) into a running hash. Gradient checking
// uses it to discard finite differences that straddle a kink.
class KinkTrace {
 public:
  void mix(std::uint64_t value);
  std::uint64_t signature() const { return hash_; }

 private:
  std::uint64_t hash_ = 1469598103934665603ULL;
};

class ScopedKinkTrace {
 public:
  explicit ScopedKinkTrace(KinkTrace& trace);
  ~ScopedKinkTrace();
  ScopedKinkTrace(const ScopedKinkTrace&) = delete;
  ScopedKinkTrace& operator=(const ScopedKinkTrace&) = delete;

 private:
  KinkTrace* previous_;
};

KinkTrace* active_kink_trace();

}  // namespace pmrnet
