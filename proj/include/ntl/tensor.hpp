#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <vector>

#include "ntl/error.hpp"

namespace ntl::ad {

// Reverse-mode graph node. Ops link output nodes to their inputs and
// install a backprop closure that scatters this node's gradient into the
// parents' gradients. When recording is off (or no input needs gradients)
// nodes stay unlinked, so intermediate activations are freed as soon as
// their last consumer is built.
template <class T>
struct Node {
  std::vector<int> shape;
  std::vector<T> value;
  std::vector<T> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node<T>>> parents;
  std::function<void(Node<T>&)> backprop;
};

template <class T>
using NodePtr = std::shared_ptr<Node<T>>;

// Thread-local recording switch, flipped off for inference and for the
// numeric evaluations inside gradient checks.
template <class T>
inline thread_local bool grad_recording = true;

template <class T>
class NoGradGuard {
 public:
  NoGradGuard() : saved_(grad_recording<T>) { grad_recording<T> = false; }
  ~NoGradGuard() { grad_recording<T> = saved_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool saved_;
};

inline std::size_t shape_numel(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) n *= std::size_t(d);
  return n;
}

template <class T>
class Tensor {
 public:
  Tensor() : node_(std::make_shared<Node<T>>()) {}
  explicit Tensor(NodePtr<T> n) : node_(std::move(n)) {}

  static Tensor zeros(std::vector<int> shape) {
    Tensor t;
    t.node_->shape = std::move(shape);
    t.node_->value.assign(shape_numel(t.node_->shape), T(0));
    return t;
  }

  static Tensor full(std::vector<int> shape, T v) {
    Tensor t = zeros(std::move(shape));
    std::fill(t.node_->value.begin(), t.node_->value.end(), v);
    return t;
  }

  static Tensor from_values(std::vector<int> shape, std::vector<T> values) {
    if (shape_numel(shape) != values.size())
      throw DataError("tensor: value count does not match shape");
    Tensor t;
    t.node_->shape = std::move(shape);
    t.node_->value = std::move(values);
    return t;
  }

  const std::vector<int>& shape() const { return node_->shape; }
  int dim(int i) const { return node_->shape[std::size_t(i)]; }
  int rank() const { return int(node_->shape.size()); }
  std::size_t numel() const { return node_->value.size(); }
  bool defined() const { return !node_->shape.empty(); }

  std::vector<T>& values() { return node_->value; }
  const std::vector<T>& values() const { return node_->value; }
  const std::vector<T>& grad() const { return node_->grad; }

  bool requires_grad() const { return node_->requires_grad; }
  Tensor& set_requires_grad(bool v) {
    node_->requires_grad = v;
    return *this;
  }

  void zero_grad() { node_->grad.assign(node_->value.size(), T(0)); }

  const NodePtr<T>& node() const { return node_; }

 private:
  NodePtr<T> node_;
};

// Ensures a gradient buffer exists before an op accumulates into it.
template <class T>
inline std::vector<T>& grad_buffer(Node<T>& n) {
  if (n.grad.size() != n.value.size()) n.grad.assign(n.value.size(), T(0));
  return n.grad;
}

// Builds an op output node. Parents are linked and the closure installed
// only when recording is on and some input actually needs gradients.
template <class T>
Tensor<T> make_op(std::vector<int> shape, std::vector<T> value,
                  std::vector<NodePtr<T>> parents,
                  std::function<void(Node<T>&)> backprop) {
  auto node = std::make_shared<Node<T>>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  bool need = false;
  if (grad_recording<T>)
    for (const auto& p : parents)
      if (p->requires_grad) need = true;
  if (need) {
    node->requires_grad = true;
    node->parents = std::move(parents);
    node->backprop = std::move(backprop);
  }
  return Tensor<T>(node);
}

// Reverse topological sweep from a scalar loss. Gradients of every node in
// the reachable subgraph are reset first, so repeated calls never see
// stale accumulation. Visits each node exactly once.
template <class T>
void backward(const Tensor<T>& loss) {
  if (loss.numel() != 1) throw DataError("backward: loss must be scalar");
  if (!loss.requires_grad())
    throw DataError("backward: loss does not require gradients");

  // Iterative post-order DFS; post-order is a topological order of this DAG.
  std::vector<Node<T>*> order;
  std::vector<std::pair<Node<T>*, std::size_t>> stack;
  std::vector<Node<T>*> seen;
  auto mark = [&seen](Node<T>* n) {
    // Nodes carry no visit flag; use grad.capacity trick-free linear set.
    // Graphs here are small enough that a sorted vector is fine.
    auto it = std::lower_bound(seen.begin(), seen.end(), n);
    if (it != seen.end() && *it == n) return false;
    seen.insert(it, n);
    return true;
  };

  Node<T>* root = loss.node().get();
  if (mark(root)) stack.push_back({root, 0});
  while (!stack.empty()) {
    auto& [n, idx] = stack.back();
    if (idx < n->parents.size()) {
      Node<T>* p = n->parents[idx++].get();
      if (p->requires_grad && mark(p)) stack.push_back({p, 0});
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  for (Node<T>* n : order) n->grad.assign(n->value.size(), T(0));
  root->grad.assign(1, T(1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* n = *it;
    if (n->backprop) n->backprop(*n);
  }
}

}  // namespace ntl::ad
