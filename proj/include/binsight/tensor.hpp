#pragma once

#include <algorithm>
#include <functional>
#include <memory>
#include <numeric>
#include <string>
#include <unordered_set>
#include <vector>

#include "binsight/error.hpp"

// Minimal dense tensor with reverse-mode autodiff. Values are row-major;
// a Tensor is a cheap handle onto a graph node. Two precisions are
// instantiated: float for training, double for gradient checks.

namespace binsight::nn {

using Shape = std::vector<int>;

inline std::size_t numel(const Shape& s) {
  std::size_t n = 1;
  for (int d : s) {
    if (d < 0) throw InvalidInput("tensor: negative dimension");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::string out = "(";
  for (std::size_t i = 0; i < s.size(); ++i)
    out += (i ? "," : "") + std::to_string(s[i]);
  return out + ")";
}

namespace detail {

template <typename T>
struct Node {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;  // allocated lazily, same length as value
  bool requires_grad = false;
  bool is_leaf = true;
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this->grad, accumulates into parents' grad buffers.
  std::function<void(Node&)> backward_fn;

  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), T(0));
  }
};

}  // namespace detail

template <typename T>
class Tensor {
 public:
  using NodePtr = std::shared_ptr<detail::Node<T>>;

  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    return full(std::move(shape), T(0), requires_grad);
  }

  static Tensor full(Shape shape, T v, bool requires_grad = false) {
    auto node = std::make_shared<detail::Node<T>>();
    node->value.assign(numel(shape), v);
    node->shape = std::move(shape);
    node->requires_grad = requires_grad;
    if (requires_grad) node->ensure_grad();
    return Tensor(std::move(node));
  }

  static Tensor from_data(Shape shape, std::vector<T> data,
                          bool requires_grad = false) {
    if (numel(shape) != data.size())
      throw InvalidInput("tensor: data length does not match shape " +
                         shape_str(shape));
    auto node = std::make_shared<detail::Node<T>>();
    node->shape = std::move(shape);
    node->value = std::move(data);
    node->requires_grad = requires_grad;
    if (requires_grad) node->ensure_grad();
    return Tensor(std::move(node));
  }

  static Tensor scalar(T v, bool requires_grad = false) {
    return full(Shape{}, v, requires_grad);
  }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return check()->shape; }
  int dim(int i) const { return check()->shape.at(i); }
  int rank() const { return static_cast<int>(check()->shape.size()); }
  std::size_t size() const { return check()->value.size(); }

  std::vector<T>& data() { return check()->value; }
  const std::vector<T>& data() const { return check()->value; }
  T* ptr() { return check()->value.data(); }
  const T* ptr() const { return check()->value.data(); }

  bool requires_grad() const { return check()->requires_grad; }
  std::vector<T>& grad() {
    auto n = check();
    if (!n->requires_grad)
      throw InvalidInput("tensor: grad requested but requires_grad is off");
    n->ensure_grad();
    return n->grad;
  }
  const std::vector<T>& grad() const {
    return const_cast<Tensor*>(this)->grad();
  }

  void zero_grad() {
    auto n = check();
    if (n->requires_grad) n->grad.assign(n->value.size(), T(0));
  }

  T item() const {
    auto n = check();
    if (n->value.size() != 1)
      throw InvalidInput("tensor: item() on non-scalar of shape " +
                         shape_str(n->shape));
    return n->value[0];
  }

  // Reverse-mode accumulation from a scalar. Seeds d(this)/d(this) = 1 and
  // walks the graph in reverse topological order.
  void backward() {
    auto root = check();
    if (root->value.size() != 1)
      throw InvalidInput("backward: loss must be a scalar");
    if (!root->requires_grad) return;  // nothing reachable requires grad

    std::vector<detail::Node<T>*> order;
    topo_sort(root.get(), order);
    for (auto* n : order) {
      if (n->requires_grad) n->ensure_grad();
    }
    root->grad.assign(1, T(1));
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      detail::Node<T>* n = *it;
      if (n->backward_fn && n->requires_grad) n->backward_fn(*n);
    }
  }

  NodePtr node() const { return node_; }

  explicit Tensor(NodePtr node) : node_(std::move(node)) {}

 private:
  NodePtr check() const {
    if (!node_) throw InvalidInput("tensor: empty handle");
    return node_;
  }

  static void topo_sort(detail::Node<T>* root,
                        std::vector<detail::Node<T>*>& order) {
    // Iterative DFS; graphs from long sequences would overflow the stack
    // with recursion.
    std::unordered_set<detail::Node<T>*> seen;
    std::vector<std::pair<detail::Node<T>*, std::size_t>> stack;
    stack.emplace_back(root, 0);
    seen.insert(root);
    while (!stack.empty()) {
      auto& [n, next] = stack.back();
      if (next < n->parents.size()) {
        detail::Node<T>* p = n->parents[next++].get();
        if (p->requires_grad && seen.insert(p).second)
          stack.emplace_back(p, 0);
      } else {
        order.push_back(n);
        stack.pop_back();
      }
    }
  }

  NodePtr node_;
};

// Builds a non-leaf node. requires_grad is inherited from the parents; the
// backward function is dropped when no parent needs gradients.
template <typename T>
Tensor<T> make_op(Shape shape, std::vector<T> value,
                  std::vector<Tensor<T>> parents,
                  std::function<void(detail::Node<T>&)> backward_fn) {
  if (numel(shape) != value.size())
    throw InvalidInput("make_op: value length does not match shape");
  auto node = std::make_shared<detail::Node<T>>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  node->is_leaf = false;
  bool needs = false;
  for (const auto& p : parents) needs = needs || p.requires_grad();
  node->requires_grad = needs;
  if (needs) {
    node->parents.reserve(parents.size());
    for (const auto& p : parents) node->parents.push_back(p.node());
    node->backward_fn = std::move(backward_fn);
  }
  return Tensor<T>(std::move(node));
}

}  // namespace binsight::nn
