#pragma once

// Dense row-major tensor with reverse-mode automatic differentiation.
//
// A tensor is a shared handle to a graph node. Operations executed while
// gradient recording is enabled link their result to the inputs that require
// gradients; `backward()` on a single-element result orders the reachable
// nodes topologically (the tape) and runs each node's backward rule in
// reverse. Leaf gradients accumulate across backward calls until
// `zero_grad()`.
//
// One graph must not be mutated from two threads at once. Distinct graphs are
// independent.

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <vector>

#include "ian/common.hpp"

namespace ian {

namespace detail {

template <typename T>
struct Node {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this node's grad and accumulates into the parents' grads.
  std::function<void(Node&)> backward;

  bool is_leaf() const { return !backward; }
  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), T(0));
  }
};

template <typename T>
using NodePtr = std::shared_ptr<Node<T>>;

}  // namespace detail

template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;
  BasicTensor(Shape shape, std::vector<T> data, bool requires_grad = false);

  static BasicTensor zeros(Shape shape, bool requires_grad = false);
  static BasicTensor full(Shape shape, T value, bool requires_grad = false);
  static BasicTensor scalar(T value) { return full({1}, value); }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::int64_t dim(std::size_t i) const;
  std::size_t numel() const { return node_->data.size(); }

  std::span<const T> data() const { return node_->data; }
  /// Direct write access; bypasses the graph (initialisation, optimizer).
  std::span<T> mutable_data() { return node_->data; }
  T item() const;
  T at(std::initializer_list<std::int64_t> index) const;

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on);
  bool has_grad() const { return !node_->grad.empty(); }
  std::span<const T> grad() const { return node_->grad; }
  std::span<T> mutable_grad();
  void zero_grad();

  /// Populates d(this)/d(leaf) for every reachable leaf requiring grad.
  void backward() const;

  /// Same values, no graph history.
  BasicTensor detach() const;
  BasicTensor clone() const { return detach(); }
  template <typename U>
  BasicTensor<U> cast() const {
    return BasicTensor<U>(shape(), std::vector<U>(data().begin(), data().end()));
  }

  const detail::NodePtr<T>& node() const { return node_; }
  static BasicTensor from_node(detail::NodePtr<T> n) {
    BasicTensor t;
    t.node_ = std::move(n);
    return t;
  }

 private:
  detail::NodePtr<T> node_;
};

using Tensor = BasicTensor<float>;
using Tensor64 = BasicTensor<double>;

/// Ordered record of the differentiable operations reachable from a root;
/// every node appears after all nodes producing its inputs.
template <typename T>
class Tape {
 public:
  static Tape record(const BasicTensor<T>& root);
  const std::vector<detail::Node<T>*>& order() const { return order_; }
  void run_backward(detail::Node<T>& root) const;

 private:
  std::vector<detail::Node<T>*> order_;
};

bool grad_enabled();

/// Disables graph recording on this thread for the guard's lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

/// Builds an op result. When recording is on and some input requires grad,
/// the result is linked to those inputs with `backward` as its rule.
template <typename T>
BasicTensor<T> make_result(Shape shape, std::vector<T> data,
                           std::initializer_list<const BasicTensor<T>*> inputs,
                           std::function<void(detail::Node<T>&)> backward);
template <typename T>
BasicTensor<T> make_result(Shape shape, std::vector<T> data,
                           const std::vector<BasicTensor<T>>& inputs,
                           std::function<void(detail::Node<T>&)> backward);

// ---------------------------------------------------------------------------
// Core operations

enum class BinaryOp { add, sub, mul, div };
enum class ReduceOp { sum, mean };

template <typename T>
BasicTensor<T> make_tensor(Shape shape, std::vector<T> data, bool requires_grad = false) {
  return BasicTensor<T>(std::move(shape), std::move(data), requires_grad);
}

/// Elementwise a (op) b. `b` may equal `a` in shape, be a single element, or
/// (for rank-4 `a` = [N,C,H,W]) be a per-channel [N or 1, C, 1, 1] tensor.
template <typename T>
BasicTensor<T> ew_binary(BinaryOp op, const BasicTensor<T>& a, const BasicTensor<T>& b);

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  return ew_binary(BinaryOp::add, a, b);
}
template <typename T>
BasicTensor<T> sub(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  return ew_binary(BinaryOp::sub, a, b);
}
template <typename T>
BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  return ew_binary(BinaryOp::mul, a, b);
}
template <typename T>
BasicTensor<T> div(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  return ew_binary(BinaryOp::div, a, b);
}

template <typename T>
BasicTensor<T> add_scalar(const BasicTensor<T>& a, T s);
template <typename T>
BasicTensor<T> mul_scalar(const BasicTensor<T>& a, T s);
/// Subgradient 0 at 0.
template <typename T>
BasicTensor<T> abs(const BasicTensor<T>& a);
template <typename T>
BasicTensor<T> square(const BasicTensor<T>& a);

template <typename T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b);

/// Reduces over `axes`; reduced axes are dropped (all axes -> shape [1]).
template <typename T>
BasicTensor<T> reduce(ReduceOp op, const BasicTensor<T>& t, std::vector<std::size_t> axes);
template <typename T>
BasicTensor<T> sum_all(const BasicTensor<T>& t);
template <typename T>
BasicTensor<T> mean_all(const BasicTensor<T>& t);

template <typename T>
BasicTensor<T> reshape(const BasicTensor<T>& t, Shape shape);
/// Slice [start, start+length) along `axis`.
template <typename T>
BasicTensor<T> narrow(const BasicTensor<T>& t, std::size_t axis, std::int64_t start,
                      std::int64_t length);
template <typename T>
BasicTensor<T> concat(const std::vector<BasicTensor<T>>& xs, std::size_t axis);

/// Central-difference gradient estimate of a scalar function, in 64-bit.
Tensor64 finite_diff_grad(const std::function<double(const Tensor64&)>& f, const Tensor64& t,
                          double h);

}  // namespace ian
