#include "ian/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace ian {

namespace {
thread_local bool g_grad_enabled = true;
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

// ---------------------------------------------------------------------------
// BasicTensor

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, std::vector<T> data, bool requires_grad) {
  for (auto e : shape) check(e > 0, "make_tensor: extents must be positive, got " + shape_str(shape));
  check(!shape.empty(), "make_tensor: empty shape");
  check(static_cast<std::int64_t>(data.size()) == shape_numel(shape),
        "make_tensor: data length " + std::to_string(data.size()) + " does not match shape " +
            shape_str(shape));
  node_ = std::make_shared<detail::Node<T>>();
  node_->shape = std::move(shape);
  node_->data = std::move(data);
  node_->requires_grad = requires_grad;
}

template <typename T>
BasicTensor<T> BasicTensor<T>::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), T(0), requires_grad);
}

template <typename T>
BasicTensor<T> BasicTensor<T>::full(Shape shape, T value, bool requires_grad) {
  const auto n = shape_numel(shape);
  check(n > 0, "full: extents must be positive, got " + shape_str(shape));
  return BasicTensor(std::move(shape), std::vector<T>(static_cast<std::size_t>(n), value),
                     requires_grad);
}

template <typename T>
std::int64_t BasicTensor<T>::dim(std::size_t i) const {
  check(i < rank(), "dim: axis out of range");
  return node_->shape[i];
}

template <typename T>
T BasicTensor<T>::item() const {
  check(numel() == 1, "item: tensor has " + std::to_string(numel()) + " elements");
  return node_->data[0];
}

template <typename T>
T BasicTensor<T>::at(std::initializer_list<std::int64_t> index) const {
  check(index.size() == rank(), "at: index rank mismatch");
  std::int64_t flat = 0;
  std::size_t i = 0;
  for (auto v : index) {
    check(v >= 0 && v < node_->shape[i], "at: index out of range");
    flat = flat * node_->shape[i] + v;
    ++i;
  }
  return node_->data[static_cast<std::size_t>(flat)];
}

template <typename T>
void BasicTensor<T>::set_requires_grad(bool on) {
  check(node_->is_leaf(), "set_requires_grad: only leaf tensors");
  node_->requires_grad = on;
}

template <typename T>
std::span<T> BasicTensor<T>::mutable_grad() {
  node_->ensure_grad();
  return node_->grad;
}

template <typename T>
void BasicTensor<T>::zero_grad() {
  if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), T(0));
}

template <typename T>
void BasicTensor<T>::backward() const {
  check(numel() == 1, "backward: loss must have a single element, got shape " + shape_str(shape()));
  if (!node_->requires_grad) return;
  Tape<T>::record(*this).run_backward(*node_);
}

template <typename T>
BasicTensor<T> BasicTensor<T>::detach() const {
  return BasicTensor(node_->shape, node_->data, false);
}

// ---------------------------------------------------------------------------
// Tape

template <typename T>
Tape<T> Tape<T>::record(const BasicTensor<T>& root) {
  Tape tape;
  std::unordered_set<detail::Node<T>*> visited;
  // Iterative post-order DFS; networks are deep enough to make recursion risky.
  std::vector<std::pair<detail::Node<T>*, std::size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  visited.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      detail::Node<T>* p = node->parents[next++].get();
      if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      tape.order_.push_back(node);
      stack.pop_back();
    }
  }
  return tape;
}

template <typename T>
void Tape<T>::run_backward(detail::Node<T>& root) const {
  // Interior gradients are recomputed from scratch; only leaves accumulate.
  for (auto* n : order_) {
    if (!n->is_leaf()) n->grad.assign(n->data.size(), T(0));
  }
  root.ensure_grad();
  root.grad[0] += T(1);
  for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
    if (!(*it)->is_leaf()) (*it)->backward(**it);
  }
}

// ---------------------------------------------------------------------------
// Result construction

template <typename T>
static BasicTensor<T> make_result_impl(Shape shape, std::vector<T> data,
                                       std::vector<detail::NodePtr<T>> parents,
                                       std::function<void(detail::Node<T>&)> backward) {
  BasicTensor<T> out(std::move(shape), std::move(data), false);
  if (!grad_enabled()) return out;
  std::erase_if(parents, [](const auto& p) { return !p->requires_grad; });
  if (parents.empty()) return out;
  auto& node = *out.node();
  node.requires_grad = true;
  node.parents = std::move(parents);
  node.backward = std::move(backward);
  return out;
}

template <typename T>
BasicTensor<T> make_result(Shape shape, std::vector<T> data,
                           std::initializer_list<const BasicTensor<T>*> inputs,
                           std::function<void(detail::Node<T>&)> backward) {
  std::vector<detail::NodePtr<T>> parents;
  for (auto* t : inputs) parents.push_back(t->node());
  return make_result_impl(std::move(shape), std::move(data), std::move(parents), std::move(backward));
}

template <typename T>
BasicTensor<T> make_result(Shape shape, std::vector<T> data, const std::vector<BasicTensor<T>>& inputs,
                           std::function<void(detail::Node<T>&)> backward) {
  std::vector<detail::NodePtr<T>> parents;
  for (const auto& t : inputs) parents.push_back(t.node());
  return make_result_impl(std::move(shape), std::move(data), std::move(parents), std::move(backward));
}

// ---------------------------------------------------------------------------
// Elementwise

namespace {

enum class Bcast { same, scalar, channel };

template <typename T>
Bcast classify(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  if (a.shape() == b.shape()) return Bcast::same;
  if (b.numel() == 1) return Bcast::scalar;
  const auto& as = a.shape();
  const auto& bs = b.shape();
  if (as.size() == 4 && bs.size() == 4 && (bs[0] == 1 || bs[0] == as[0]) && bs[1] == as[1] &&
      bs[2] == 1 && bs[3] == 1)
    return Bcast::channel;
  throw Error("ew_binary: incompatible shapes " + shape_str(as) + " and " + shape_str(bs));
}

// Maps every element of `a` to its partner index in `b`.
struct BIndex {
  Bcast kind;
  std::int64_t n_b = 1, c = 1, hw = 1;
  std::size_t operator()(std::size_t i) const {
    switch (kind) {
      case Bcast::same:
        return i;
      case Bcast::scalar:
        return 0;
      case Bcast::channel: {
        const auto nc = static_cast<std::int64_t>(i) / hw;
        const auto n = nc / c;
        const auto ch = nc % c;
        return static_cast<std::size_t>((n_b == 1 ? 0 : n) * c + ch);
      }
    }
    return 0;
  }
};

template <typename T>
T apply(BinaryOp op, T x, T y) {
  switch (op) {
    case BinaryOp::add:
      return x + y;
    case BinaryOp::sub:
      return x - y;
    case BinaryOp::mul:
      return x * y;
    case BinaryOp::div:
      return x / y;
  }
  return T(0);
}

}  // namespace

template <typename T>
BasicTensor<T> ew_binary(BinaryOp op, const BasicTensor<T>& a, const BasicTensor<T>& b) {
  const Bcast kind = classify(a, b);
  BIndex bi{kind};
  if (kind == Bcast::channel) {
    bi.n_b = b.dim(0);
    bi.c = a.dim(1);
    bi.hw = a.dim(2) * a.dim(3);
  }
  const auto ad = a.data();
  const auto bd = b.data();
  std::vector<T> out(ad.size());
  if (kind == Bcast::same) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = apply(op, ad[i], bd[i]);
  } else {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = apply(op, ad[i], bd[bi(i)]);
  }
  auto an = a.node();
  auto bn = b.node();
  return make_result<T>(a.shape(), std::move(out), {&a, &b}, [op, bi, an, bn](detail::Node<T>& self) {
    const auto& g = self.grad;
    if (an->requires_grad) {
      an->ensure_grad();
      auto& ga = an->grad;
      switch (op) {
        case BinaryOp::add:
        case BinaryOp::sub:
          for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
          break;
        case BinaryOp::mul:
          for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bn->data[bi(i)];
          break;
        case BinaryOp::div:
          for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / bn->data[bi(i)];
          break;
      }
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      auto& gb = bn->grad;
      for (std::size_t i = 0; i < g.size(); ++i) {
        const std::size_t j = bi(i);
        switch (op) {
          case BinaryOp::add:
            gb[j] += g[i];
            break;
          case BinaryOp::sub:
            gb[j] -= g[i];
            break;
          case BinaryOp::mul:
            gb[j] += g[i] * an->data[i];
            break;
          case BinaryOp::div: {
            const T y = bn->data[j];
            gb[j] -= g[i] * an->data[i] / (y * y);
            break;
          }
        }
      }
    }
  });
}

template <typename T>
BasicTensor<T> add_scalar(const BasicTensor<T>& a, T s) {
  std::vector<T> out(a.data().begin(), a.data().end());
  for (auto& v : out) v += s;
  auto an = a.node();
  return make_result<T>(a.shape(), std::move(out), {&a}, [an](detail::Node<T>& self) {
    an->ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i];
  });
}

template <typename T>
BasicTensor<T> mul_scalar(const BasicTensor<T>& a, T s) {
  std::vector<T> out(a.data().begin(), a.data().end());
  for (auto& v : out) v *= s;
  auto an = a.node();
  return make_result<T>(a.shape(), std::move(out), {&a}, [an, s](detail::Node<T>& self) {
    an->ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i] * s;
  });
}

template <typename T>
BasicTensor<T> abs(const BasicTensor<T>& a) {
  std::vector<T> out(a.data().begin(), a.data().end());
  for (auto& v : out) v = std::abs(v);
  auto an = a.node();
  return make_result<T>(a.shape(), std::move(out), {&a}, [an](detail::Node<T>& self) {
    an->ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      const T x = an->data[i];
      if (x > T(0))
        an->grad[i] += self.grad[i];
      else if (x < T(0))
        an->grad[i] -= self.grad[i];
    }
  });
}

template <typename T>
BasicTensor<T> square(const BasicTensor<T>& a) {
  std::vector<T> out(a.data().begin(), a.data().end());
  for (auto& v : out) v = v * v;
  auto an = a.node();
  return make_result<T>(a.shape(), std::move(out), {&a}, [an](detail::Node<T>& self) {
    an->ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i)
      an->grad[i] += self.grad[i] * T(2) * an->data[i];
  });
}

// ---------------------------------------------------------------------------
// matmul

template <typename T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  check(a.rank() == 2 && b.rank() == 2, "matmul: operands must be rank 2");
  const auto m = a.dim(0), k = a.dim(1), n = b.dim(1);
  check(b.dim(0) == k, "matmul: inner extents differ: " + shape_str(a.shape()) + " x " +
                           shape_str(b.shape()));
  const auto ad = a.data();
  const auto bd = b.data();
  std::vector<T> out(static_cast<std::size_t>(m * n), T(0));
  for (std::int64_t i = 0; i < m; ++i)
    for (std::int64_t p = 0; p < k; ++p) {
      const T av = ad[i * k + p];
      for (std::int64_t j = 0; j < n; ++j) out[i * n + j] += av * bd[p * n + j];
    }
  auto an = a.node();
  auto bn = b.node();
  return make_result<T>({m, n}, std::move(out), {&a, &b}, [an, bn, m, k, n](detail::Node<T>& self) {
    const auto& g = self.grad;
    if (an->requires_grad) {
      an->ensure_grad();
      for (std::int64_t i = 0; i < m; ++i)
        for (std::int64_t p = 0; p < k; ++p) {
          T acc = 0;
          for (std::int64_t j = 0; j < n; ++j) acc += g[i * n + j] * bn->data[p * n + j];
          an->grad[i * k + p] += acc;
        }
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (std::int64_t i = 0; i < m; ++i)
        for (std::int64_t p = 0; p < k; ++p) {
          const T av = an->data[i * k + p];
          for (std::int64_t j = 0; j < n; ++j) bn->grad[p * n + j] += av * g[i * n + j];
        }
    }
  });
}

// ---------------------------------------------------------------------------
// Reductions and shape manipulation

template <typename T>
BasicTensor<T> reduce(ReduceOp op, const BasicTensor<T>& t, std::vector<std::size_t> axes) {
  const auto& in_shape = t.shape();
  const std::size_t r = in_shape.size();
  std::vector<bool> reduced(r, false);
  for (auto ax : axes) {
    check(ax < r, "reduce: axis " + std::to_string(ax) + " invalid for rank " + std::to_string(r));
    reduced[ax] = true;
  }
  Shape out_shape;
  std::int64_t count = 1;
  for (std::size_t i = 0; i < r; ++i) {
    if (reduced[i])
      count *= in_shape[i];
    else
      out_shape.push_back(in_shape[i]);
  }
  if (out_shape.empty()) out_shape.push_back(1);

  // out_index[i] for each input element.
  std::vector<std::size_t> out_index(t.numel());
  {
    std::vector<std::int64_t> idx(r, 0);
    for (std::size_t flat = 0; flat < out_index.size(); ++flat) {
      std::int64_t o = 0;
      for (std::size_t d = 0; d < r; ++d)
        if (!reduced[d]) o = o * in_shape[d] + idx[d];
      out_index[flat] = static_cast<std::size_t>(o);
      for (std::size_t d = r; d-- > 0;) {
        if (++idx[d] < in_shape[d]) break;
        idx[d] = 0;
      }
    }
  }
  std::vector<T> out(static_cast<std::size_t>(shape_numel(out_shape)), T(0));
  const auto d = t.data();
  for (std::size_t i = 0; i < d.size(); ++i) out[out_index[i]] += d[i];
  const T scale = op == ReduceOp::mean ? T(1) / static_cast<T>(count) : T(1);
  if (op == ReduceOp::mean)
    for (auto& v : out) v *= scale;
  auto tn = t.node();
  return make_result<T>(std::move(out_shape), std::move(out), {&t},
                        [tn, idx = std::move(out_index), scale](detail::Node<T>& self) {
                          tn->ensure_grad();
                          for (std::size_t i = 0; i < idx.size(); ++i)
                            tn->grad[i] += self.grad[idx[i]] * scale;
                        });
}

template <typename T>
BasicTensor<T> sum_all(const BasicTensor<T>& t) {
  T acc = 0;
  for (auto v : t.data()) acc += v;
  auto tn = t.node();
  return make_result<T>({1}, {acc}, {&t}, [tn](detail::Node<T>& self) {
    tn->ensure_grad();
    const T g = self.grad[0];
    for (auto& v : tn->grad) v += g;
  });
}

template <typename T>
BasicTensor<T> mean_all(const BasicTensor<T>& t) {
  T acc = 0;
  for (auto v : t.data()) acc += v;
  const T scale = T(1) / static_cast<T>(t.numel());
  auto tn = t.node();
  return make_result<T>({1}, {acc * scale}, {&t}, [tn, scale](detail::Node<T>& self) {
    tn->ensure_grad();
    const T g = self.grad[0] * scale;
    for (auto& v : tn->grad) v += g;
  });
}

template <typename T>
BasicTensor<T> reshape(const BasicTensor<T>& t, Shape shape) {
  check(shape_numel(shape) == static_cast<std::int64_t>(t.numel()),
        "reshape: cannot view " + shape_str(t.shape()) + " as " + shape_str(shape));
  auto tn = t.node();
  return make_result<T>(std::move(shape), std::vector<T>(t.data().begin(), t.data().end()), {&t},
                        [tn](detail::Node<T>& self) {
                          tn->ensure_grad();
                          for (std::size_t i = 0; i < self.grad.size(); ++i) tn->grad[i] += self.grad[i];
                        });
}

namespace {
// Splits a shape around `axis` into outer * axis * inner.
std::pair<std::int64_t, std::int64_t> outer_inner(const Shape& s, std::size_t axis) {
  std::int64_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  return {outer, inner};
}
}  // namespace

template <typename T>
BasicTensor<T> narrow(const BasicTensor<T>& t, std::size_t axis, std::int64_t start, std::int64_t length) {
  check(axis < t.rank(), "narrow: invalid axis");
  const auto extent = t.dim(axis);
  check(start >= 0 && length > 0 && start + length <= extent, "narrow: range out of bounds");
  auto [outer, inner] = outer_inner(t.shape(), axis);
  Shape out_shape = t.shape();
  out_shape[axis] = length;
  std::vector<T> out(static_cast<std::size_t>(outer * length * inner));
  const auto d = t.data();
  for (std::int64_t o = 0; o < outer; ++o)
    std::copy_n(d.begin() + (o * extent + start) * inner, length * inner,
                out.begin() + o * length * inner);
  auto tn = t.node();
  return make_result<T>(std::move(out_shape), std::move(out), {&t},
                        [tn, outer, inner, extent, start, length](detail::Node<T>& self) {
                          tn->ensure_grad();
                          for (std::int64_t o = 0; o < outer; ++o) {
                            const T* g = self.grad.data() + o * length * inner;
                            T* dst = tn->grad.data() + (o * extent + start) * inner;
                            for (std::int64_t i = 0; i < length * inner; ++i) dst[i] += g[i];
                          }
                        });
}

template <typename T>
BasicTensor<T> concat(const std::vector<BasicTensor<T>>& xs, std::size_t axis) {
  check(!xs.empty(), "concat: no inputs");
  const Shape& ref = xs[0].shape();
  check(axis < ref.size(), "concat: invalid axis");
  std::int64_t total = 0;
  for (const auto& x : xs) {
    check(x.rank() == ref.size(), "concat: rank mismatch");
    for (std::size_t i = 0; i < ref.size(); ++i)
      check(i == axis || x.dim(i) == ref[i],
            "concat: shape mismatch " + shape_str(x.shape()) + " vs " + shape_str(ref));
    total += x.dim(axis);
  }
  Shape out_shape = ref;
  out_shape[axis] = total;
  auto [outer, inner] = outer_inner(ref, axis);
  std::vector<T> out(static_cast<std::size_t>(outer * total * inner));
  std::vector<std::int64_t> extents;
  std::int64_t offset = 0;
  for (const auto& x : xs) {
    const auto e = x.dim(axis);
    const auto d = x.data();
    for (std::int64_t o = 0; o < outer; ++o)
      std::copy_n(d.begin() + o * e * inner, e * inner, out.begin() + (o * total + offset) * inner);
    offset += e;
    extents.push_back(e);
  }
  std::vector<detail::NodePtr<T>> nodes;
  for (const auto& x : xs) nodes.push_back(x.node());
  return make_result<T>(std::move(out_shape), std::move(out), xs,
                        [nodes, extents, outer, inner, total](detail::Node<T>& self) {
                          std::int64_t off = 0;
                          for (std::size_t k = 0; k < nodes.size(); ++k) {
                            const auto e = extents[k];
                            if (nodes[k]->requires_grad) {
                              nodes[k]->ensure_grad();
                              for (std::int64_t o = 0; o < outer; ++o) {
                                const T* g = self.grad.data() + (o * total + off) * inner;
                                T* dst = nodes[k]->grad.data() + o * e * inner;
                                for (std::int64_t i = 0; i < e * inner; ++i) dst[i] += g[i];
                              }
                            }
                            off += e;
                          }
                        });
}

// ---------------------------------------------------------------------------

Tensor64 finite_diff_grad(const std::function<double(const Tensor64&)>& f, const Tensor64& t, double h) {
  check(h > 0, "finite_diff_grad: step must be positive");
  NoGradGuard guard;
  Tensor64 probe = t.detach();
  std::vector<double> g(t.numel());
  auto d = probe.mutable_data();
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double orig = d[i];
    d[i] = orig + h;
    const double fp = f(probe);
    d[i] = orig - h;
    const double fm = f(probe);
    d[i] = orig;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return Tensor64(t.shape(), std::move(g));
}

// ---------------------------------------------------------------------------
// Instantiations

#define IAN_INSTANTIATE(T)                                                                         \
  template class BasicTensor<T>;                                                                   \
  template class Tape<T>;                                                                          \
  template BasicTensor<T> make_result(Shape, std::vector<T>,                                       \
                                      std::initializer_list<const BasicTensor<T>*>,                \
                                      std::function<void(detail::Node<T>&)>);                      \
  template BasicTensor<T> make_result(Shape, std::vector<T>, const std::vector<BasicTensor<T>>&,   \
                                      std::function<void(detail::Node<T>&)>);                      \
  template BasicTensor<T> ew_binary(BinaryOp, const BasicTensor<T>&, const BasicTensor<T>&);       \
  template BasicTensor<T> add_scalar(const BasicTensor<T>&, T);                                    \
  template BasicTensor<T> mul_scalar(const BasicTensor<T>&, T);                                    \
  template BasicTensor<T> abs(const BasicTensor<T>&);                                              \
  template BasicTensor<T> square(const BasicTensor<T>&);                                           \
  template BasicTensor<T> matmul(const BasicTensor<T>&, const BasicTensor<T>&);                    \
  template BasicTensor<T> reduce(ReduceOp, const BasicTensor<T>&, std::vector<std::size_t>);       \
  template BasicTensor<T> sum_all(const BasicTensor<T>&);                                          \
  template BasicTensor<T> mean_all(const BasicTensor<T>&);                                         \
  template BasicTensor<T> reshape(const BasicTensor<T>&, Shape);                                   \
  template BasicTensor<T> narrow(const BasicTensor<T>&, std::size_t, std::int64_t, std::int64_t);  \
  template BasicTensor<T> concat(const std::vector<BasicTensor<T>>&, std::size_t);

IAN_INSTANTIATE(float)
IAN_INSTANTIATE(double)

}  // namespace ian
