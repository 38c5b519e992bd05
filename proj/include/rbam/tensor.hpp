#pragma once

// Dense row-major tensors with define-by-run reverse-mode differentiation.
//
// Every op returns a fresh Tensor that records its inputs and a local
// vector-Jacobian product when at least one input requires grad (and grad
// mode is enabled on the calling thread). backward() on a scalar walks the
// recorded graph once; the graph is consumed afterwards.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <unordered_set>
#include <type_traits>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "rbam/errors.hpp"

namespace rbam {

using Shape = std::vector<std::size_t>;

// Tensor storage aligned for Eigen packets, so vectorized kernels take the
// same code path on every run.
template <class T>
using Buffer = std::vector<T, Eigen::aligned_allocator<T>>;

inline std::size_t element_count(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ')';
  return os.str();
}

inline std::vector<std::size_t> row_major_strides(const Shape& shape) {
  std::vector<std::size_t> strides(shape.size(), 1);
  for (std::size_t i = shape.size(); i-- > 1;) strides[i - 1] = strides[i] * shape[i];
  return strides;
}

namespace detail {
inline thread_local bool grad_mode = true;
}  // namespace detail

inline bool grad_enabled() { return detail::grad_mode; }

// Disables graph recording on the current thread for the guard's lifetime.
class NoGradGuard {
 public:
  NoGradGuard() : previous_(detail::grad_mode) { detail::grad_mode = false; }
  ~NoGradGuard() { detail::grad_mode = previous_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// Test-only fault switches used as negative controls for gradient checking.
struct FaultInjection {
  static inline std::atomic<bool> sigmoid_backward{false};
};

template <class T>
struct Node {
  Shape shape;
  Buffer<T> value;
  Buffer<T> grad;  // empty until first touched by backward
  bool requires_grad = false;
  bool leaf = true;
  bool consumed = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward_fn;

  Buffer<T>& ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), T(0));
    return grad;
  }
};

template <class T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;

  Tensor(Shape shape, Buffer<T> values, bool requires_grad = false)
      : node_(std::make_shared<Node<T>>()) {
    if (element_count(shape) != values.size()) {
      throw ShapeError("tensor shape " + rbam::to_string(shape) + " holds " +
                       std::to_string(element_count(shape)) + " elements, got " +
                       std::to_string(values.size()));
    }
    for (auto e : shape) {
      if (e == 0) throw ShapeError("tensor extents must be positive: " + rbam::to_string(shape));
    }
    node_->shape = std::move(shape);
    node_->value = std::move(values);
    node_->requires_grad = requires_grad;
  }

  template <class Alloc>
  Tensor(Shape shape, const std::vector<T, Alloc>& values, bool requires_grad = false)
    requires(!std::is_same_v<Alloc, typename Buffer<T>::allocator_type>)
      : Tensor(std::move(shape), Buffer<T>(values.begin(), values.end()), requires_grad) {}

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    return full(std::move(shape), T(0), requires_grad);
  }

  static Tensor full(Shape shape, T v, bool requires_grad = false) {
    const auto n = element_count(shape);
    return Tensor(std::move(shape), Buffer<T>(n, v), requires_grad);
  }

  static Tensor scalar(T v, bool requires_grad = false) { return Tensor({}, {v}, requires_grad); }

  static Tensor from_node(std::shared_ptr<Node<T>> node) {
    Tensor t;
    t.node_ = std::move(node);
    return t;
  }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return checked().shape; }
  std::size_t rank() const { return shape().size(); }
  std::size_t numel() const { return checked().value.size(); }
  std::size_t extent(std::size_t axis) const {
    if (axis >= rank()) throw ShapeError("axis out of range for shape " + rbam::to_string(shape()));
    return shape()[axis];
  }

  std::span<const T> data() const { return checked().value; }

  // Only leaves may be mutated in place (parameters, optimizer updates).
  std::span<T> mutable_data() {
    if (!checked().leaf) throw StateError("cannot mutate the value of a non-leaf tensor");
    return node_->value;
  }

  T item() const {
    if (numel() != 1) throw ShapeError("item() on tensor of shape " + rbam::to_string(shape()));
    return node_->value[0];
  }

  T at(std::initializer_list<std::size_t> index) const {
    const auto& s = shape();
    if (index.size() != s.size()) throw ShapeError("index rank mismatch for " + rbam::to_string(s));
    std::size_t flat = 0;
    std::size_t i = 0;
    for (auto v : index) {
      if (v >= s[i]) throw ShapeError("index out of range for " + rbam::to_string(s));
      flat = flat * s[i] + v;
      ++i;
    }
    return node_->value[flat];
  }

  bool requires_grad() const { return checked().requires_grad; }

  Tensor& set_requires_grad(bool on) {
    if (!checked().leaf) throw StateError("requires_grad can only be changed on leaf tensors");
    node_->requires_grad = on;
    return *this;
  }

  bool is_leaf() const { return checked().leaf; }
  const char* op_name() const { return checked().op; }

  bool has_grad() const { return !checked().grad.empty(); }

  std::span<const T> grad() const {
    if (!has_grad()) throw StateError("tensor has no gradient");
    return node_->grad;
  }

  std::span<T> mutable_grad() { return checked().ensure_grad(); }

  void zero_grad() {
    checked();
    node_->grad.clear();
  }

  // Fresh leaf holding a copy of the value; no graph, no grad.
  Tensor detach(bool requires_grad = false) const {
    return Tensor(shape(), checked().value, requires_grad);
  }

  void backward() const;

  const std::shared_ptr<Node<T>>& node() const { return node_; }

 private:
  Node<T>& checked() const {
    if (!node_) throw StateError("use of an undefined tensor");
    return *node_;
  }

  std::shared_ptr<Node<T>> node_;
};

template <class T>
void Tensor<T>::backward() const {
  auto& root = checked();
  if (root.value.size() != 1) {
    throw ContractError("backward() needs a scalar loss, got shape " + rbam::to_string(root.shape));
  }
  if (root.consumed) {
    throw StateError("graph already consumed by backward(); run a new forward pass first");
  }
  if (!root.requires_grad) {
    throw ContractError("loss does not depend on any tensor that requires grad");
  }

  // Iterative post-order DFS; reversed it is a valid topological order.
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen;
  std::vector<std::pair<Node<T>*, std::size_t>> stack{{node_.get(), 0}};
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->inputs.size()) {
      Node<T>* child = n->inputs[next++].get();
      if (!child->requires_grad || seen.count(child)) continue;
      if (child->consumed) {
        throw StateError("graph contains a node consumed by an earlier backward()");
      }
      seen.insert(child);
      stack.emplace_back(child, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  root.ensure_grad()[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>& n = **it;
    n.ensure_grad();
    if (n.backward_fn) n.backward_fn(n);
  }
  for (Node<T>* n : order) {
    if (n->leaf) continue;
    n->consumed = true;
    n->backward_fn = nullptr;
    n->inputs.clear();
  }
}

namespace detail {

template <class T>
Tensor<T> make_result(const char* op, Shape shape, Buffer<T> value,
                      std::initializer_list<const Tensor<T>*> inputs,
                      std::function<void(Node<T>&)> backward_fn) {
  auto node = std::make_shared<Node<T>>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  node->op = op;
  bool any = false;
  if (grad_enabled()) {
    for (const auto* in : inputs) any = any || in->requires_grad();
  }
  node->leaf = !any;
  if (any) {
    node->requires_grad = true;
    for (const auto* in : inputs) node->inputs.push_back(in->node());
    node->backward_fn = std::move(backward_fn);
  }
  return Tensor<T>::from_node(std::move(node));
}

// Gradient buffer of input i, or nullptr when that input does not need one.
template <class T>
T* input_grad(Node<T>& self, std::size_t i) {
  auto& in = *self.inputs[i];
  return in.requires_grad ? in.ensure_grad().data() : nullptr;
}

template <class T>
using MatrixRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MapRM = Eigen::Map<MatrixRM<T>>;
template <class T>
using ConstMapRM = Eigen::Map<const MatrixRM<T>>;

inline Shape broadcast_shape(const Shape& a, const Shape& b) {
  const std::size_t rank = std::max(a.size(), b.size());
  Shape out(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    const std::size_t ea = i + a.size() >= rank ? a[i + a.size() - rank] : 1;
    const std::size_t eb = i + b.size() >= rank ? b[i + b.size() - rank] : 1;
    if (ea != eb && ea != 1 && eb != 1) {
      throw ShapeError("shapes " + to_string(a) + " and " + to_string(b) + " are not broadcastable");
    }
    out[i] = std::max(ea, eb);
  }
  return out;
}

// Strides of `in` laid against `out`, zero on broadcast axes.
inline std::vector<std::size_t> broadcast_strides(const Shape& in, const Shape& out) {
  std::vector<std::size_t> strides(out.size(), 0);
  const auto own = row_major_strides(in);
  const std::size_t pad = out.size() - in.size();
  for (std::size_t i = 0; i < in.size(); ++i) {
    strides[pad + i] = in[i] == 1 ? 0 : own[i];
  }
  return strides;
}

// Calls fn(out_index, a_index, b_index) for every element of `out`.
template <class Fn>
void for_each_broadcast(const Shape& out, const std::vector<std::size_t>& sa,
                        const std::vector<std::size_t>& sb, Fn&& fn) {
  const std::size_t total = element_count(out);
  const std::size_t rank = out.size();
  std::vector<std::size_t> counter(rank, 0);
  std::size_t ia = 0;
  std::size_t ib = 0;
  for (std::size_t o = 0; o < total; ++o) {
    fn(o, ia, ib);
    for (std::size_t d = rank; d-- > 0;) {
      if (++counter[d] < out[d]) {
        ia += sa[d];
        ib += sb[d];
        break;
      }
      ia -= sa[d] * (out[d] - 1);
      ib -= sb[d] * (out[d] - 1);
      counter[d] = 0;
    }
  }
}

template <class T>
T sigmoid_scalar(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

}  // namespace detail

enum class BinaryOp { add, sub, mul };
enum class UnaryOp { relu, sigmoid };

template <class T>
Tensor<T> elementwise(BinaryOp op, const Tensor<T>& a, const Tensor<T>& b) {
  const Shape out_shape = detail::broadcast_shape(a.shape(), b.shape());
  const auto sa = detail::broadcast_strides(a.shape(), out_shape);
  const auto sb = detail::broadcast_strides(b.shape(), out_shape);
  const T* pa = a.data().data();
  const T* pb = b.data().data();
  Buffer<T> out(element_count(out_shape));
  const bool same = a.shape() == b.shape();
  switch (op) {
    case BinaryOp::add:
      if (same) {
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = pa[i] + pb[i];
      } else {
        detail::for_each_broadcast(out_shape, sa, sb, [&](auto o, auto i, auto j) { out[o] = pa[i] + pb[j]; });
      }
      break;
    case BinaryOp::sub:
      if (same) {
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = pa[i] - pb[i];
      } else {
        detail::for_each_broadcast(out_shape, sa, sb, [&](auto o, auto i, auto j) { out[o] = pa[i] - pb[j]; });
      }
      break;
    case BinaryOp::mul:
      if (same) {
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = pa[i] * pb[i];
      } else {
        detail::for_each_broadcast(out_shape, sa, sb, [&](auto o, auto i, auto j) { out[o] = pa[i] * pb[j]; });
      }
      break;
  }
  static constexpr const char* names[] = {"add", "sub", "mul"};
  return detail::make_result<T>(
      names[static_cast<int>(op)], out_shape, std::move(out), {&a, &b},
      [op, out_shape, sa, sb](Node<T>& self) {
        T* ga = detail::input_grad(self, 0);
        T* gb = detail::input_grad(self, 1);
        const T* g = self.grad.data();
        const T* va = self.inputs[0]->value.data();
        const T* vb = self.inputs[1]->value.data();
        const T sign_b = op == BinaryOp::sub ? T(-1) : T(1);
        detail::for_each_broadcast(out_shape, sa, sb, [&](auto o, auto i, auto j) {
          if (op == BinaryOp::mul) {
            if (ga) ga[i] += g[o] * vb[j];
            if (gb) gb[j] += g[o] * va[i];
          } else {
            if (ga) ga[i] += g[o];
            if (gb) gb[j] += sign_b * g[o];
          }
        });
      });
}

template <class T>
Tensor<T> elementwise(UnaryOp op, const Tensor<T>& a) {
  const auto in = a.data();
  Buffer<T> out(in.size());
  if (op == UnaryOp::relu) {
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] > T(0) ? in[i] : T(0);
    return detail::make_result<T>("relu", a.shape(), std::move(out), {&a}, [](Node<T>& self) {
      T* ga = detail::input_grad(self, 0);
      const auto& x = self.inputs[0]->value;
      for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] > T(0)) ga[i] += self.grad[i];
      }
    });
  }
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = detail::sigmoid_scalar(in[i]);
  return detail::make_result<T>("sigmoid", a.shape(), std::move(out), {&a}, [](Node<T>& self) {
    T* ga = detail::input_grad(self, 0);
    const T fault = FaultInjection::sigmoid_backward ? T(1.01) : T(1);
    for (std::size_t i = 0; i < self.value.size(); ++i) {
      const T y = self.value[i];
      ga[i] += fault * self.grad[i] * y * (T(1) - y);
    }
  });
}

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) { return elementwise(BinaryOp::add, a, b); }
template <class T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) { return elementwise(BinaryOp::sub, a, b); }
template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) { return elementwise(BinaryOp::mul, a, b); }
template <class T>
Tensor<T> relu(const Tensor<T>& a) { return elementwise(UnaryOp::relu, a); }
template <class T>
Tensor<T> sigmoid(const Tensor<T>& a) { return elementwise(UnaryOp::sigmoid, a); }

template <class T>
Tensor<T> operator+(const Tensor<T>& a, const Tensor<T>& b) { return add(a, b); }
template <class T>
Tensor<T> operator-(const Tensor<T>& a, const Tensor<T>& b) { return sub(a, b); }
template <class T>
Tensor<T> operator*(const Tensor<T>& a, const Tensor<T>& b) { return mul(a, b); }

// Multiplication by a constant.
template <class T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
  const auto in = a.data();
  Buffer<T> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] * factor;
  return detail::make_result<T>("scale", a.shape(), std::move(out), {&a}, [factor](Node<T>& self) {
    T* ga = detail::input_grad(self, 0);
    for (std::size_t i = 0; i < self.grad.size(); ++i) ga[i] += factor * self.grad[i];
  });
}

// Sum of all elements, as a rank-0 tensor.
template <class T>
Tensor<T> sum(const Tensor<T>& a) {
  const auto in = a.data();
  T total = std::accumulate(in.begin(), in.end(), T(0));
  return detail::make_result<T>("sum", {}, {total}, {&a}, [](Node<T>& self) {
    T* ga = detail::input_grad(self, 0);
    const T g = self.grad[0];
    for (std::size_t i = 0; i < self.inputs[0]->value.size(); ++i) ga[i] += g;
  });
}

template <class T>
Tensor<T> mean(const Tensor<T>& a) {
  return scale(sum(a), T(1) / static_cast<T>(a.numel()));
}

// Sum over one axis; the reduced axis is kept with extent 1 when keepdim.
template <class T>
Tensor<T> sum_axis(const Tensor<T>& a, std::size_t axis, bool keepdim = true) {
  const Shape& s = a.shape();
  if (axis >= s.size()) throw ShapeError("sum_axis: axis out of range for " + to_string(s));
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  const std::size_t n = s[axis];
  const auto in = a.data();
  Buffer<T> out(outer * inner, T(0));
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t i = 0; i < inner; ++i) out[o * inner + i] += in[(o * n + k) * inner + i];
  Shape out_shape = s;
  if (keepdim) {
    out_shape[axis] = 1;
  } else {
    out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
  }
  return detail::make_result<T>("sum_axis", out_shape, std::move(out), {&a},
                                [outer, inner, n](Node<T>& self) {
                                  T* ga = detail::input_grad(self, 0);
                                  for (std::size_t o = 0; o < outer; ++o)
                                    for (std::size_t k = 0; k < n; ++k)
                                      for (std::size_t i = 0; i < inner; ++i)
                                        ga[(o * n + k) * inner + i] += self.grad[o * inner + i];
                                });
}

template <class T>
Tensor<T> broadcast_to(const Tensor<T>& a, const Shape& target) {
  if (detail::broadcast_shape(a.shape(), target) != target) {
    throw ShapeError("cannot broadcast " + to_string(a.shape()) + " to " + to_string(target));
  }
  return add(a, Tensor<T>::zeros(target));
}

template <class T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0]) {
    throw ShapeError("matmul: incompatible shapes " + to_string(a.shape()) + " and " +
                     to_string(b.shape()));
  }
  const auto m = static_cast<Eigen::Index>(a.shape()[0]);
  const auto k = static_cast<Eigen::Index>(a.shape()[1]);
  const auto n = static_cast<Eigen::Index>(b.shape()[1]);
  Buffer<T> out(static_cast<std::size_t>(m * n));
  detail::MapRM<T>(out.data(), m, n).noalias() =
      detail::ConstMapRM<T>(a.data().data(), m, k) * detail::ConstMapRM<T>(b.data().data(), k, n);
  return detail::make_result<T>(
      "matmul", {static_cast<std::size_t>(m), static_cast<std::size_t>(n)}, std::move(out), {&a, &b},
      [m, k, n](Node<T>& self) {
        detail::ConstMapRM<T> g(self.grad.data(), m, n);
        if (T* ga = detail::input_grad(self, 0)) {
          detail::MapRM<T>(ga, m, k).noalias() +=
              g * detail::ConstMapRM<T>(self.inputs[1]->value.data(), k, n).transpose();
        }
        if (T* gb = detail::input_grad(self, 1)) {
          detail::MapRM<T>(gb, k, n).noalias() +=
              detail::ConstMapRM<T>(self.inputs[0]->value.data(), m, k).transpose() * g;
        }
      });
}

template <class T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape) {
  if (element_count(shape) != a.numel()) {
    throw ShapeError("reshape: cannot view " + to_string(a.shape()) + " as " + to_string(shape));
  }
  Buffer<T> out(a.data().begin(), a.data().end());
  return detail::make_result<T>("reshape", std::move(shape), std::move(out), {&a}, [](Node<T>& self) {
    T* ga = detail::input_grad(self, 0);
    for (std::size_t i = 0; i < self.grad.size(); ++i) ga[i] += self.grad[i];
  });
}

// out.shape[i] = a.shape[perm[i]].
template <class T>
Tensor<T> permute(const Tensor<T>& a, const std::vector<std::size_t>& perm) {
  const Shape& s = a.shape();
  if (perm.size() != s.size()) throw ShapeError("permute: permutation rank differs from " + to_string(s));
  std::vector<bool> used(perm.size(), false);
  for (auto p : perm) {
    if (p >= perm.size() || used[p]) throw ShapeError("permute: invalid axis permutation");
    used[p] = true;
  }
  Shape out_shape(s.size());
  const auto in_strides = row_major_strides(s);
  std::vector<std::size_t> gather(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    out_shape[i] = s[perm[i]];
    gather[i] = in_strides[perm[i]];
  }
  const std::vector<std::size_t> unit(s.size(), 0);
  const auto in = a.data();
  Buffer<T> out(in.size());
  detail::for_each_broadcast(out_shape, gather, unit, [&](auto o, auto i, auto) { out[o] = in[i]; });
  return detail::make_result<T>("permute", out_shape, std::move(out), {&a},
                                [out_shape, gather, unit](Node<T>& self) {
                                  T* ga = detail::input_grad(self, 0);
                                  detail::for_each_broadcast(out_shape, gather, unit, [&](auto o, auto i, auto) {
                                    ga[i] += self.grad[o];
                                  });
                                });
}

template <class T>
Tensor<T> transpose(const Tensor<T>& a) {
  if (a.rank() != 2) throw ShapeError("transpose expects a matrix, got " + to_string(a.shape()));
  return permute(a, {1, 0});
}

// Concatenation along `axis`; all other extents must agree.
template <class T>
Tensor<T> concat(const Tensor<T>& a, const Tensor<T>& b, std::size_t axis = 0) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.size() != sb.size() || axis >= sa.size()) {
    throw ShapeError("concat: rank mismatch " + to_string(sa) + " vs " + to_string(sb));
  }
  for (std::size_t i = 0; i < sa.size(); ++i) {
    if (i != axis && sa[i] != sb[i]) {
      throw ShapeError("concat: extents differ off-axis " + to_string(sa) + " vs " + to_string(sb));
    }
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= sa[i];
  for (std::size_t i = axis + 1; i < sa.size(); ++i) inner *= sa[i];
  const std::size_t ca = sa[axis] * inner;
  const std::size_t cb = sb[axis] * inner;
  Shape out_shape = sa;
  out_shape[axis] += sb[axis];
  Buffer<T> out(a.numel() + b.numel());
  const auto va = a.data();
  const auto vb = b.data();
  for (std::size_t o = 0; o < outer; ++o) {
    std::copy_n(va.begin() + static_cast<std::ptrdiff_t>(o * ca), ca, out.begin() + static_cast<std::ptrdiff_t>(o * (ca + cb)));
    std::copy_n(vb.begin() + static_cast<std::ptrdiff_t>(o * cb), cb,
                out.begin() + static_cast<std::ptrdiff_t>(o * (ca + cb) + ca));
  }
  return detail::make_result<T>("concat", out_shape, std::move(out), {&a, &b},
                                [outer, ca, cb](Node<T>& self) {
                                  T* ga = detail::input_grad(self, 0);
                                  T* gb = detail::input_grad(self, 1);
                                  for (std::size_t o = 0; o < outer; ++o) {
                                    const T* g = self.grad.data() + o * (ca + cb);
                                    if (ga) for (std::size_t i = 0; i < ca; ++i) ga[o * ca + i] += g[i];
                                    if (gb) for (std::size_t i = 0; i < cb; ++i) gb[o * cb + i] += g[ca + i];
                                  }
                                });
}

}  // namespace rbam
