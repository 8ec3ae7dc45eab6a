// Copyright 2026 The Triple-GAN Toolkit Authors.
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

#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "tgan/rng.hpp"
#include "tgan/tensor.hpp"

namespace tgan::ad {

using Label = int;

struct Var {
  static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();
  std::size_t id = npos;
  bool valid() const noexcept { return id != npos; }
};

/// Gradients keyed by the address of the parameter tensor they belong to.
using GradMap = std::unordered_map<const Tensor*, Tensor>;

/// Append-only tape. Insertion order is a topological order because every op
/// can only reference nodes that already exist.
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, std::size_t self)>;

  Var constant(Tensor value) { return push(std::move(value), {}, nullptr, false); }

  /// Leaf bound to a parameter tensor. Frozen parameters appear in the gradient
  /// map with a zero gradient but never propagate.
  Var param(const Tensor& p, bool trainable = true) {
    Var v = push(p, {}, nullptr, trainable);
    nodes_[v.id].param = &p;
    return v;
  }

  /// Generic op node; requires_grad is inherited from the inputs.
  Var push(Tensor value, std::vector<std::size_t> inputs, BackwardFn fn) {
    bool rg = false;
    for (std::size_t i : inputs) rg = rg || nodes_.at(i).requires_grad;
    return push(std::move(value), std::move(inputs), rg ? std::move(fn) : nullptr, rg);
  }

  const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
  bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }
  std::size_t size() const noexcept { return nodes_.size(); }
  const std::vector<std::size_t>& inputs(Var v) const { return nodes_.at(v.id).inputs; }

  /// Gradient buffer of a node, zero-initialized on first access.
  Tensor& grad(std::size_t id) {
    Node& n = nodes_[id];
    if (n.grad.empty()) n.grad = Tensor(n.value.shape(), 0.0);
    return n.grad;
  }
  const Tensor& value_of(std::size_t id) const { return nodes_[id].value; }

  /// Reverse sweep from a scalar loss. Every parameter leaf in the graph gets
  /// an entry (zero if unreached); repeated bindings of one tensor accumulate.
  GradMap backward(Var loss) {
    if (value(loss).size() != 1)
      throw ContractError("backward needs a scalar loss, got shape " +
                          shape_str(value(loss).shape()));
    for (Node& n : nodes_) n.grad = Tensor();
    GradMap out;
    if (nodes_[loss.id].requires_grad) {
      grad(loss.id)[0] = 1.0;
      for (std::size_t id = loss.id + 1; id-- > 0;) {
        Node& n = nodes_[id];
        if (!n.requires_grad || n.grad.empty() || !n.backward) continue;
        n.backward(*this, id);
      }
    }
    for (Node& n : nodes_) {
      if (!n.param) continue;
      auto [it, inserted] = out.try_emplace(n.param, Tensor(n.value.shape(), 0.0));
      if (!n.grad.empty())
        for (std::size_t i = 0; i < n.grad.size(); ++i) it->second[i] += n.grad[i];
    }
    return out;
  }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    const Tensor* param = nullptr;
    bool requires_grad = false;
  };

  Var push(Tensor value, std::vector<std::size_t> inputs, BackwardFn fn, bool rg) {
    for (std::size_t i : inputs)
      if (i >= nodes_.size()) throw ContractError("op input refers to a future node");
    nodes_.push_back(Node{std::move(value), Tensor(), std::move(inputs), std::move(fn), nullptr, rg});
    return Var{nodes_.size() - 1};
  }

  std::vector<Node> nodes_;
};

// ---------------------------------------------------------------------------
// Dense kernels. Accumulation order is fixed (k outer, j inner) so that a
// matrix product and an explicit dot product of the same operands agree bitwise.

namespace kernel {

// out += a(n×d) · b(d×m)
inline void gemm_nn(const double* a, const double* b, double* out, std::size_t n, std::size_t d,
                    std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    double* o = out + i * m;
    for (std::size_t k = 0; k < d; ++k) {
      const double aik = a[i * d + k];
      const double* br = b + k * m;
      for (std::size_t j = 0; j < m; ++j) o[j] += aik * br[j];
    }
  }
}

// out += a(n×d) · b(m×d)ᵀ
inline void gemm_nt(const double* a, const double* b, double* out, std::size_t n, std::size_t d,
                    std::size_t m) {
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k) s += a[i * d + k] * b[j * d + k];
      out[i * m + j] += s;
    }
}

// out += a(n×d)ᵀ · b(n×m)
inline void gemm_tn(const double* a, const double* b, double* out, std::size_t n, std::size_t d,
                    std::size_t m) {
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < d; ++k) {
      const double aik = a[i * d + k];
      double* o = out + k * m;
      const double* br = b + i * m;
      for (std::size_t j = 0; j < m; ++j) o[j] += aik * br[j];
    }
}

}  // namespace kernel

namespace detail {

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
}

inline void require_matrix(const Tensor& a, const char* op) {
  if (a.rank() != 2)
    throw DimensionError(std::string(op) + ": expected matrix, got " + shape_str(a.shape()));
}

inline double softplus(double v) { return std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v))); }

inline double sigmoid(double v) {
  if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

inline void accumulate(Tensor& dst, const Tensor& src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

inline void check_labels(std::span<const Label> labels, std::size_t n, std::size_t k,
                         const char* op) {
  if (labels.size() != n)
    throw DimensionError(std::string(op) + ": " + std::to_string(labels.size()) +
                         " labels for " + std::to_string(n) + " rows");
  for (Label y : labels)
    if (y < 0 || static_cast<std::size_t>(y) >= k)
      throw IndexError(std::string(op) + ": label " + std::to_string(y) + " outside [0," +
                       std::to_string(k) + ")");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Linear algebra

inline Var matmul(Graph& g, Var a, Var b) {
  const Tensor& av = g.value(a);
  const Tensor& bv = g.value(b);
  detail::require_matrix(av, "matmul");
  detail::require_matrix(bv, "matmul");
  if (av.cols() != bv.rows())
    throw DimensionError("matmul: inner dimensions " + shape_str(av.shape()) + " · " +
                         shape_str(bv.shape()));
  const std::size_t n = av.rows(), d = av.cols(), m = bv.cols();
  Tensor out = Tensor::matrix(n, m);
  kernel::gemm_nn(av.raw(), bv.raw(), out.raw(), n, d, m);
  return g.push(std::move(out), {a.id, b.id}, [a, b, n, d, m](Graph& g, std::size_t self) {
    const Tensor& go = g.grad(self);
    if (g.requires_grad(a)) kernel::gemm_nt(go.raw(), g.value(b).raw(), g.grad(a.id).raw(), n, m, d);
    if (g.requires_grad(b)) kernel::gemm_tn(g.value(a).raw(), go.raw(), g.grad(b.id).raw(), n, d, m);
  });
}

/// a(n×d) · b(m×d)ᵀ
inline Var matmul_nt(Graph& g, Var a, Var b) {
  const Tensor& av = g.value(a);
  const Tensor& bv = g.value(b);
  detail::require_matrix(av, "matmul_nt");
  detail::require_matrix(bv, "matmul_nt");
  if (av.cols() != bv.cols())
    throw DimensionError("matmul_nt: inner dimensions " + shape_str(av.shape()) + " · " +
                         shape_str(bv.shape()) + "ᵀ");
  const std::size_t n = av.rows(), d = av.cols(), m = bv.rows();
  Tensor out = Tensor::matrix(n, m);
  kernel::gemm_nt(av.raw(), bv.raw(), out.raw(), n, d, m);
  return g.push(std::move(out), {a.id, b.id}, [a, b, n, d, m](Graph& g, std::size_t self) {
    const Tensor& go = g.grad(self);
    if (g.requires_grad(a)) kernel::gemm_nn(go.raw(), g.value(b).raw(), g.grad(a.id).raw(), n, m, d);
    if (g.requires_grad(b)) kernel::gemm_tn(go.raw(), g.value(a).raw(), g.grad(b.id).raw(), n, m, d);
  });
}

/// x(n×d) · W(d×m) + b(m)
inline Var affine(Graph& g, Var x, Var w, Var b) {
  const Tensor& xv = g.value(x);
  const Tensor& wv = g.value(w);
  const Tensor& bv = g.value(b);
  detail::require_matrix(xv, "affine");
  detail::require_matrix(wv, "affine");
  if (xv.cols() != wv.rows())
    throw DimensionError("affine: inner dimensions " + shape_str(xv.shape()) + " · " +
                         shape_str(wv.shape()));
  if (bv.size() != wv.cols())
    throw DimensionError("affine: bias " + shape_str(bv.shape()) + " for weight " +
                         shape_str(wv.shape()));
  const std::size_t n = xv.rows(), d = xv.cols(), m = wv.cols();
  Tensor out = Tensor::matrix(n, m);
  kernel::gemm_nn(xv.raw(), wv.raw(), out.raw(), n, d, m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) out.at(i, j) += bv[j];
  return g.push(std::move(out), {x.id, w.id, b.id}, [x, w, b, n, d, m](Graph& g, std::size_t self) {
    const Tensor& go = g.grad(self);
    if (g.requires_grad(x)) kernel::gemm_nt(go.raw(), g.value(w).raw(), g.grad(x.id).raw(), n, m, d);
    if (g.requires_grad(w)) kernel::gemm_tn(g.value(x).raw(), go.raw(), g.grad(w.id).raw(), n, d, m);
    if (g.requires_grad(b)) {
      Tensor& gb = g.grad(b.id);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) gb[j] += go.at(i, j);
    }
  });
}

inline Var transpose(Graph& g, Var a) {
  const Tensor& av = g.value(a);
  detail::require_matrix(av, "transpose");
  const std::size_t r = av.rows(), c = av.cols();
  Tensor out = Tensor::matrix(c, r);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out.at(j, i) = av.at(i, j);
  return g.push(std::move(out), {a.id}, [a, r, c](Graph& g, std::size_t self) {
    const Tensor& go = g.grad(self);
    Tensor& ga = g.grad(a.id);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) ga.at(i, j) += go.at(j, i);
  });
}

inline Var concat_cols(Graph& g, Var a, Var b) {
  const Tensor& av = g.value(a);
  const Tensor& bv = g.value(b);
  detail::require_matrix(av, "concat_cols");
  detail::require_matrix(bv, "concat_cols");
  if (av.rows() != bv.rows()) throw DimensionError("concat_cols: row counts differ");
  const std::size_t n = av.rows(), ca = av.cols(), cb = bv.cols();
  Tensor out = Tensor::matrix(n, ca + cb);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < ca; ++j) out.at(i, j) = av.at(i, j);
    for (std::size_t j = 0; j < cb; ++j) out.at(i, ca + j) = bv.at(i, j);
  }
  return g.push(std::move(out), {a.id, b.id}, [a, b, n, ca, cb](Graph& g, std::size_t self) {
    const Tensor& go = g.grad(self);
    if (g.requires_grad(a)) {
      Tensor& ga = g.grad(a.id);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < ca; ++j) ga.at(i, j) += go.at(i, j);
    }
    if (g.requires_grad(b)) {
      Tensor& gb = g.grad(b.id);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < cb; ++j) gb.at(i, j) += go.at(i, ca + j);
    }
  });
}

/// Row lookup: out[i,:] = table[labels[i],:].
inline Var gather_rows(Graph& g, Var table, std::span<const Label> labels) {
  const Tensor& tv = g.value(table);
  detail::require_matrix(tv, "gather_rows");
  detail::check_labels(labels, labels.size(), tv.rows(), "gather_rows");
  const std::size_t n = labels.size(), f = tv.cols();
  Tensor out = Tensor::matrix(n, f);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < f; ++j) out.at(i, j) = tv.at(static_cast<std::size_t>(labels[i]), j);
  std::vector<Label> ys(labels.begin(), labels.end());
  return g.push(std::move(out), {table.id}, [table, ys = std::move(ys), f](Graph& g, std::size_t self) {
    const Tensor& go = g.grad(self);
    Tensor& gt = g.grad(table.id);
    for (std::size_t i = 0; i < ys.size(); ++i)
      for (std::size_t j = 0; j < f; ++j) gt.at(static_cast<std::size_t>(ys[i]), j) += go.at(i, j);
  });
}

/// Per-row dot product of two n×f matrices, returned as n×1.
inline Var row_dot(Graph& g, Var a, Var b) {
  const Tensor& av = g.value(a);
  const Tensor& bv = g.value(b);
  detail::require_matrix(av, "row_dot");
  detail::require_same_shape(av, bv, "row_dot");
  const std::size_t n = av.rows(), f = av.cols();
  Tensor out = Tensor::matrix(n, 1);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < f; ++k) s += av.at(i, k) * bv.at(i, k);
    out[i] = s;
  }
  return g.push(std::move(out), {a.id, b.id}, [a, b, n, f](Graph& g, std::size_t self) {
    const Tensor& go = g.grad(self);
    if (g.requires_grad(a)) {
      Tensor& ga = g.grad(a.id);
      const Tensor& bv = g.value(b);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < f; ++k) ga.at(i, k) += go[i] * bv.at(i, k);
    }
    if (g.requires_grad(b)) {
      Tensor& gb = g.grad(b.id);
      const Tensor& av = g.value(a);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < f; ++k) gb.at(i, k) += go[i] * av.at(i, k);
    }
  });
}

/// m(n×k) + column v(n×1) broadcast across columns.
inline Var add_col(Graph& g, Var m, Var v) {
  const Tensor& mv = g.value(m);
  const Tensor& vv = g.value(v);
  detail::require_matrix(mv, "add_col");
  if (vv.size() != mv.rows()) throw DimensionError("add_col: column length mismatch");
  const std::size_t n = mv.rows(), k = mv.cols();
  Tensor out = mv;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < k; ++j) out.at(i, j) = mv.at(i, j) + vv[i];
  return g.push(std::move(out), {m.id, v.id}, [m, v, n, k](Graph& g, std::size_t self) {
    const Tensor& go = g.grad(self);
    if (g.requires_grad(m)) detail::accumulate(g.grad(m.id), go);
    if (g.requires_grad(v)) {
      Tensor& gv = g.grad(v.id);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < k; ++j) gv[i] += go.at(i, j);
    }
  });
}

// ---------------------------------------------------------------------------
// Elementwise

inline Var add(Graph& g, Var a, Var b) {
  detail::require_same_shape(g.value(a), g.value(b), "add");
  Tensor out = g.value(a);
  const Tensor& bv = g.value(b);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = out[i] + bv[i];
  return g.push(std::move(out), {a.id, b.id}, [a, b](Graph& g, std::size_t self) {
    const Tensor& go = g.grad(self);
    if (g.requires_grad(a)) detail::accumulate(g.grad(a.id), go);
    if (g.requires_grad(b)) detail::accumulate(g.grad(b.id), go);
  });
}

inline Var sub(Graph& g, Var a, Var b) {
  detail::require_same_shape(g.value(a), g.value(b), "sub");
  Tensor out = g.value(a);
  const Tensor& bv = g.value(b);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  return g.push(std::move(out), {a.id, b.id}, [a, b](Graph& g, std::size_t self) {
    const Tensor& go = g.grad(self);
    if (g.requires_grad(a)) detail::accumulate(g.grad(a.id), go);
    if (g.requires_grad(b)) {
      Tensor& gb = g.grad(b.id);
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= go[i];
    }
  });
}

inline Var mul(Graph& g, Var a, Var b) {
  detail::require_same_shape(g.value(a), g.value(b), "mul");
  Tensor out = g.value(a);
  const Tensor& bv = g.value(b);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  return g.push(std::move(out), {a.id, b.id}, [a, b](Graph& g, std::size_t self) {
    const Tensor& go = g.grad(self);
    if (g.requires_grad(a)) {
      Tensor& ga = g.grad(a.id);
      const Tensor& bv = g.value(b);
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += go[i] * bv[i];
    }
    if (g.requires_grad(b)) {
      Tensor& gb = g.grad(b.id);
      const Tensor& av = g.value(a);
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += go[i] * av[i];
    }
  });
}

inline Var scale(Graph& g, Var a, double c) {
  Tensor out = g.value(a);
  for (double& v : out.data()) v *= c;
  return g.push(std::move(out), {a.id}, [a, c](Graph& g, std::size_t self) {
    const Tensor& go = g.grad(self);
    Tensor& ga = g.grad(a.id);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += c * go[i];
  });
}

namespace detail {

template <class F, class DF>
Var unary(Graph& g, Var a, F f, DF df) {
  Tensor out = g.value(a);
  for (double& v : out.data()) v = f(v);
  return g.push(std::move(out), {a.id}, [a, df](Graph& g, std::size_t self) {
    const Tensor& go = g.grad(self);
    const Tensor& x = g.value(a);
    const Tensor& y = g.value_of(self);
    Tensor& ga = g.grad(a.id);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += go[i] * df(x[i], y[i]);
  });
}

}  // namespace detail

inline Var log(Graph& g, Var a) {
  return detail::unary(
      g, a, [](double v) { return std::log(v); }, [](double x, double) { return 1.0 / x; });
}

inline Var exp(Graph& g, Var a) {
  return detail::unary(
      g, a, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

/// log(1 + e^v), stable for large |v|.
inline Var softplus(Graph& g, Var a) {
  return detail::unary(
      g, a, [](double v) { return detail::softplus(v); },
      [](double x, double) { return detail::sigmoid(x); });
}

enum class Activation { identity, relu, lrelu, tanh, sigmoid };

inline constexpr double kLeakySlope = 0.2;

inline Var activation(Graph& g, Activation kind, Var x) {
  switch (kind) {
    case Activation::identity:
      return x;
    case Activation::relu:
      return detail::unary(
          g, x, [](double v) { return v >= 0.0 ? v : 0.0; },
          [](double v, double) { return v >= 0.0 ? 1.0 : 0.0; });
    case Activation::lrelu:
      return detail::unary(
          g, x, [](double v) { return v >= 0.0 ? v : kLeakySlope * v; },
          [](double v, double) { return v >= 0.0 ? 1.0 : kLeakySlope; });
    case Activation::tanh:
      return detail::unary(
          g, x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
    case Activation::sigmoid:
      return detail::unary(
          g, x, [](double v) { return detail::sigmoid(v); },
          [](double, double y) { return y * (1.0 - y); });
  }
  throw ContractError("unknown activation");
}

// ---------------------------------------------------------------------------
// Reductions

inline Var sum(Graph& g, Var a) {
  double s = 0.0;
  for (double v : g.value(a).data()) s += v;
  return g.push(Tensor::scalar(s), {a.id}, [a](Graph& g, std::size_t self) {
    const double go = g.grad(self)[0];
    for (double& v : g.grad(a.id).data()) v += go;
  });
}

inline Var mean(Graph& g, Var a) {
  const double n = static_cast<double>(g.value(a).size());
  return scale(g, sum(g, a), 1.0 / n);
}

// ---------------------------------------------------------------------------
// Probability heads and losses

namespace detail {

inline void check_finite(const Tensor& t, const char* op) {
  if (!t.all_finite()) throw NumericError(std::string(op) + ": non-finite input");
}

inline Tensor log_softmax_rows_value(const Tensor& x) {
  Tensor out = x;
  const std::size_t n = x.rows(), k = x.cols();
  for (std::size_t i = 0; i < n; ++i) {
    double mx = x.at(i, 0);
    for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, x.at(i, j));
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) s += std::exp(x.at(i, j) - mx);
    const double lse = mx + std::log(s);
    for (std::size_t j = 0; j < k; ++j) out.at(i, j) = x.at(i, j) - lse;
  }
  return out;
}

}  // namespace detail

/// Row-wise softmax with max subtraction.
inline Tensor softmax_rows(const Tensor& logits) {
  detail::require_matrix(logits, "softmax_rows");
  if (logits.cols() < 2) throw DimensionError("softmax_rows: need at least 2 columns");
  detail::check_finite(logits, "softmax_rows");
  Tensor out = logits;
  const std::size_t n = logits.rows(), k = logits.cols();
  for (std::size_t i = 0; i < n; ++i) {
    double mx = logits.at(i, 0);
    for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, logits.at(i, j));
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) s += (out.at(i, j) = std::exp(logits.at(i, j) - mx));
    for (std::size_t j = 0; j < k; ++j) out.at(i, j) /= s;
  }
  return out;
}

inline Var softmax_rows(Graph& g, Var logits) {
  Tensor out = softmax_rows(g.value(logits));
  const std::size_t n = out.rows(), k = out.cols();
  return g.push(std::move(out), {logits.id}, [logits, n, k](Graph& g, std::size_t self) {
    const Tensor& go = g.grad(self);
    const Tensor& s = g.value_of(self);
    Tensor& gx = g.grad(logits.id);
    for (std::size_t i = 0; i < n; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < k; ++j) dot += go.at(i, j) * s.at(i, j);
      for (std::size_t j = 0; j < k; ++j) gx.at(i, j) += s.at(i, j) * (go.at(i, j) - dot);
    }
  });
}

inline Var log_softmax_rows(Graph& g, Var logits) {
  const Tensor& x = g.value(logits);
  detail::require_matrix(x, "log_softmax_rows");
  if (x.cols() < 2) throw DimensionError("log_softmax_rows: need at least 2 columns");
  detail::check_finite(x, "log_softmax_rows");
  Tensor out = detail::log_softmax_rows_value(x);
  const std::size_t n = out.rows(), k = out.cols();
  return g.push(std::move(out), {logits.id}, [logits, n, k](Graph& g, std::size_t self) {
    const Tensor& go = g.grad(self);
    const Tensor& ls = g.value_of(self);
    Tensor& gx = g.grad(logits.id);
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < k; ++j) s += go.at(i, j);
      for (std::size_t j = 0; j < k; ++j) gx.at(i, j) += go.at(i, j) - std::exp(ls.at(i, j)) * s;
    }
  });
}

/// Mean negative log-likelihood of integer labels under softmax(logits).
inline Var cross_entropy(Graph& g, Var logits, std::span<const Label> labels) {
  const Tensor& x = g.value(logits);
  detail::require_matrix(x, "cross_entropy");
  detail::check_labels(labels, x.rows(), x.cols(), "cross_entropy");
  detail::check_finite(x, "cross_entropy");
  const Tensor ls = detail::log_softmax_rows_value(x);
  const std::size_t n = x.rows(), k = x.cols();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) total -= ls.at(i, static_cast<std::size_t>(labels[i]));
  std::vector<Label> ys(labels.begin(), labels.end());
  return g.push(Tensor::scalar(total / static_cast<double>(n)), {logits.id},
                [logits, ls, ys = std::move(ys), n, k](Graph& g, std::size_t self) {
                  const double go = g.grad(self)[0] / static_cast<double>(n);
                  Tensor& gx = g.grad(logits.id);
                  for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < k; ++j) {
                      const double ind = static_cast<std::size_t>(ys[i]) == j ? 1.0 : 0.0;
                      gx.at(i, j) += go * (std::exp(ls.at(i, j)) - ind);
                    }
                });
}

/// Mean binary cross-entropy of sigmoid(logit) against targets, log-sum-exp form.
inline Var bce_logit(Graph& g, Var logit, const Tensor& target) {
  const Tensor& l = g.value(logit);
  if (l.size() != target.size())
    throw DimensionError("bce_logit: " + shape_str(l.shape()) + " logits vs " +
                         shape_str(target.shape()) + " targets");
  const std::size_t n = l.size();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    total += std::max(l[i], 0.0) - l[i] * target[i] + std::log1p(std::exp(-std::abs(l[i])));
  return g.push(Tensor::scalar(total / static_cast<double>(n)), {logit.id},
                [logit, target, n](Graph& g, std::size_t self) {
                  const double go = g.grad(self)[0] / static_cast<double>(n);
                  const Tensor& l = g.value(logit);
                  Tensor& gl = g.grad(logit.id);
                  for (std::size_t i = 0; i < n; ++i) gl[i] += go * (detail::sigmoid(l[i]) - target[i]);
                });
}

inline Var bce_logit(Graph& g, Var logit, double target) {
  return bce_logit(g, logit, Tensor(g.value(logit).shape(), target));
}

inline Var mse(Graph& g, Var a, Var b) {
  detail::require_same_shape(g.value(a), g.value(b), "mse");
  const Tensor& av = g.value(a);
  const Tensor& bv = g.value(b);
  const std::size_t n = av.size();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = av[i] - bv[i];
    total += d * d;
  }
  return g.push(Tensor::scalar(total / static_cast<double>(n)), {a.id, b.id},
                [a, b, n](Graph& g, std::size_t self) {
                  const double go = 2.0 * g.grad(self)[0] / static_cast<double>(n);
                  const Tensor& av = g.value(a);
                  const Tensor& bv = g.value(b);
                  if (g.requires_grad(a)) {
                    Tensor& ga = g.grad(a.id);
                    for (std::size_t i = 0; i < n; ++i) ga[i] += go * (av[i] - bv[i]);
                  }
                  if (g.requires_grad(b)) {
                    Tensor& gb = g.grad(b.id);
                    for (std::size_t i = 0; i < n; ++i) gb[i] -= go * (av[i] - bv[i]);
                  }
                });
}

// ---------------------------------------------------------------------------
// Stochastic layers. In eval mode, or with zero noise, they return x itself.

inline Var gaussian_noise(Graph& g, Var x, double sigma, RngStream& rng, bool train) {
  if (sigma < 0.0) throw ContractError("gaussian_noise: sigma must be >= 0");
  if (!train || sigma == 0.0) return x;
  Tensor out = g.value(x);
  for (double& v : out.data()) v += sigma * rng.normal();
  return g.push(std::move(out), {x.id}, [x](Graph& g, std::size_t self) {
    detail::accumulate(g.grad(x.id), g.grad(self));
  });
}

/// Inverted dropout: kept units are scaled by 1/(1-rate).
inline Var dropout(Graph& g, Var x, double rate, RngStream& rng, bool train) {
  if (rate < 0.0 || rate >= 1.0) throw ContractError("dropout: rate must lie in [0,1)");
  if (!train || rate == 0.0) return x;
  const Tensor& xv = g.value(x);
  Tensor mask(xv.shape(), 0.0);
  const double keep = 1.0 / (1.0 - rate);
  for (double& m : mask.data()) m = rng.uniform() >= rate ? keep : 0.0;
  Tensor out = xv;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  return g.push(std::move(out), {x.id}, [x, mask = std::move(mask)](Graph& g, std::size_t self) {
    const Tensor& go = g.grad(self);
    Tensor& gx = g.grad(x.id);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += go[i] * mask[i];
  });
}

}  // namespace tgan::ad
