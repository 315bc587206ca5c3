#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <unordered_set>
#include <vector>

#include "bevdrive/core/tensor.hpp"

namespace bevdrive::ad {

/// Reverse-mode autodiff over Tensor<S>. Graphs are built dynamically;
/// backward() runs the tape in reverse topological order. Nodes hold
/// shared ownership of their parents only, so releasing the root frees
/// the whole graph.
template <typename S>
struct Node {
  Tensor<S> value;
  Tensor<S> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backfn;

  void ensureGrad() {
    if (grad.numel() == 0) grad = Tensor<S>(value.shape());
  }
};

template <typename S>
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node<S>> n) : node_(std::move(n)) {}

  static Var leaf(Tensor<S> value, bool requires_grad) {
    auto n = std::make_shared<Node<S>>();
    n->value = std::move(value);
    n->requires_grad = requires_grad;
    return Var(std::move(n));
  }
  static Var constant(Tensor<S> value) { return leaf(std::move(value), false); }

  bool defined() const { return node_ != nullptr; }
  const Tensor<S>& value() const { return node_->value; }
  Tensor<S>& value() { return node_->value; }
  const Tensor<S>& grad() const { return node_->grad; }
  bool requiresGrad() const { return node_ && node_->requires_grad; }
  std::shared_ptr<Node<S>> node() const { return node_; }

  S item() const { return node_->value[0]; }

  void zeroGrad() {
    if (node_ && node_->grad.numel() > 0) node_->grad.fill(S(0));
  }

  /// New leaf sharing this value; gradients do not flow past it.
  Var detach() const { return constant(node_->value); }

  /// Backpropagate from this (scalar or any-shape with implicit seed 1).
  void backward() {
    std::vector<Node<S>*> order;
    std::unordered_set<Node<S>*> seen;
    std::vector<std::pair<Node<S>*, std::size_t>> stack;
    stack.push_back({node_.get(), 0});
    seen.insert(node_.get());
    while (!stack.empty()) {
      auto& [n, idx] = stack.back();
      if (idx < n->parents.size()) {
        Node<S>* p = n->parents[idx].get();
        ++idx;
        if (p->requires_grad && !seen.count(p)) {
          seen.insert(p);
          stack.push_back({p, 0});
        }
      } else {
        order.push_back(n);
        stack.pop_back();
      }
    }
    node_->ensureGrad();
    node_->grad.fill(S(1));
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      Node<S>* n = *it;
      if (n->backfn) n->backfn(*n);
    }
  }

 private:
  std::shared_ptr<Node<S>> node_;
};

namespace detail {

template <typename S>
std::shared_ptr<Node<S>> makeNode(Tensor<S> value, std::vector<Var<S>> parents,
                                  std::function<void(Node<S>&)> backfn) {
  auto n = std::make_shared<Node<S>>();
  n->value = std::move(value);
  bool rg = false;
  for (auto& p : parents) {
    rg = rg || p.requiresGrad();
    n->parents.push_back(p.node());
  }
  n->requires_grad = rg;
  if (rg) n->backfn = std::move(backfn);
  return n;
}

template <typename S>
void accumulate(Node<S>& parent, const Tensor<S>& g) {
  if (!parent.requires_grad) return;
  parent.ensureGrad();
  for (std::int64_t i = 0; i < g.numel(); ++i) parent.grad[i] += g[i];
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise and scalar ops
// ---------------------------------------------------------------------------

template <typename S>
Var<S> add(const Var<S>& a, const Var<S>& b) {
  assert(a.value().sameShape(b.value()));
  Tensor<S> out = a.value();
  for (std::int64_t i = 0; i < out.numel(); ++i) out[i] += b.value()[i];
  return Var<S>(detail::makeNode<S>(std::move(out), {a, b}, [](Node<S>& n) {
    detail::accumulate(*n.parents[0], n.grad);
    detail::accumulate(*n.parents[1], n.grad);
  }));
}

template <typename S>
Var<S> sub(const Var<S>& a, const Var<S>& b) {
  assert(a.value().sameShape(b.value()));
  Tensor<S> out = a.value();
  for (std::int64_t i = 0; i < out.numel(); ++i) out[i] -= b.value()[i];
  return Var<S>(detail::makeNode<S>(std::move(out), {a, b}, [](Node<S>& n) {
    detail::accumulate(*n.parents[0], n.grad);
    if (n.parents[1]->requires_grad) {
      n.parents[1]->ensureGrad();
      for (std::int64_t i = 0; i < n.grad.numel(); ++i) n.parents[1]->grad[i] -= n.grad[i];
    }
  }));
}

template <typename S>
Var<S> mul(const Var<S>& a, const Var<S>& b) {
  assert(a.value().sameShape(b.value()));
  Tensor<S> out = a.value();
  for (std::int64_t i = 0; i < out.numel(); ++i) out[i] *= b.value()[i];
  return Var<S>(detail::makeNode<S>(std::move(out), {a, b}, [](Node<S>& n) {
    auto& pa = *n.parents[0];
    auto& pb = *n.parents[1];
    if (pa.requires_grad) {
      pa.ensureGrad();
      for (std::int64_t i = 0; i < n.grad.numel(); ++i) pa.grad[i] += n.grad[i] * pb.value[i];
    }
    if (pb.requires_grad) {
      pb.ensureGrad();
      for (std::int64_t i = 0; i < n.grad.numel(); ++i) pb.grad[i] += n.grad[i] * pa.value[i];
    }
  }));
}

template <typename S>
Var<S> scale(const Var<S>& a, S s) {
  Tensor<S> out = a.value();
  for (std::int64_t i = 0; i < out.numel(); ++i) out[i] *= s;
  return Var<S>(detail::makeNode<S>(std::move(out), {a}, [s](Node<S>& n) {
    auto& p = *n.parents[0];
    if (!p.requires_grad) return;
    p.ensureGrad();
    for (std::int64_t i = 0; i < n.grad.numel(); ++i) p.grad[i] += s * n.grad[i];
  }));
}

template <typename S>
Var<S> addScalar(const Var<S>& a, S s) {
  Tensor<S> out = a.value();
  for (std::int64_t i = 0; i < out.numel(); ++i) out[i] += s;
  return Var<S>(detail::makeNode<S>(std::move(out), {a}, [](Node<S>& n) {
    detail::accumulate(*n.parents[0], n.grad);
  }));
}

template <typename S, typename FwdFn, typename BwdFn>
Var<S> unaryOp(const Var<S>& a, FwdFn fwd, BwdFn dfdx_from_xy) {
  Tensor<S> out = a.value();
  for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = fwd(out[i]);
  return Var<S>(detail::makeNode<S>(std::move(out), {a}, [dfdx_from_xy](Node<S>& n) {
    auto& p = *n.parents[0];
    if (!p.requires_grad) return;
    p.ensureGrad();
    for (std::int64_t i = 0; i < n.grad.numel(); ++i)
      p.grad[i] += n.grad[i] * dfdx_from_xy(p.value[i], n.value[i]);
  }));
}

template <typename S>
Var<S> relu(const Var<S>& a) {
  return unaryOp(
      a, [](S x) { return x > S(0) ? x : S(0); },
      [](S x, S) { return x > S(0) ? S(1) : S(0); });
}

template <typename S>
Var<S> sigmoid(const Var<S>& a) {
  return unaryOp(
      a, [](S x) { return S(1) / (S(1) + std::exp(-x)); },
      [](S, S y) { return y * (S(1) - y); });
}

template <typename S>
Var<S> tanhv(const Var<S>& a) {
  return unaryOp(
      a, [](S x) { return std::tanh(x); }, [](S, S y) { return S(1) - y * y; });
}

template <typename S>
Var<S> absv(const Var<S>& a) {
  return unaryOp(
      a, [](S x) { return std::abs(x); },
      [](S x, S) { return x > S(0) ? S(1) : (x < S(0) ? S(-1) : S(0)); });
}

template <typename S>
Var<S> logv(const Var<S>& a) {
  return unaryOp(
      a, [](S x) { return std::log(x); }, [](S x, S) { return S(1) / x; });
}

template <typename S>
Var<S> expv(const Var<S>& a) {
  return unaryOp(
      a, [](S x) { return std::exp(x); }, [](S, S y) { return y; });
}

template <typename S>
Var<S> square(const Var<S>& a) {
  return unaryOp(
      a, [](S x) { return x * x; }, [](S x, S) { return S(2) * x; });
}

/// Numerically stable softplus; log(sigmoid(x)) == -softplus(-x).
template <typename S>
Var<S> softplus(const Var<S>& a) {
  return unaryOp(
      a,
      [](S x) { return std::max(x, S(0)) + std::log1p(std::exp(-std::abs(x))); },
      [](S x, S) { return S(1) / (S(1) + std::exp(-x)); });
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

template <typename S>
Var<S> sumAll(const Var<S>& a) {
  S s = S(0);
  for (std::int64_t i = 0; i < a.value().numel(); ++i) s += a.value()[i];
  return Var<S>(detail::makeNode<S>(Tensor<S>::scalar(s), {a}, [](Node<S>& n) {
    auto& p = *n.parents[0];
    if (!p.requires_grad) return;
    p.ensureGrad();
    const S g = n.grad[0];
    for (std::int64_t i = 0; i < p.grad.numel(); ++i) p.grad[i] += g;
  }));
}

template <typename S>
Var<S> meanAll(const Var<S>& a) {
  const S inv = S(1) / static_cast<S>(a.value().numel());
  return scale(sumAll(a), inv);
}

/// Sum over columns: [R, C] -> [R].
template <typename S>
Var<S> rowSum(const Var<S>& a) {
  const int R = a.value().dim(0), C = a.value().dim(1);
  Tensor<S> out({R});
  for (int r = 0; r < R; ++r) {
    S s = S(0);
    for (int c = 0; c < C; ++c) s += a.value().at(r, c);
    out[r] = s;
  }
  return Var<S>(detail::makeNode<S>(std::move(out), {a}, [R, C](Node<S>& n) {
    auto& p = *n.parents[0];
    if (!p.requires_grad) return;
    p.ensureGrad();
    for (int r = 0; r < R; ++r)
      for (int c = 0; c < C; ++c) p.grad.at(r, c) += n.grad[r];
  }));
}

template <typename S>
Var<S> addN(const std::vector<Var<S>>& xs) {
  assert(!xs.empty());
  Var<S> acc = xs[0];
  for (std::size_t i = 1; i < xs.size(); ++i) acc = add(acc, xs[i]);
  return acc;
}

// ---------------------------------------------------------------------------
// Shape ops
// ---------------------------------------------------------------------------

template <typename S>
Var<S> reshape(const Var<S>& a, std::vector<int> shape) {
  Tensor<S> out = a.value().reshaped(std::move(shape));
  return Var<S>(detail::makeNode<S>(std::move(out), {a}, [](Node<S>& n) {
    detail::accumulate(*n.parents[0], n.grad);
  }));
}

/// Concatenate along columns: [R, Ca] ++ [R, Cb] -> [R, Ca+Cb].
template <typename S>
Var<S> concatCols(const Var<S>& a, const Var<S>& b) {
  const int R = a.value().dim(0), Ca = a.value().dim(1), Cb = b.value().dim(1);
  assert(b.value().dim(0) == R);
  Tensor<S> out({R, Ca + Cb});
  for (int r = 0; r < R; ++r) {
    for (int c = 0; c < Ca; ++c) out.at(r, c) = a.value().at(r, c);
    for (int c = 0; c < Cb; ++c) out.at(r, Ca + c) = b.value().at(r, c);
  }
  return Var<S>(detail::makeNode<S>(std::move(out), {a, b}, [R, Ca, Cb](Node<S>& n) {
    auto& pa = *n.parents[0];
    auto& pb = *n.parents[1];
    if (pa.requires_grad) {
      pa.ensureGrad();
      for (int r = 0; r < R; ++r)
        for (int c = 0; c < Ca; ++c) pa.grad.at(r, c) += n.grad.at(r, c);
    }
    if (pb.requires_grad) {
      pb.ensureGrad();
      for (int r = 0; r < R; ++r)
        for (int c = 0; c < Cb; ++c) pb.grad.at(r, c) += n.grad.at(r, Ca + c);
    }
  }));
}

/// Column slice [R, C] -> [R, c1-c0).
template <typename S>
Var<S> sliceCols(const Var<S>& a, int c0, int c1) {
  const int R = a.value().dim(0), C = a.value().dim(1), W = c1 - c0;
  Tensor<S> out({R, W});
  for (int r = 0; r < R; ++r)
    for (int c = 0; c < W; ++c) out.at(r, c) = a.value().at(r, c0 + c);
  return Var<S>(detail::makeNode<S>(std::move(out), {a}, [R, C, W, c0](Node<S>& n) {
    auto& p = *n.parents[0];
    if (!p.requires_grad) return;
    p.ensureGrad();
    for (int r = 0; r < R; ++r)
      for (int c = 0; c < W; ++c) p.grad.at(r, c0 + c) += n.grad.at(r, c);
  }));
}

/// Concatenate a list of channel tensors [Ci, H, W] -> [sum Ci, H, W].
template <typename S>
Var<S> concatChannels(const std::vector<Var<S>>& xs) {
  assert(!xs.empty());
  const int H = xs[0].value().dim(1), W = xs[0].value().dim(2);
  int Ctot = 0;
  for (auto& x : xs) Ctot += x.value().dim(0);
  Tensor<S> out({Ctot, H, W});
  std::int64_t off = 0;
  for (auto& x : xs) {
    std::copy(x.value().data(), x.value().data() + x.value().numel(), out.data() + off);
    off += x.value().numel();
  }
  std::vector<Var<S>> parents = xs;
  return Var<S>(detail::makeNode<S>(std::move(out), parents, [](Node<S>& n) {
    std::int64_t off = 0;
    for (auto& pp : n.parents) {
      auto& p = *pp;
      const std::int64_t m = p.value.numel();
      if (p.requires_grad) {
        p.ensureGrad();
        for (std::int64_t i = 0; i < m; ++i) p.grad[i] += n.grad[off + i];
      }
      off += m;
    }
  }));
}

// ---------------------------------------------------------------------------
// Linear algebra
// ---------------------------------------------------------------------------

/// Matrix product [m, k] x [k, n] -> [m, n].
template <typename S>
Var<S> matmul(const Var<S>& a, const Var<S>& b) {
  const int m = a.value().dim(0), k = a.value().dim(1), n = b.value().dim(1);
  assert(b.value().dim(0) == k);
  Tensor<S> out({m, n});
  out.asMatrix(m, n).noalias() = a.value().asMatrix(m, k) * b.value().asMatrix(k, n);
  return Var<S>(detail::makeNode<S>(std::move(out), {a, b}, [m, k, n](Node<S>& nd) {
    auto& pa = *nd.parents[0];
    auto& pb = *nd.parents[1];
    auto g = nd.grad.asMatrix(m, n);
    if (pa.requires_grad) {
      pa.ensureGrad();
      pa.grad.asMatrix(m, k).noalias() += g * pb.value.asMatrix(k, n).transpose();
    }
    if (pb.requires_grad) {
      pb.ensureGrad();
      pb.grad.asMatrix(k, n).noalias() += pa.value.asMatrix(m, k).transpose() * g;
    }
  }));
}

/// Add a row vector [C] to every row of [R, C] (bias broadcast).
template <typename S>
Var<S> addRowVector(const Var<S>& a, const Var<S>& v) {
  const int R = a.value().dim(0), C = a.value().dim(1);
  assert(v.value().numel() == C);
  Tensor<S> out = a.value();
  for (int r = 0; r < R; ++r)
    for (int c = 0; c < C; ++c) out.at(r, c) += v.value()[c];
  return Var<S>(detail::makeNode<S>(std::move(out), {a, v}, [R, C](Node<S>& n) {
    detail::accumulate(*n.parents[0], n.grad);
    auto& pv = *n.parents[1];
    if (pv.requires_grad) {
      pv.ensureGrad();
      for (int r = 0; r < R; ++r)
        for (int c = 0; c < C; ++c) pv.grad[c] += n.grad.at(r, c);
    }
  }));
}

// ---------------------------------------------------------------------------
// Row-wise softmax utilities
// ---------------------------------------------------------------------------

/// Numerically stable log-softmax over rows of [R, C].
template <typename S>
Var<S> logSoftmaxRows(const Var<S>& a) {
  const int R = a.value().dim(0), C = a.value().dim(1);
  Tensor<S> out({R, C});
  for (int r = 0; r < R; ++r) {
    S mx = a.value().at(r, 0);
    for (int c = 1; c < C; ++c) mx = std::max(mx, a.value().at(r, c));
    S lse = S(0);
    for (int c = 0; c < C; ++c) lse += std::exp(a.value().at(r, c) - mx);
    lse = std::log(lse) + mx;
    for (int c = 0; c < C; ++c) out.at(r, c) = a.value().at(r, c) - lse;
  }
  return Var<S>(detail::makeNode<S>(std::move(out), {a}, [R, C](Node<S>& n) {
    auto& p = *n.parents[0];
    if (!p.requires_grad) return;
    p.ensureGrad();
    for (int r = 0; r < R; ++r) {
      S gsum = S(0);
      for (int c = 0; c < C; ++c) gsum += n.grad.at(r, c);
      for (int c = 0; c < C; ++c)
        p.grad.at(r, c) += n.grad.at(r, c) - std::exp(n.value.at(r, c)) * gsum;
    }
  }));
}

template <typename S>
Var<S> softmaxRows(const Var<S>& a) {
  return expv(logSoftmaxRows(a));
}

/// Select a subset of rows: [R, C], idx -> [|idx|, C].
template <typename S>
Var<S> gatherRows(const Var<S>& a, std::vector<int> idx) {
  const int C = a.value().dim(1);
  const int M = static_cast<int>(idx.size());
  Tensor<S> out({M, C});
  for (int m = 0; m < M; ++m)
    for (int c = 0; c < C; ++c) out.at(m, c) = a.value().at(idx[m], c);
  return Var<S>(detail::makeNode<S>(std::move(out), {a}, [idx, M, C](Node<S>& n) {
    auto& p = *n.parents[0];
    if (!p.requires_grad) return;
    p.ensureGrad();
    for (int m = 0; m < M; ++m)
      for (int c = 0; c < C; ++c) p.grad.at(idx[m], c) += n.grad.at(m, c);
  }));
}

/// Pick one column per row: [R, C], idx[R] -> [R].
template <typename S>
Var<S> gatherCols(const Var<S>& a, std::vector<int> idx) {
  const int R = a.value().dim(0);
  assert(static_cast<int>(idx.size()) == R);
  Tensor<S> out({R});
  for (int r = 0; r < R; ++r) out[r] = a.value().at(r, idx[r]);
  return Var<S>(detail::makeNode<S>(std::move(out), {a}, [idx, R](Node<S>& n) {
    auto& p = *n.parents[0];
    if (!p.requires_grad) return;
    p.ensureGrad();
    for (int r = 0; r < R; ++r) p.grad.at(r, idx[r]) += n.grad[r];
  }));
}

/// Row-wise min with subgradient through the argmin entry; ties break to the
/// lowest column index. Returns the selected values [R]; argmin written to
/// *argmin_out if given.
template <typename S>
Var<S> minSelectRows(const Var<S>& a, std::vector<int>* argmin_out = nullptr) {
  const int R = a.value().dim(0), C = a.value().dim(1);
  std::vector<int> arg(R, 0);
  Tensor<S> out({R});
  for (int r = 0; r < R; ++r) {
    int best = 0;
    for (int c = 1; c < C; ++c)
      if (a.value().at(r, c) < a.value().at(r, best)) best = c;
    arg[r] = best;
    out[r] = a.value().at(r, best);
  }
  if (argmin_out) *argmin_out = arg;
  return Var<S>(detail::makeNode<S>(std::move(out), {a}, [arg, R](Node<S>& n) {
    auto& p = *n.parents[0];
    if (!p.requires_grad) return;
    p.ensureGrad();
    for (int r = 0; r < R; ++r) p.grad.at(r, arg[r]) += n.grad[r];
  }));
}

// ---------------------------------------------------------------------------
// Segment / scatter / sampling ops for the pillar pipeline
// ---------------------------------------------------------------------------

/// Per-segment max over rows. x is [N, F], segment ids are sorted,
/// contiguous 0..M-1. Output [M, F]; subgradient to the first argmax row.
template <typename S>
Var<S> segmentMax(const Var<S>& x, const std::vector<int>& seg, int M) {
  const int N = x.value().dim(0), F = x.value().dim(1);
  assert(static_cast<int>(seg.size()) == N);
  Tensor<S> out({M, F});
  std::vector<int> argrow(static_cast<std::size_t>(M) * F, -1);
  for (int i = 0; i < N; ++i) {
    const int m = seg[i];
    for (int f = 0; f < F; ++f) {
      auto& slot = argrow[static_cast<std::size_t>(m) * F + f];
      const S v = x.value().at(i, f);
      if (slot < 0 || v > out.at(m, f)) {
        out.at(m, f) = v;
        slot = i;
      }
    }
  }
  return Var<S>(detail::makeNode<S>(std::move(out), {x}, [argrow, M, F](Node<S>& n) {
    auto& p = *n.parents[0];
    if (!p.requires_grad) return;
    p.ensureGrad();
    for (int m = 0; m < M; ++m)
      for (int f = 0; f < F; ++f) {
        const int i = argrow[static_cast<std::size_t>(m) * F + f];
        if (i >= 0) p.grad.at(i, f) += n.grad.at(m, f);
      }
  }));
}

/// Scatter per-pillar features [M, F] into a dense grid [F, H, W] at
/// (row, col) cells; cells not covered stay zero. Cell indices are unique.
template <typename S>
Var<S> scatterToGrid(const Var<S>& x, const std::vector<int>& rows,
                     const std::vector<int>& cols, int H, int W) {
  const int M = x.value().dim(0), F = x.value().dim(1);
  Tensor<S> out({F, H, W});
  for (int m = 0; m < M; ++m)
    for (int f = 0; f < F; ++f) out.at(f, rows[m], cols[m]) = x.value().at(m, f);
  return Var<S>(detail::makeNode<S>(std::move(out), {x}, [rows, cols, M, F](Node<S>& n) {
    auto& p = *n.parents[0];
    if (!p.requires_grad) return;
    p.ensureGrad();
    for (int m = 0; m < M; ++m)
      for (int f = 0; f < F; ++f) p.grad.at(m, f) += n.grad.at(f, rows[m], cols[m]);
  }));
}

/// Bilinear sampling of a [C, H, W] grid at continuous (col, row) points,
/// zero padding outside. Points are fixed (no gradient to coordinates);
/// gradients flow to the grid. Output [C, P].
template <typename S>
Var<S> bilinearSample(const Var<S>& f, const std::vector<std::pair<S, S>>& pts) {
  const int C = f.value().dim(0), H = f.value().dim(1), W = f.value().dim(2);
  const int P = static_cast<int>(pts.size());
  Tensor<S> out({C, P});
  struct Tap {
    int idx[4];
    S w[4];
  };
  std::vector<Tap> taps(P);
  for (int p = 0; p < P; ++p) {
    const S cx = pts[p].first, cy = pts[p].second;
    const int x0 = static_cast<int>(std::floor(cx)), y0 = static_cast<int>(std::floor(cy));
    const S fx = cx - static_cast<S>(x0), fy = cy - static_cast<S>(y0);
    const S ws[4] = {(S(1) - fx) * (S(1) - fy), fx * (S(1) - fy), (S(1) - fx) * fy, fx * fy};
    const int xs[4] = {x0, x0 + 1, x0, x0 + 1};
    const int ys[4] = {y0, y0, y0 + 1, y0 + 1};
    Tap t;
    for (int k = 0; k < 4; ++k) {
      const bool in = xs[k] >= 0 && xs[k] < W && ys[k] >= 0 && ys[k] < H;
      t.idx[k] = in ? (ys[k] * W + xs[k]) : -1;
      t.w[k] = ws[k];
    }
    taps[p] = t;
    for (int c = 0; c < C; ++c) {
      const S* plane = f.value().data() + static_cast<std::int64_t>(c) * H * W;
      S v = S(0);
      for (int k = 0; k < 4; ++k)
        if (t.idx[k] >= 0) v += t.w[k] * plane[t.idx[k]];
      out.at(c, p) = v;
    }
  }
  return Var<S>(detail::makeNode<S>(std::move(out), {f}, [taps, C, H, W, P](Node<S>& n) {
    auto& pf = *n.parents[0];
    if (!pf.requires_grad) return;
    pf.ensureGrad();
    for (int p = 0; p < P; ++p) {
      const auto& t = taps[p];
      for (int c = 0; c < C; ++c) {
        S* gplane = pf.grad.data() + static_cast<std::int64_t>(c) * H * W;
        const S g = n.grad.at(c, p);
        for (int k = 0; k < 4; ++k)
          if (t.idx[k] >= 0) gplane[t.idx[k]] += t.w[k] * g;
      }
    }
  }));
}

}  // namespace bevdrive::ad
