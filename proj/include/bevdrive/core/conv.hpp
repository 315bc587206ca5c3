#pragma once

#include "bevdrive/core/autodiff.hpp"

namespace bevdrive::ad {

namespace detail {

/// im2col for a single [C, H, W] image: output [C*kh*kw, Ho*Wo], zero padded.
template <typename S>
void im2col(const S* img, int C, int H, int W, int kh, int kw, int stride, int pad,
            int Ho, int Wo, S* col) {
  for (int c = 0; c < C; ++c) {
    for (int ky = 0; ky < kh; ++ky) {
      for (int kx = 0; kx < kw; ++kx) {
        S* dst = col + (static_cast<std::int64_t>(c) * kh * kw + ky * kw + kx) *
                           (static_cast<std::int64_t>(Ho) * Wo);
        for (int oy = 0; oy < Ho; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= H) {
            std::fill(dst, dst + Wo, S(0));
            dst += Wo;
            continue;
          }
          const S* src = img + (static_cast<std::int64_t>(c) * H + iy) * W;
          for (int ox = 0; ox < Wo; ++ox) {
            const int ix = ox * stride - pad + kx;
            *dst++ = (ix >= 0 && ix < W) ? src[ix] : S(0);
          }
        }
      }
    }
  }
}

/// Transpose of im2col: accumulate [C*kh*kw, Ho*Wo] columns back into [C, H, W].
template <typename S>
void col2im(const S* col, int C, int H, int W, int kh, int kw, int stride, int pad,
            int Ho, int Wo, S* img) {
  for (int c = 0; c < C; ++c) {
    for (int ky = 0; ky < kh; ++ky) {
      for (int kx = 0; kx < kw; ++kx) {
        const S* src = col + (static_cast<std::int64_t>(c) * kh * kw + ky * kw + kx) *
                                 (static_cast<std::int64_t>(Ho) * Wo);
        for (int oy = 0; oy < Ho; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= H) {
            src += Wo;
            continue;
          }
          S* dst = img + (static_cast<std::int64_t>(c) * H + iy) * W;
          for (int ox = 0; ox < Wo; ++ox) {
            const int ix = ox * stride - pad + kx;
            if (ix >= 0 && ix < W) dst[ix] += src[ox];
          }
          src += Wo;
        }
      }
    }
  }
}

inline int convOutDim(int in, int k, int stride, int pad) {
  return (in + 2 * pad - k) / stride + 1;
}

}  // namespace detail

/// 2D convolution. x: [B, C, H, W], w: [F, C, kh, kw], b: [F] (optional, may be
/// undefined Var). Output [B, F, Ho, Wo].
template <typename S>
Var<S> conv2d(const Var<S>& x, const Var<S>& w, const Var<S>& b, int stride, int pad) {
  const auto& xs = x.value().shape();
  const auto& ws = w.value().shape();
  const int B = xs[0], C = xs[1], H = xs[2], W = xs[3];
  const int F = ws[0], kh = ws[2], kw = ws[3];
  assert(ws[1] == C);
  const int Ho = detail::convOutDim(H, kh, stride, pad);
  const int Wo = detail::convOutDim(W, kw, stride, pad);
  const std::int64_t K = static_cast<std::int64_t>(C) * kh * kw;
  const std::int64_t L = static_cast<std::int64_t>(Ho) * Wo;

  Tensor<S> out({B, F, Ho, Wo});
  Tensor<S> col({static_cast<int>(K), static_cast<int>(L)});
  auto wmat = w.value().asMatrix(F, static_cast<int>(K));
  for (int bi = 0; bi < B; ++bi) {
    detail::im2col(x.value().data() + static_cast<std::int64_t>(bi) * C * H * W, C, H, W,
                   kh, kw, stride, pad, Ho, Wo, col.data());
    typename Tensor<S>::MatrixMap om(out.data() + static_cast<std::int64_t>(bi) * F * L, F,
                                     static_cast<int>(L));
    om.noalias() = wmat * col.asMatrix(static_cast<int>(K), static_cast<int>(L));
  }
  if (b.defined()) {
    for (int bi = 0; bi < B; ++bi)
      for (int f = 0; f < F; ++f) {
        S* p = out.data() + ((static_cast<std::int64_t>(bi) * F + f) * L);
        const S bv = b.value()[f];
        for (std::int64_t i = 0; i < L; ++i) p[i] += bv;
      }
  }

  std::vector<Var<S>> parents = b.defined() ? std::vector<Var<S>>{x, w, b}
                                            : std::vector<Var<S>>{x, w};
  auto meta = [=](Node<S>& n) {
    auto& px = *n.parents[0];
    auto& pw = *n.parents[1];
    Tensor<S> col({static_cast<int>(K), static_cast<int>(L)});
    for (int bi = 0; bi < B; ++bi) {
      typename Tensor<S>::ConstMatrixMap gm(
          n.grad.data() + static_cast<std::int64_t>(bi) * F * L, F, static_cast<int>(L));
      if (pw.requires_grad) {
        pw.ensureGrad();
        detail::im2col(px.value.data() + static_cast<std::int64_t>(bi) * C * H * W, C, H,
                       W, kh, kw, stride, pad, Ho, Wo, col.data());
        pw.grad.asMatrix(F, static_cast<int>(K)).noalias() +=
            gm * col.asMatrix(static_cast<int>(K), static_cast<int>(L)).transpose();
      }
      if (px.requires_grad) {
        px.ensureGrad();
        col.asMatrix(static_cast<int>(K), static_cast<int>(L)).noalias() =
            pw.value.asMatrix(F, static_cast<int>(K)).transpose() * gm;
        detail::col2im(col.data(), C, H, W, kh, kw, stride, pad, Ho, Wo,
                       px.grad.data() + static_cast<std::int64_t>(bi) * C * H * W);
      }
    }
    if (n.parents.size() > 2 && n.parents[2]->requires_grad) {
      auto& pb = *n.parents[2];
      pb.ensureGrad();
      for (int bi = 0; bi < B; ++bi)
        for (int f = 0; f < F; ++f) {
          const S* g = n.grad.data() + (static_cast<std::int64_t>(bi) * F + f) * L;
          S s = S(0);
          for (std::int64_t i = 0; i < L; ++i) s += g[i];
          pb.grad[f] += s;
        }
    }
  };
  return Var<S>(detail::makeNode<S>(std::move(out), parents, meta));
}

/// Transposed 2D convolution (stride-s upsampling). x: [B, C, H, W],
/// w: [C, F, kh, kw], b: [F]. Output [B, F, Ho, Wo] with
/// Ho = (H-1)*stride - 2*pad + kh + out_pad.
template <typename S>
Var<S> convTranspose2d(const Var<S>& x, const Var<S>& w, const Var<S>& b, int stride,
                       int pad, int out_pad) {
  const auto& xs = x.value().shape();
  const auto& ws = w.value().shape();
  const int B = xs[0], C = xs[1], H = xs[2], W = xs[3];
  const int F = ws[1], kh = ws[2], kw = ws[3];
  assert(ws[0] == C);
  const int Ho = (H - 1) * stride - 2 * pad + kh + out_pad;
  const int Wo = (W - 1) * stride - 2 * pad + kw + out_pad;
  const std::int64_t K = static_cast<std::int64_t>(F) * kh * kw;
  const std::int64_t L = static_cast<std::int64_t>(H) * W;

  // Forward of convT == data-backward of a conv mapping [F,Ho,Wo] -> [C,H,W].
  Tensor<S> out({B, F, Ho, Wo});
  Tensor<S> col({static_cast<int>(K), static_cast<int>(L)});
  for (int bi = 0; bi < B; ++bi) {
    typename Tensor<S>::ConstMatrixMap xm(
        x.value().data() + static_cast<std::int64_t>(bi) * C * L, C, static_cast<int>(L));
    col.asMatrix(static_cast<int>(K), static_cast<int>(L)).noalias() =
        w.value().asMatrix(C, static_cast<int>(K)).transpose() * xm;
    detail::col2im(col.data(), F, Ho, Wo, kh, kw, stride, pad, H, W,
                   out.data() + static_cast<std::int64_t>(bi) * F * Ho * Wo);
  }
  if (b.defined()) {
    const std::int64_t Lo = static_cast<std::int64_t>(Ho) * Wo;
    for (int bi = 0; bi < B; ++bi)
      for (int f = 0; f < F; ++f) {
        S* p = out.data() + (static_cast<std::int64_t>(bi) * F + f) * Lo;
        const S bv = b.value()[f];
        for (std::int64_t i = 0; i < Lo; ++i) p[i] += bv;
      }
  }

  std::vector<Var<S>> parents = b.defined() ? std::vector<Var<S>>{x, w, b}
                                            : std::vector<Var<S>>{x, w};
  auto meta = [=](Node<S>& n) {
    auto& px = *n.parents[0];
    auto& pw = *n.parents[1];
    Tensor<S> col({static_cast<int>(K), static_cast<int>(L)});
    for (int bi = 0; bi < B; ++bi) {
      // dY viewed through im2col of the equivalent forward conv.
      detail::im2col(n.grad.data() + static_cast<std::int64_t>(bi) * F * Ho * Wo, F, Ho,
                     Wo, kh, kw, stride, pad, H, W, col.data());
      if (px.requires_grad) {
        px.ensureGrad();
        typename Tensor<S>::MatrixMap gx(
            px.grad.data() + static_cast<std::int64_t>(bi) * C * L, C,
            static_cast<int>(L));
        gx.noalias() += w.value().asMatrix(C, static_cast<int>(K)) *
                        col.asMatrix(static_cast<int>(K), static_cast<int>(L));
      }
      if (pw.requires_grad) {
        pw.ensureGrad();
        typename Tensor<S>::ConstMatrixMap xm(
            px.value.data() + static_cast<std::int64_t>(bi) * C * L, C,
            static_cast<int>(L));
        pw.grad.asMatrix(C, static_cast<int>(K)).noalias() +=
            xm * col.asMatrix(static_cast<int>(K), static_cast<int>(L)).transpose();
      }
    }
    if (n.parents.size() > 2 && n.parents[2]->requires_grad) {
      auto& pb = *n.parents[2];
      pb.ensureGrad();
      const std::int64_t Lo = static_cast<std::int64_t>(Ho) * Wo;
      for (int bi = 0; bi < B; ++bi)
        for (int f = 0; f < F; ++f) {
          const S* g = n.grad.data() + (static_cast<std::int64_t>(bi) * F + f) * Lo;
          S s = S(0);
          for (std::int64_t i = 0; i < Lo; ++i) s += g[i];
          pb.grad[f] += s;
        }
    }
  };
  return Var<S>(detail::makeNode<S>(std::move(out), parents, meta));
}

}  // namespace bevdrive::ad
