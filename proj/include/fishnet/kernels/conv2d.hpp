#pragma once

#include <Eigen/Core>

#include "fishnet/tensor.hpp"

namespace fish::ops {

struct ConvAttrs {
  int64_t stride = 1;
  int64_t padding = 0;
  int64_t dilation = 1;
  int64_t groups = 1;
};

inline int64_t conv_out_dim(int64_t in, int64_t k, int64_t stride, int64_t padding,
                            int64_t dilation) {
  return (in + 2 * padding - dilation * (k - 1) - 1) / stride + 1;
}

template <typename S>
using RowMat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using MapRowMat = Eigen::Map<RowMat<S>>;
template <typename S>
using ConstMapRowMat = Eigen::Map<const RowMat<S>>;

namespace detail {

// Expand one sample's group slice into a (C*kh*kw) x (Ho*Wo) patch matrix.
template <typename S>
void im2col(const S* x, int64_t C, int64_t H, int64_t W, int64_t kh, int64_t kw,
            int64_t stride, int64_t pad, int64_t dil, int64_t Ho, int64_t Wo, S* col) {
  const int64_t ocols = Ho * Wo;
  for (int64_t c = 0; c < C; ++c) {
    for (int64_t ki = 0; ki < kh; ++ki) {
      for (int64_t kj = 0; kj < kw; ++kj) {
        S* row = col + ((c * kh + ki) * kw + kj) * ocols;
        for (int64_t oh = 0; oh < Ho; ++oh) {
          const int64_t ih = oh * stride - pad + ki * dil;
          if (ih < 0 || ih >= H) {
            for (int64_t ow = 0; ow < Wo; ++ow) row[oh * Wo + ow] = S(0);
            continue;
          }
          const S* src = x + (c * H + ih) * W;
          for (int64_t ow = 0; ow < Wo; ++ow) {
            const int64_t iw = ow * stride - pad + kj * dil;
            row[oh * Wo + ow] = (iw >= 0 && iw < W) ? src[iw] : S(0);
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatter-add patch gradients back onto the input slice.
template <typename S>
void col2im_add(const S* col, int64_t C, int64_t H, int64_t W, int64_t kh, int64_t kw,
                int64_t stride, int64_t pad, int64_t dil, int64_t Ho, int64_t Wo, S* gx) {
  const int64_t ocols = Ho * Wo;
  for (int64_t c = 0; c < C; ++c) {
    for (int64_t ki = 0; ki < kh; ++ki) {
      for (int64_t kj = 0; kj < kw; ++kj) {
        const S* row = col + ((c * kh + ki) * kw + kj) * ocols;
        for (int64_t oh = 0; oh < Ho; ++oh) {
          const int64_t ih = oh * stride - pad + ki * dil;
          if (ih < 0 || ih >= H) continue;
          S* dst = gx + (c * H + ih) * W;
          for (int64_t ow = 0; ow < Wo; ++ow) {
            const int64_t iw = ow * stride - pad + kj * dil;
            if (iw >= 0 && iw < W) dst[iw] += row[oh * Wo + ow];
          }
        }
      }
    }
  }
}

}  // namespace detail

// x: (N, Cin, H, W), w: (Cout, Cin/groups, kh, kw) -> out: (N, Cout, Ho, Wo).
// No bias term; out must be preallocated with the correct shape.
template <typename S>
void conv2d_forward(const Tensor<S>& x, const Tensor<S>& w, const ConvAttrs& a,
                    Tensor<S>& out) {
  const int64_t N = x.dim(0), Cin = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int64_t Cout = w.dim(0), Cg = w.dim(1), kh = w.dim(2), kw = w.dim(3);
  const int64_t Ho = out.dim(2), Wo = out.dim(3);
  const int64_t G = a.groups;
  const int64_t cg_in = Cin / G, cg_out = Cout / G;
  const int64_t krows = Cg * kh * kw;
  const int64_t ocols = Ho * Wo;

  RowMat<S> col(krows, ocols);
  for (int64_t n = 0; n < N; ++n) {
    for (int64_t g = 0; g < G; ++g) {
      const S* xg = x.values().data() + (n * Cin + g * cg_in) * H * W;
      detail::im2col(xg, cg_in, H, W, kh, kw, a.stride, a.padding, a.dilation, Ho, Wo,
                     col.data());
      ConstMapRowMat<S> wm(w.values().data() + g * cg_out * krows, cg_out, krows);
      MapRowMat<S> om(out.values().data() + (n * Cout + g * cg_out) * ocols, cg_out, ocols);
      om.noalias() = wm * col;
    }
  }
}

template <typename S>
void conv2d_backward(const Tensor<S>& x, const Tensor<S>& w, const ConvAttrs& a,
                     const Tensor<S>& out, ArrayX<S>* gx, ArrayX<S>* gw) {
  const int64_t N = x.dim(0), Cin = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int64_t Cout = w.dim(0), Cg = w.dim(1), kh = w.dim(2), kw = w.dim(3);
  const int64_t Ho = out.dim(2), Wo = out.dim(3);
  const int64_t G = a.groups;
  const int64_t cg_in = Cin / G, cg_out = Cout / G;
  const int64_t krows = Cg * kh * kw;
  const int64_t ocols = Ho * Wo;

  RowMat<S> col(krows, ocols);
  RowMat<S> gcol(krows, ocols);
  for (int64_t n = 0; n < N; ++n) {
    for (int64_t g = 0; g < G; ++g) {
      const S* xg = x.values().data() + (n * Cin + g * cg_in) * H * W;
      detail::im2col(xg, cg_in, H, W, kh, kw, a.stride, a.padding, a.dilation, Ho, Wo,
                     col.data());
      ConstMapRowMat<S> wm(w.values().data() + g * cg_out * krows, cg_out, krows);
      ConstMapRowMat<S> gom(out.grad().data() + (n * Cout + g * cg_out) * ocols, cg_out,
                            ocols);
      if (gw) {
        MapRowMat<S> gwm(gw->data() + g * cg_out * krows, cg_out, krows);
        gwm.noalias() += gom * col.transpose();
      }
      if (gx) {
        gcol.noalias() = wm.transpose() * gom;
        S* gxg = gx->data() + (n * Cin + g * cg_in) * H * W;
        detail::col2im_add(gcol.data(), cg_in, H, W, kh, kw, a.stride, a.padding,
                           a.dilation, Ho, Wo, gxg);
      }
    }
  }
}

}  // namespace fish::ops
