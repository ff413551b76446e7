#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "fishnet/tensor.hpp"

// Forward/backward kernels for every non-conv operation. All of them are
// plain loops over NCHW storage; shapes are validated by the graph layer.
namespace fish::ops {

inline int64_t pool_out_dim(int64_t in, int64_t kernel, int64_t stride, int64_t pad) {
  return (in + 2 * pad - kernel) / stride + 1;
}

// Max pooling. Ties go to the first element in row-major window scan, which
// makes the backward routing bit-deterministic. Padded positions never win.
template <typename S>
void maxpool_forward(const Tensor<S>& x, int64_t kernel, int64_t stride, int64_t pad,
                     Tensor<S>& out, std::vector<int64_t>& argmax) {
  const int64_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int64_t Ho = out.dim(2), Wo = out.dim(3);
  argmax.assign(static_cast<size_t>(out.numel()), -1);
  int64_t o = 0;
  for (int64_t n = 0; n < N; ++n)
    for (int64_t c = 0; c < C; ++c)
      for (int64_t oh = 0; oh < Ho; ++oh)
        for (int64_t ow = 0; ow < Wo; ++ow, ++o) {
          S best = -std::numeric_limits<S>::infinity();
          int64_t best_idx = -1;
          for (int64_t ki = 0; ki < kernel; ++ki) {
            const int64_t ih = oh * stride - pad + ki;
            if (ih < 0 || ih >= H) continue;
            for (int64_t kj = 0; kj < kernel; ++kj) {
              const int64_t iw = ow * stride - pad + kj;
              if (iw < 0 || iw >= W) continue;
              const int64_t idx = x.offset(n, c, ih, iw);
              const S v = x.values()[idx];
              if (v > best || best_idx < 0) {
                best = v;
                best_idx = idx;
              }
            }
          }
          out.values()[o] = best;
          argmax[static_cast<size_t>(o)] = best_idx;
        }
}

template <typename S>
void maxpool_backward(const ArrayX<S>& gout, const std::vector<int64_t>& argmax,
                      ArrayX<S>& gx) {
  for (int64_t o = 0; o < gout.size(); ++o) gx[argmax[static_cast<size_t>(o)]] += gout[o];
}

// 2x2/stride-2 average pooling; gradient spreads 1/4 per window element.
template <typename S>
void avgpool_forward(const Tensor<S>& x, Tensor<S>& out) {
  const int64_t N = x.dim(0), C = x.dim(1), W = x.dim(3);
  const int64_t Ho = out.dim(2), Wo = out.dim(3);
  int64_t o = 0;
  for (int64_t n = 0; n < N; ++n)
    for (int64_t c = 0; c < C; ++c)
      for (int64_t oh = 0; oh < Ho; ++oh)
        for (int64_t ow = 0; ow < Wo; ++ow, ++o) {
          const int64_t base = x.offset(n, c, 2 * oh, 2 * ow);
          out.values()[o] =
              (x.values()[base] + x.values()[base + 1] + x.values()[base + W] +
               x.values()[base + W + 1]) /
              S(4);
        }
}

template <typename S>
void avgpool_backward(const Tensor<S>& x, const Tensor<S>& out, ArrayX<S>& gx) {
  const int64_t N = x.dim(0), C = x.dim(1), W = x.dim(3);
  const int64_t Ho = out.dim(2), Wo = out.dim(3);
  int64_t o = 0;
  for (int64_t n = 0; n < N; ++n)
    for (int64_t c = 0; c < C; ++c)
      for (int64_t oh = 0; oh < Ho; ++oh)
        for (int64_t ow = 0; ow < Wo; ++ow, ++o) {
          const S g = out.grad()[o] / S(4);
          const int64_t base = x.offset(n, c, 2 * oh, 2 * ow);
          gx[base] += g;
          gx[base + 1] += g;
          gx[base + W] += g;
          gx[base + W + 1] += g;
        }
}

// Nearest-neighbor x2 up-sampling: each source pixel fills a 2x2 block.
template <typename S>
void upsample_forward(const Tensor<S>& x, Tensor<S>& out) {
  const int64_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  for (int64_t n = 0; n < N; ++n)
    for (int64_t c = 0; c < C; ++c)
      for (int64_t h = 0; h < H; ++h)
        for (int64_t w = 0; w < W; ++w) {
          const S v = x.at(n, c, h, w);
          out.at(n, c, 2 * h, 2 * w) = v;
          out.at(n, c, 2 * h, 2 * w + 1) = v;
          out.at(n, c, 2 * h + 1, 2 * w) = v;
          out.at(n, c, 2 * h + 1, 2 * w + 1) = v;
        }
}

template <typename S>
void upsample_backward(const Tensor<S>& x, const Tensor<S>& out, ArrayX<S>& gx) {
  const int64_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  for (int64_t n = 0; n < N; ++n)
    for (int64_t c = 0; c < C; ++c)
      for (int64_t h = 0; h < H; ++h)
        for (int64_t w = 0; w < W; ++w) {
          gx[x.offset(n, c, h, w)] += out.grad()[out.offset(n, c, 2 * h, 2 * w)] +
                                      out.grad()[out.offset(n, c, 2 * h, 2 * w + 1)] +
                                      out.grad()[out.offset(n, c, 2 * h + 1, 2 * w)] +
                                      out.grad()[out.offset(n, c, 2 * h + 1, 2 * w + 1)];
        }
}

// Channel concatenation. `offsets[i]` is the first output channel of input i.
template <typename S>
void concat_forward(const std::vector<const Tensor<S>*>& xs, Tensor<S>& out) {
  const int64_t N = out.dim(0), HW = out.dim(2) * out.dim(3);
  int64_t coff = 0;
  for (const Tensor<S>* x : xs) {
    const int64_t C = x->dim(1);
    for (int64_t n = 0; n < N; ++n)
      for (int64_t c = 0; c < C; ++c) {
        const S* src = x->values().data() + (n * C + c) * HW;
        S* dst = out.values().data() + (n * out.dim(1) + coff + c) * HW;
        for (int64_t i = 0; i < HW; ++i) dst[i] = src[i];
      }
    coff += C;
  }
}

template <typename S>
void concat_backward_one(const Tensor<S>& out, int64_t coff, int64_t C, ArrayX<S>& gx) {
  const int64_t N = out.dim(0), HW = out.dim(2) * out.dim(3);
  for (int64_t n = 0; n < N; ++n)
    for (int64_t c = 0; c < C; ++c) {
      const S* src = out.grad().data() + (n * out.dim(1) + coff + c) * HW;
      S* dst = gx.data() + (n * C + c) * HW;
      for (int64_t i = 0; i < HW; ++i) dst[i] += src[i];
    }
}

// Element-wise summation of each group of k adjacent channels into one
// output channel: out[:, m] = sum_{j in [0,k)} x[:, k*m + j].
template <typename S>
void channel_reduce_forward(const Tensor<S>& x, int64_t k, Tensor<S>& out) {
  const int64_t N = x.dim(0), Cout = out.dim(1), HW = x.dim(2) * x.dim(3);
  for (int64_t n = 0; n < N; ++n)
    for (int64_t m = 0; m < Cout; ++m) {
      S* dst = out.values().data() + (n * Cout + m) * HW;
      for (int64_t i = 0; i < HW; ++i) dst[i] = S(0);
      for (int64_t j = 0; j < k; ++j) {
        const S* src = x.values().data() + (n * x.dim(1) + k * m + j) * HW;
        for (int64_t i = 0; i < HW; ++i) dst[i] += src[i];
      }
    }
}

template <typename S>
void channel_reduce_backward(const Tensor<S>& x, int64_t k, const Tensor<S>& out,
                             ArrayX<S>& gx) {
  const int64_t N = x.dim(0), Cout = out.dim(1), HW = x.dim(2) * x.dim(3);
  for (int64_t n = 0; n < N; ++n)
    for (int64_t m = 0; m < Cout; ++m) {
      const S* src = out.grad().data() + (n * Cout + m) * HW;
      for (int64_t j = 0; j < k; ++j) {
        S* dst = gx.data() + (n * x.dim(1) + k * m + j) * HW;
        for (int64_t i = 0; i < HW; ++i) dst[i] += src[i];
      }
    }
}

// Batch normalization over N,H,W per channel. Biased batch variance is used
// both for normalization and for the running-stat update.
template <typename S>
struct BnScratch {
  ArrayX<S> xhat;
  ArrayX<S> invstd;  // per channel
};

template <typename S>
void batchnorm_forward(const Tensor<S>& x, const Tensor<S>& gamma, const Tensor<S>& beta,
                       Tensor<S>& rmean, Tensor<S>& rvar, bool train, S eps, S momentum,
                       Tensor<S>& out, BnScratch<S>& scratch) {
  const int64_t N = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3);
  const int64_t cnt = N * HW;
  scratch.xhat.resize(x.numel());
  scratch.invstd.resize(C);
  for (int64_t c = 0; c < C; ++c) {
    S mean, var;
    if (train) {
      S sum = S(0), sq = S(0);
      for (int64_t n = 0; n < N; ++n) {
        const S* src = x.values().data() + (n * C + c) * HW;
        for (int64_t i = 0; i < HW; ++i) {
          sum += src[i];
          sq += src[i] * src[i];
        }
      }
      mean = sum / S(cnt);
      var = sq / S(cnt) - mean * mean;
      if (var < S(0)) var = S(0);
      rmean.values()[c] = (S(1) - momentum) * rmean.values()[c] + momentum * mean;
      rvar.values()[c] = (S(1) - momentum) * rvar.values()[c] + momentum * var;
    } else {
      mean = rmean.values()[c];
      var = rvar.values()[c];
    }
    const S invstd = S(1) / std::sqrt(var + eps);
    scratch.invstd[c] = invstd;
    const S g = gamma.values()[c], b = beta.values()[c];
    for (int64_t n = 0; n < N; ++n) {
      const int64_t base = (n * C + c) * HW;
      for (int64_t i = 0; i < HW; ++i) {
        const S xh = (x.values()[base + i] - mean) * invstd;
        scratch.xhat[base + i] = xh;
        out.values()[base + i] = g * xh + b;
      }
    }
  }
}

// Train-mode backward flows through the batch statistics; eval mode treats
// the running stats as constants.
template <typename S>
void batchnorm_backward(const Tensor<S>& x, const Tensor<S>& gamma, bool train,
                        const Tensor<S>& out, const BnScratch<S>& scratch, ArrayX<S>* gx,
                        ArrayX<S>* ggamma, ArrayX<S>* gbeta) {
  const int64_t N = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3);
  const int64_t cnt = N * HW;
  for (int64_t c = 0; c < C; ++c) {
    S gsum = S(0), gxhat = S(0);
    for (int64_t n = 0; n < N; ++n) {
      const int64_t base = (n * C + c) * HW;
      for (int64_t i = 0; i < HW; ++i) {
        const S g = out.grad()[base + i];
        gsum += g;
        gxhat += g * scratch.xhat[base + i];
      }
    }
    if (ggamma) (*ggamma)[c] += gxhat;
    if (gbeta) (*gbeta)[c] += gsum;
    if (!gx) continue;
    const S scale = gamma.values()[c] * scratch.invstd[c];
    if (train) {
      const S mg = gsum / S(cnt), mgx = gxhat / S(cnt);
      for (int64_t n = 0; n < N; ++n) {
        const int64_t base = (n * C + c) * HW;
        for (int64_t i = 0; i < HW; ++i)
          (*gx)[base + i] +=
              scale * (out.grad()[base + i] - mg - scratch.xhat[base + i] * mgx);
      }
    } else {
      for (int64_t n = 0; n < N; ++n) {
        const int64_t base = (n * C + c) * HW;
        for (int64_t i = 0; i < HW; ++i) (*gx)[base + i] += scale * out.grad()[base + i];
      }
    }
  }
}

// x: (N, In) row-major, w: (Out, In) -> out: (N, Out). No bias.
template <typename S>
void linear_forward(const Tensor<S>& x, const Tensor<S>& w, Tensor<S>& out) {
  ConstMapRowMat<S> xm(x.values().data(), x.dim(0), x.dim(1));
  ConstMapRowMat<S> wm(w.values().data(), w.dim(0), w.dim(1));
  MapRowMat<S> om(out.values().data(), out.dim(0), out.dim(1));
  om.noalias() = xm * wm.transpose();
}

template <typename S>
void linear_backward(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>& out,
                     ArrayX<S>* gx, ArrayX<S>* gw) {
  ConstMapRowMat<S> xm(x.values().data(), x.dim(0), x.dim(1));
  ConstMapRowMat<S> wm(w.values().data(), w.dim(0), w.dim(1));
  ConstMapRowMat<S> gom(out.grad().data(), out.dim(0), out.dim(1));
  if (gx) {
    MapRowMat<S> gxm(gx->data(), x.dim(0), x.dim(1));
    gxm.noalias() += gom * wm;
  }
  if (gw) {
    MapRowMat<S> gwm(gw->data(), w.dim(0), w.dim(1));
    gwm.noalias() += gom.transpose() * xm;
  }
}

template <typename S>
void global_avg_pool_forward(const Tensor<S>& x, Tensor<S>& out) {
  const int64_t N = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3);
  for (int64_t n = 0; n < N; ++n)
    for (int64_t c = 0; c < C; ++c) {
      const S* src = x.values().data() + (n * C + c) * HW;
      S sum = S(0);
      for (int64_t i = 0; i < HW; ++i) sum += src[i];
      out.values()[n * C + c] = sum / S(HW);
    }
}

template <typename S>
void global_avg_pool_backward(const Tensor<S>& x, const Tensor<S>& out, ArrayX<S>& gx) {
  const int64_t N = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3);
  for (int64_t n = 0; n < N; ++n)
    for (int64_t c = 0; c < C; ++c) {
      const S g = out.grad()[n * C + c] / S(HW);
      S* dst = gx.data() + (n * C + c) * HW;
      for (int64_t i = 0; i < HW; ++i) dst[i] += g;
    }
}

// x: (N,C,H,W), gate: (N,C,1,1); broadcasts the gate over space.
template <typename S>
void scale_channels_forward(const Tensor<S>& x, const Tensor<S>& gate, Tensor<S>& out) {
  const int64_t N = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3);
  for (int64_t n = 0; n < N; ++n)
    for (int64_t c = 0; c < C; ++c) {
      const S g = gate.values()[n * C + c];
      const S* src = x.values().data() + (n * C + c) * HW;
      S* dst = out.values().data() + (n * C + c) * HW;
      for (int64_t i = 0; i < HW; ++i) dst[i] = src[i] * g;
    }
}

template <typename S>
void scale_channels_backward(const Tensor<S>& x, const Tensor<S>& gate,
                             const Tensor<S>& out, ArrayX<S>* gx, ArrayX<S>* ggate) {
  const int64_t N = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3);
  for (int64_t n = 0; n < N; ++n)
    for (int64_t c = 0; c < C; ++c) {
      const int64_t base = (n * C + c) * HW;
      const S g = gate.values()[n * C + c];
      S acc = S(0);
      for (int64_t i = 0; i < HW; ++i) {
        const S go = out.grad()[base + i];
        if (gx) (*gx)[base + i] += go * g;
        acc += go * x.values()[base + i];
      }
      if (ggate) (*ggate)[n * C + c] += acc;
    }
}

// Softmax cross-entropy, mean over the batch. Logits may be (N,K) or
// (N,K,1,1); labels hold class indices. `probs` is kept for backward.
template <typename S>
void softmax_xent_forward(const Tensor<S>& logits, const Tensor<S>& labels, Tensor<S>& out,
                          ArrayX<S>& probs) {
  const int64_t N = logits.dim(0), K = logits.dim(1);
  probs.resize(N * K);
  S loss = S(0);
  for (int64_t n = 0; n < N; ++n) {
    const S* l = logits.values().data() + n * K;
    S mx = l[0];
    for (int64_t k = 1; k < K; ++k) mx = std::max(mx, l[k]);
    S sum = S(0);
    for (int64_t k = 0; k < K; ++k) {
      probs[n * K + k] = std::exp(l[k] - mx);
      sum += probs[n * K + k];
    }
    for (int64_t k = 0; k < K; ++k) probs[n * K + k] /= sum;
    const auto y = static_cast<int64_t>(labels.values()[n]);
    loss += std::log(sum) + mx - l[y];
  }
  out.values()[0] = loss / S(N);
}

template <typename S>
void softmax_xent_backward(const Tensor<S>& logits, const Tensor<S>& labels,
                           const Tensor<S>& out, const ArrayX<S>& probs, ArrayX<S>& gx) {
  const int64_t N = logits.dim(0), K = logits.dim(1);
  const S g = out.grad()[0] / S(N);
  for (int64_t n = 0; n < N; ++n) {
    const auto y = static_cast<int64_t>(labels.values()[n]);
    for (int64_t k = 0; k < K; ++k)
      gx[n * K + k] += g * (probs[n * K + k] - (k == y ? S(1) : S(0)));
  }
}

}  // namespace fish::ops
