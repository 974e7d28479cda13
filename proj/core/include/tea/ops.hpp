#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "tea/conv_kernel.hpp"
#include "tea/fault.hpp"
#include "tea/tape.hpp"
#include "tea/tensor.hpp"

// Differentiable ops. Every op takes the tape as its first argument; pass
// nullptr for inference. An op records a backward closure iff a tape is
// given and at least one input requires grad. Inputs are treated as
// immutable; outputs are freshly allocated. All loops are single threaded
// and accumulate in a fixed order, so results are bit-reproducible.

namespace tea {

namespace detail {

template <typename S>
TensorT<S> make_output(Shape s, TapeT<S>* tape, bool recorded) {
  TensorT<S> o = TensorT<S>::zeros(std::move(s));
  if (recorded) {
    o.requires_grad = true;
    o.ensure_grad();
    o.tape_tag = tape;
  }
  return o;
}

template <typename S>
bool want_grad(TapeT<S>* tape, std::initializer_list<const TensorT<S>*> ins) {
  if (!tape) return false;
  for (const auto* t : ins)
    if (t->requires_grad) return true;
  return false;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// spatial convolution (kernel_t == 1), grouped or dense
// ---------------------------------------------------------------------------

template <typename S>
TensorT<S> conv2d(TapeT<S>* tape, const TensorT<S>& x, ConvKernelT<S>& k) {
  k.validate();
  if (k.kernel_t != 1) throw ShapeError("conv2d: kernel_t must be 1");
  int N, T, C, H, W;
  expect5(x, N, T, C, H, W, "conv2d");
  if (C != k.in_channels())
    throw ShapeError("conv2d: input has " + std::to_string(C) + " channels, kernel wants " +
                     std::to_string(k.in_channels()));
  const int Ho = (H + 2 * k.pad_h - k.kernel_h) / k.stride_h + 1;
  const int Wo = (W + 2 * k.pad_w - k.kernel_w) / k.stride_w + 1;
  if (Ho <= 0 || Wo <= 0)
    throw ShapeError("conv2d: zero-size output for input " + shape_str(x.shape));

  const bool rec = detail::want_grad<S>(tape, {&x, &k.weights}) ||
                   (tape && k.has_bias() && k.bias.requires_grad);
  TensorT<S> out = detail::make_output<S>({N, T, k.out_channels, Ho, Wo}, tape, rec);

  const int ocpg = k.out_channels / k.groups;
  const int icpg = k.in_per_group;
  const S* W_ = k.weights.ptr();
  const S* B_ = k.has_bias() ? k.bias.ptr() : nullptr;
  const S* X_ = x.ptr();
  S* O_ = out.ptr();
  const std::int64_t xplane = static_cast<std::int64_t>(H) * W;
  const std::int64_t oplane = static_cast<std::int64_t>(Ho) * Wo;
  const int kh = k.kernel_h, kw = k.kernel_w, sh = k.stride_h, sw = k.stride_w,
            ph = k.pad_h, pw = k.pad_w;

  for (int n = 0; n < N; ++n)
    for (int t = 0; t < T; ++t) {
      const std::int64_t xbase = (static_cast<std::int64_t>(n) * T + t) * C * xplane;
      const std::int64_t obase =
          (static_cast<std::int64_t>(n) * T + t) * k.out_channels * oplane;
      for (int g = 0; g < k.groups; ++g)
        for (int op = 0; op < ocpg; ++op) {
          const int oc = g * ocpg + op;
          S* oc_plane = O_ + obase + static_cast<std::int64_t>(oc) * oplane;
          if (B_) {
            const S b = B_[oc];
            for (std::int64_t i = 0; i < oplane; ++i) oc_plane[i] += b;
          }
          for (int ip = 0; ip < icpg; ++ip) {
            const int ic = g * icpg + ip;
            const S* ic_plane = X_ + xbase + static_cast<std::int64_t>(ic) * xplane;
            const S* wbase =
                W_ + ((static_cast<std::int64_t>(oc) * icpg + ip) * kh) * kw;
            for (int dh = 0; dh < kh; ++dh)
              for (int dw = 0; dw < kw; ++dw) {
                const S wv = wbase[dh * kw + dw];
                if (wv == S(0) && !rec) continue;
                for (int oh = 0; oh < Ho; ++oh) {
                  const int ih = oh * sh - ph + dh;
                  if (ih < 0 || ih >= H) continue;
                  const S* xrow = ic_plane + static_cast<std::int64_t>(ih) * W;
                  S* orow = oc_plane + static_cast<std::int64_t>(oh) * Wo;
                  for (int ow = 0; ow < Wo; ++ow) {
                    const int iw = ow * sw - pw + dw;
                    if (iw < 0 || iw >= W) continue;
                    orow[ow] += wv * xrow[iw];
                  }
                }
              }
          }
        }
    }

  if (rec) {
    const bool need_dx = x.requires_grad;
    const bool need_dw = k.weights.requires_grad;
    const bool need_db = k.has_bias() && k.bias.requires_grad;
    TensorT<S> xc = x, wc = k.weights, bc = k.bias, oc = out;
    if (need_dx) const_cast<TensorT<S>&>(x).ensure_grad();
    if (need_dw) k.weights.ensure_grad();
    if (need_db) k.bias.ensure_grad();
    ConvKernelT<S> geom = k;  // copies shared weight buffers; geometry only
    tape->record("conv2d", [=]() mutable {
      const S* G_ = oc.grad_ptr();
      const S* X2 = xc.ptr();
      const S* W2 = wc.ptr();
      S* dX = need_dx ? xc.grad_ptr() : nullptr;
      S* dW = need_dw ? wc.grad_ptr() : nullptr;
      S* dB = need_db ? bc.grad_ptr() : nullptr;
      const int ocpg2 = geom.out_channels / geom.groups;
      const int icpg2 = geom.in_per_group;
      for (int n = 0; n < N; ++n)
        for (int t = 0; t < T; ++t) {
          const std::int64_t xbase = (static_cast<std::int64_t>(n) * T + t) * C * xplane;
          const std::int64_t obase =
              (static_cast<std::int64_t>(n) * T + t) * geom.out_channels * oplane;
          for (int g = 0; g < geom.groups; ++g)
            for (int op = 0; op < ocpg2; ++op) {
              const int oc_i = g * ocpg2 + op;
              const S* gplane = G_ + obase + static_cast<std::int64_t>(oc_i) * oplane;
              if (dB) {
                S acc = 0;
                for (std::int64_t i = 0; i < oplane; ++i) acc += gplane[i];
                dB[oc_i] += acc;
              }
              for (int ip = 0; ip < icpg2; ++ip) {
                const int ic = g * icpg2 + ip;
                const S* xplane_p = X2 + xbase + static_cast<std::int64_t>(ic) * xplane;
                S* dxplane_p =
                    dX ? dX + xbase + static_cast<std::int64_t>(ic) * xplane : nullptr;
                const std::int64_t wb =
                    ((static_cast<std::int64_t>(oc_i) * icpg2 + ip) * geom.kernel_h) *
                    geom.kernel_w;
                for (int dh = 0; dh < geom.kernel_h; ++dh)
                  for (int dw_i = 0; dw_i < geom.kernel_w; ++dw_i) {
                    const S wv = W2[wb + dh * geom.kernel_w + dw_i];
                    S wacc = 0;
                    for (int oh = 0; oh < Ho; ++oh) {
                      const int ih = oh * geom.stride_h - geom.pad_h + dh;
                      if (ih < 0 || ih >= H) continue;
                      const S* xrow = xplane_p + static_cast<std::int64_t>(ih) * W;
                      S* dxrow =
                          dxplane_p ? dxplane_p + static_cast<std::int64_t>(ih) * W : nullptr;
                      const S* grow = gplane + static_cast<std::int64_t>(oh) * Wo;
                      for (int ow = 0; ow < Wo; ++ow) {
                        const int iw = ow * geom.stride_w - geom.pad_w + dw_i;
                        if (iw < 0 || iw >= W) continue;
                        const S gv = grow[ow];
                        if (dW) wacc += xrow[iw] * gv;
                        if (dxrow) dxrow[iw] += wv * gv;
                      }
                    }
                    if (dW) dW[wb + dh * geom.kernel_w + dw_i] += g_inject_grad_fault ? -wacc : wacc;
                  }
              }
            }
        }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// temporal convolution (kernel_h == kernel_w == 1), stride 1, same length
// ---------------------------------------------------------------------------

template <typename S>
TensorT<S> temporal_conv(TapeT<S>* tape, const TensorT<S>& x, ConvKernelT<S>& k) {
  k.validate();
  if (k.kernel_h != 1 || k.kernel_w != 1)
    throw ShapeError("temporal_conv: spatial kernel must be 1x1");
  if (k.kernel_t % 2 == 0 || k.pad_t != (k.kernel_t - 1) / 2)
    throw ShapeError("temporal_conv: odd kernel with same-length padding required");
  int N, T, C, H, W;
  expect5(x, N, T, C, H, W, "temporal_conv");
  if (C != k.in_channels())
    throw ShapeError("temporal_conv: channel mismatch");
  const bool rec = detail::want_grad<S>(tape, {&x, &k.weights}) ||
                   (tape && k.has_bias() && k.bias.requires_grad);
  TensorT<S> out = detail::make_output<S>({N, T, k.out_channels, H, W}, tape, rec);

  const std::int64_t plane = static_cast<std::int64_t>(H) * W;
  const int kt = k.kernel_t, pad = k.pad_t;
  const int ocpg = k.out_channels / k.groups, icpg = k.in_per_group;
  const S* X_ = x.ptr();
  const S* W_ = k.weights.ptr();
  const S* B_ = k.has_bias() ? k.bias.ptr() : nullptr;
  S* O_ = out.ptr();

  auto xoff = [&](int n, int t, int c) {
    return ((static_cast<std::int64_t>(n) * T + t) * C + c) * plane;
  };
  auto ooff = [&](int n, int t, int c) {
    return ((static_cast<std::int64_t>(n) * T + t) * k.out_channels + c) * plane;
  };

  for (int n = 0; n < N; ++n)
    for (int to = 0; to < T; ++to)
      for (int g = 0; g < k.groups; ++g)
        for (int op = 0; op < ocpg; ++op) {
          const int oc = g * ocpg + op;
          S* orow = O_ + ooff(n, to, oc);
          if (B_) {
            const S b = B_[oc];
            for (std::int64_t i = 0; i < plane; ++i) orow[i] += b;
          }
          for (int ip = 0; ip < icpg; ++ip) {
            const int ic = g * icpg + ip;
            const S* wrow = W_ + (static_cast<std::int64_t>(oc) * icpg + ip) * kt;
            for (int dt = 0; dt < kt; ++dt) {
              const int ti = to + dt - pad;
              if (ti < 0 || ti >= T) continue;
              const S wv = wrow[dt];
              const S* xrow = X_ + xoff(n, ti, ic);
              for (std::int64_t i = 0; i < plane; ++i) orow[i] += wv * xrow[i];
            }
          }
        }

  if (rec) {
    const bool need_dx = x.requires_grad;
    const bool need_dw = k.weights.requires_grad;
    const bool need_db = k.has_bias() && k.bias.requires_grad;
    TensorT<S> xc = x, wc = k.weights, bc = k.bias, oc2 = out;
    if (need_dx) const_cast<TensorT<S>&>(x).ensure_grad();
    if (need_dw) k.weights.ensure_grad();
    if (need_db) k.bias.ensure_grad();
    const int groups = k.groups, out_channels = k.out_channels;
    tape->record("temporal_conv", [=]() mutable {
      const S* G_ = oc2.grad_ptr();
      const S* X2 = xc.ptr();
      const S* W2 = wc.ptr();
      S* dX = need_dx ? xc.grad_ptr() : nullptr;
      S* dW = need_dw ? wc.grad_ptr() : nullptr;
      S* dB = need_db ? bc.grad_ptr() : nullptr;
      const int ocpg2 = out_channels / groups;
      auto xo = [&](int n, int t, int c) {
        return ((static_cast<std::int64_t>(n) * T + t) * C + c) * plane;
      };
      auto oo = [&](int n, int t, int c) {
        return ((static_cast<std::int64_t>(n) * T + t) * out_channels + c) * plane;
      };
      for (int n = 0; n < N; ++n)
        for (int to = 0; to < T; ++to)
          for (int g = 0; g < groups; ++g)
            for (int op = 0; op < ocpg2; ++op) {
              const int oc_i = g * ocpg2 + op;
              const S* grow = G_ + oo(n, to, oc_i);
              if (dB) {
                S acc = 0;
                for (std::int64_t i = 0; i < plane; ++i) acc += grow[i];
                dB[oc_i] += acc;
              }
              for (int ip = 0; ip < icpg; ++ip) {
                const int ic = g * icpg + ip;
                const std::int64_t wb = (static_cast<std::int64_t>(oc_i) * icpg + ip) * kt;
                for (int dt = 0; dt < kt; ++dt) {
                  const int ti = to + dt - pad;
                  if (ti < 0 || ti >= T) continue;
                  const S* xrow = X2 + xo(n, ti, ic);
                  if (dW) {
                    S acc = 0;
                    for (std::int64_t i = 0; i < plane; ++i) acc += xrow[i] * grow[i];
                    dW[wb + dt] += acc;
                  }
                  if (dX) {
                    S* dxrow = dX + xo(n, ti, ic);
                    const S wv = W2[wb + dt];
                    for (std::int64_t i = 0; i < plane; ++i) dxrow[i] += wv * grow[i];
                  }
                }
              }
            }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// pooling
// ---------------------------------------------------------------------------

// Mean over H and W, keeping singleton spatial axes: [N,T,C,H,W] -> [N,T,C,1,1].
template <typename S>
TensorT<S> global_avg_pool_spatial(TapeT<S>* tape, const TensorT<S>& x) {
  int N, T, C, H, W;
  expect5(x, N, T, C, H, W, "global_avg_pool_spatial");
  const bool rec = detail::want_grad<S>(tape, {&x});
  TensorT<S> out = detail::make_output<S>({N, T, C, 1, 1}, tape, rec);
  const std::int64_t plane = static_cast<std::int64_t>(H) * W;
  const S inv = S(1) / static_cast<S>(plane);
  const S* X_ = x.ptr();
  S* O_ = out.ptr();
  const std::int64_t rows = static_cast<std::int64_t>(N) * T * C;
  for (std::int64_t r = 0; r < rows; ++r) {
    S acc = 0;
    const S* p = X_ + r * plane;
    for (std::int64_t i = 0; i < plane; ++i) acc += p[i];
    O_[r] = acc * inv;
  }
  if (rec) {
    TensorT<S> xc = x, oc = out;
    const_cast<TensorT<S>&>(x).ensure_grad();
    tape->record("global_avg_pool_spatial", [=]() mutable {
      const S* G_ = oc.grad_ptr();
      S* dX = xc.grad_ptr();
      for (std::int64_t r = 0; r < rows; ++r) {
        const S g = G_[r] * inv;
        S* p = dX + r * plane;
        for (std::int64_t i = 0; i < plane; ++i) p[i] += g;
      }
    });
  }
  return out;
}

// Average pooling with window k, stride s, no padding (fixed k*k divisor).
template <typename S>
TensorT<S> avg_pool2d(TapeT<S>* tape, const TensorT<S>& x, int k, int s) {
  if (k <= 0 || s <= 0) throw ValueError("avg_pool2d: window and stride must be positive");
  int N, T, C, H, W;
  expect5(x, N, T, C, H, W, "avg_pool2d");
  const int Ho = (H - k) / s + 1, Wo = (W - k) / s + 1;
  if (Ho <= 0 || Wo <= 0) throw ShapeError("avg_pool2d: zero-size output");
  const bool rec = detail::want_grad<S>(tape, {&x});
  TensorT<S> out = detail::make_output<S>({N, T, C, Ho, Wo}, tape, rec);
  const S inv = S(1) / static_cast<S>(k * k);
  const std::int64_t plane = static_cast<std::int64_t>(H) * W;
  const std::int64_t oplane = static_cast<std::int64_t>(Ho) * Wo;
  const std::int64_t rows = static_cast<std::int64_t>(N) * T * C;
  const S* X_ = x.ptr();
  S* O_ = out.ptr();
  for (std::int64_t r = 0; r < rows; ++r) {
    const S* xp = X_ + r * plane;
    S* op = O_ + r * oplane;
    for (int oh = 0; oh < Ho; ++oh)
      for (int ow = 0; ow < Wo; ++ow) {
        S acc = 0;
        for (int dh = 0; dh < k; ++dh)
          for (int dw = 0; dw < k; ++dw)
            acc += xp[static_cast<std::int64_t>(oh * s + dh) * W + (ow * s + dw)];
        op[static_cast<std::int64_t>(oh) * Wo + ow] = acc * inv;
      }
  }
  if (rec) {
    TensorT<S> xc = x, oc = out;
    const_cast<TensorT<S>&>(x).ensure_grad();
    tape->record("avg_pool2d", [=]() mutable {
      const S* G_ = oc.grad_ptr();
      S* dX = xc.grad_ptr();
      for (std::int64_t r = 0; r < rows; ++r) {
        const S* gp = G_ + r * oplane;
        S* dxp = dX + r * plane;
        for (int oh = 0; oh < Ho; ++oh)
          for (int ow = 0; ow < Wo; ++ow) {
            const S g = gp[static_cast<std::int64_t>(oh) * Wo + ow] * inv;
            for (int dh = 0; dh < k; ++dh)
              for (int dw = 0; dw < k; ++dw)
                dxp[static_cast<std::int64_t>(oh * s + dh) * W + (ow * s + dw)] += g;
          }
      }
    });
  }
  return out;
}

// Max pooling with window k, stride s, symmetric zero padding. Ties go to
// the first element in scan order.
template <typename S>
TensorT<S> max_pool2d(TapeT<S>* tape, const TensorT<S>& x, int k, int s, int pad) {
  if (k <= 0 || s <= 0 || pad < 0) throw ValueError("max_pool2d: bad window/stride/pad");
  int N, T, C, H, W;
  expect5(x, N, T, C, H, W, "max_pool2d");
  const int Ho = (H + 2 * pad - k) / s + 1, Wo = (W + 2 * pad - k) / s + 1;
  if (Ho <= 0 || Wo <= 0) throw ShapeError("max_pool2d: zero-size output");
  const bool rec = detail::want_grad<S>(tape, {&x});
  TensorT<S> out = detail::make_output<S>({N, T, C, Ho, Wo}, tape, rec);
  auto argmax = std::make_shared<std::vector<std::int64_t>>(
      static_cast<std::size_t>(out.numel()));
  const std::int64_t plane = static_cast<std::int64_t>(H) * W;
  const std::int64_t oplane = static_cast<std::int64_t>(Ho) * Wo;
  const std::int64_t rows = static_cast<std::int64_t>(N) * T * C;
  const S* X_ = x.ptr();
  S* O_ = out.ptr();
  for (std::int64_t r = 0; r < rows; ++r) {
    const S* xp = X_ + r * plane;
    for (int oh = 0; oh < Ho; ++oh)
      for (int ow = 0; ow < Wo; ++ow) {
        S best = std::numeric_limits<S>::lowest();
        std::int64_t best_i = -1;
        for (int dh = 0; dh < k; ++dh) {
          const int ih = oh * s - pad + dh;
          if (ih < 0 || ih >= H) continue;
          for (int dw = 0; dw < k; ++dw) {
            const int iw = ow * s - pad + dw;
            if (iw < 0 || iw >= W) continue;
            const S v = xp[static_cast<std::int64_t>(ih) * W + iw];
            if (v > best) {
              best = v;
              best_i = static_cast<std::int64_t>(ih) * W + iw;
            }
          }
        }
        // window entirely in padding can't happen with pad < k
        const std::int64_t oi = r * oplane + static_cast<std::int64_t>(oh) * Wo + ow;
        O_[oi] = best;
        (*argmax)[static_cast<std::size_t>(oi)] = r * plane + best_i;
      }
  }
  if (rec) {
    TensorT<S> xc = x, oc = out;
    const_cast<TensorT<S>&>(x).ensure_grad();
    tape->record("max_pool2d", [=]() mutable {
      const S* G_ = oc.grad_ptr();
      S* dX = xc.grad_ptr();
      const std::int64_t total = oc.numel();
      for (std::int64_t i = 0; i < total; ++i)
        dX[(*argmax)[static_cast<std::size_t>(i)]] += G_[i];
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// elementwise
// ---------------------------------------------------------------------------

template <typename S>
TensorT<S> relu(TapeT<S>* tape, const TensorT<S>& x) {
  const bool rec = detail::want_grad<S>(tape, {&x});
  TensorT<S> out = detail::make_output<S>(x.shape, tape, rec);
  const std::int64_t n = x.numel();
  const S* X_ = x.ptr();
  S* O_ = out.ptr();
  for (std::int64_t i = 0; i < n; ++i) O_[i] = X_[i] > S(0) ? X_[i] : S(0);
  if (rec) {
    TensorT<S> xc = x, oc = out;
    const_cast<TensorT<S>&>(x).ensure_grad();
    tape->record("relu", [=]() mutable {
      const S* G_ = oc.grad_ptr();
      const S* X2 = xc.ptr();
      S* dX = xc.grad_ptr();
      for (std::int64_t i = 0; i < n; ++i)
        if (X2[i] > S(0)) dX[i] += G_[i];
    });
  }
  return out;
}

template <typename S>
TensorT<S> sigmoid(TapeT<S>* tape, const TensorT<S>& x) {
  const bool rec = detail::want_grad<S>(tape, {&x});
  TensorT<S> out = detail::make_output<S>(x.shape, tape, rec);
  const std::int64_t n = x.numel();
  const S* X_ = x.ptr();
  S* O_ = out.ptr();
  for (std::int64_t i = 0; i < n; ++i) {
    const S v = X_[i];
    O_[i] = v >= S(0) ? S(1) / (S(1) + std::exp(-v))
                      : std::exp(v) / (S(1) + std::exp(v));
  }
  if (rec) {
    TensorT<S> xc = x, oc = out;
    const_cast<TensorT<S>&>(x).ensure_grad();
    tape->record("sigmoid", [=]() mutable {
      const S* G_ = oc.grad_ptr();
      const S* Y_ = oc.ptr();
      S* dX = xc.grad_ptr();
      for (std::int64_t i = 0; i < n; ++i) dX[i] += G_[i] * Y_[i] * (S(1) - Y_[i]);
    });
  }
  return out;
}

// y = alpha * x + beta
template <typename S>
TensorT<S> affine(TapeT<S>* tape, const TensorT<S>& x, S alpha, S beta) {
  const bool rec = detail::want_grad<S>(tape, {&x});
  TensorT<S> out = detail::make_output<S>(x.shape, tape, rec);
  const std::int64_t n = x.numel();
  const S* X_ = x.ptr();
  S* O_ = out.ptr();
  for (std::int64_t i = 0; i < n; ++i) O_[i] = alpha * X_[i] + beta;
  if (rec) {
    TensorT<S> xc = x, oc = out;
    const_cast<TensorT<S>&>(x).ensure_grad();
    tape->record("affine", [=]() mutable {
      const S* G_ = oc.grad_ptr();
      S* dX = xc.grad_ptr();
      for (std::int64_t i = 0; i < n; ++i) dX[i] += alpha * G_[i];
    });
  }
  return out;
}

namespace detail {
template <typename S, typename FwdFn>
TensorT<S> binary_same_shape(TapeT<S>* tape, const TensorT<S>& a, const TensorT<S>& b,
                             const char* name, FwdFn fwd, S da, S db) {
  if (a.shape != b.shape)
    throw ShapeError(std::string(name) + ": shape mismatch " + shape_str(a.shape) + " vs " +
                     shape_str(b.shape));
  const bool rec = want_grad<S>(tape, {&a, &b});
  TensorT<S> out = make_output<S>(a.shape, tape, rec);
  const std::int64_t n = a.numel();
  const S* A_ = a.ptr();
  const S* B_ = b.ptr();
  S* O_ = out.ptr();
  for (std::int64_t i = 0; i < n; ++i) O_[i] = fwd(A_[i], B_[i]);
  if (rec) {
    TensorT<S> ac = a, bc = b, oc = out;
    const bool na = a.requires_grad, nb = b.requires_grad;
    if (na) const_cast<TensorT<S>&>(a).ensure_grad();
    if (nb) const_cast<TensorT<S>&>(b).ensure_grad();
    tape->record(name, [=]() mutable {
      const S* G_ = oc.grad_ptr();
      if (na) {
        S* dA = ac.grad_ptr();
        for (std::int64_t i = 0; i < n; ++i) dA[i] += da * G_[i];
      }
      if (nb) {
        S* dB = bc.grad_ptr();
        for (std::int64_t i = 0; i < n; ++i) dB[i] += db * G_[i];
      }
    });
  }
  return out;
}
}  // namespace detail

template <typename S>
TensorT<S> add(TapeT<S>* tape, const TensorT<S>& a, const TensorT<S>& b) {
  return detail::binary_same_shape<S>(
      tape, a, b, "add", [](S x, S y) { return x + y; }, S(1), S(1));
}

template <typename S>
TensorT<S> sub(TapeT<S>* tape, const TensorT<S>& a, const TensorT<S>& b) {
  return detail::binary_same_shape<S>(
      tape, a, b, "sub", [](S x, S y) { return x - y; }, S(1), S(-1));
}

// Elementwise product (same shapes).
template <typename S>
TensorT<S> mul(TapeT<S>* tape, const TensorT<S>& a, const TensorT<S>& b) {
  if (a.shape != b.shape)
    throw ShapeError("mul: shape mismatch " + shape_str(a.shape) + " vs " +
                     shape_str(b.shape));
  const bool rec = detail::want_grad<S>(tape, {&a, &b});
  TensorT<S> out = detail::make_output<S>(a.shape, tape, rec);
  const std::int64_t n = a.numel();
  const S* A_ = a.ptr();
  const S* B_ = b.ptr();
  S* O_ = out.ptr();
  for (std::int64_t i = 0; i < n; ++i) O_[i] = A_[i] * B_[i];
  if (rec) {
    TensorT<S> ac = a, bc = b, oc = out;
    const bool na = a.requires_grad, nb = b.requires_grad;
    if (na) const_cast<TensorT<S>&>(a).ensure_grad();
    if (nb) const_cast<TensorT<S>&>(b).ensure_grad();
    tape->record("mul", [=]() mutable {
      const S* G_ = oc.grad_ptr();
      if (na) {
        S* dA = ac.grad_ptr();
        const S* B2 = bc.ptr();
        for (std::int64_t i = 0; i < n; ++i) dA[i] += B2[i] * G_[i];
      }
      if (nb) {
        S* dB = bc.grad_ptr();
        const S* A2 = ac.ptr();
        for (std::int64_t i = 0; i < n; ++i) dB[i] += A2[i] * G_[i];
      }
    });
  }
  return out;
}

// x [N,T,C,H,W] scaled per channel by a [N,T,C,1,1].
template <typename S>
TensorT<S> mul_broadcast_channel(TapeT<S>* tape, const TensorT<S>& x, const TensorT<S>& a) {
  int N, T, C, H, W;
  expect5(x, N, T, C, H, W, "mul_broadcast_channel");
  if (a.shape != Shape{N, T, C, 1, 1})
    throw ShapeError("mul_broadcast_channel: weight shape " + shape_str(a.shape) +
                     " does not broadcast over " + shape_str(x.shape));
  const bool rec = detail::want_grad<S>(tape, {&x, &a});
  TensorT<S> out = detail::make_output<S>(x.shape, tape, rec);
  const std::int64_t plane = static_cast<std::int64_t>(H) * W;
  const std::int64_t rows = static_cast<std::int64_t>(N) * T * C;
  const S* X_ = x.ptr();
  const S* A_ = a.ptr();
  S* O_ = out.ptr();
  for (std::int64_t r = 0; r < rows; ++r) {
    const S s = A_[r];
    const S* xp = X_ + r * plane;
    S* op = O_ + r * plane;
    for (std::int64_t i = 0; i < plane; ++i) op[i] = xp[i] * s;
  }
  if (rec) {
    TensorT<S> xc = x, ac = a, oc = out;
    const bool nx = x.requires_grad, na = a.requires_grad;
    if (nx) const_cast<TensorT<S>&>(x).ensure_grad();
    if (na) const_cast<TensorT<S>&>(a).ensure_grad();
    tape->record("mul_broadcast_channel", [=]() mutable {
      const S* G_ = oc.grad_ptr();
      for (std::int64_t r = 0; r < rows; ++r) {
        const S* gp = G_ + r * plane;
        if (nx) {
          const S s = (*ac.data)[static_cast<std::size_t>(r)];
          S* dxp = xc.grad_ptr() + r * plane;
          for (std::int64_t i = 0; i < plane; ++i) dxp[i] += gp[i] * s;
        }
        if (na) {
          const S* xp = xc.ptr() + r * plane;
          S acc = 0;
          for (std::int64_t i = 0; i < plane; ++i) acc += xp[i] * gp[i];
          ac.grad_ptr()[r] += acc;
        }
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// batch normalization
// ---------------------------------------------------------------------------

// Per-channel statistics over N*T*H*W. Biased variance, eps inside the
// square root. Training mode updates running stats in place.
template <typename S>
struct BatchNormT {
  int channels = 0;
  TensorT<S> scale, shift;
  std::vector<S> running_mean, running_var;
  double eps = 1e-5;
  double momentum = 0.1;

  static BatchNormT make(int C) {
    BatchNormT bn;
    bn.channels = C;
    bn.scale = TensorT<S>::full({C}, S(1));
    bn.scale.requires_grad = true;
    bn.scale.ensure_grad();
    bn.shift = TensorT<S>::zeros({C}, true);
    bn.running_mean.assign(C, S(0));
    bn.running_var.assign(C, S(1));
    return bn;
  }

  std::vector<TensorT<S>*> params() { return {&scale, &shift}; }

  template <typename U>
  BatchNormT<U> cast() const {
    BatchNormT<U> o;
    o.channels = channels;
    o.scale = scale.template cast<U>();
    o.shift = shift.template cast<U>();
    o.running_mean.assign(running_mean.begin(), running_mean.end());
    o.running_var.assign(running_var.begin(), running_var.end());
    o.eps = eps;
    o.momentum = momentum;
    return o;
  }
};

using BatchNorm = BatchNormT<float>;

template <typename S>
TensorT<S> batch_norm(TapeT<S>* tape, const TensorT<S>& x, BatchNormT<S>& bn,
                      bool training) {
  int N, T, C, H, W;
  expect5(x, N, T, C, H, W, "batch_norm");
  if (C != bn.channels) throw ShapeError("batch_norm: channel mismatch");
  const bool rec = detail::want_grad<S>(tape, {&x, &bn.scale, &bn.shift});
  TensorT<S> out = detail::make_output<S>(x.shape, tape, rec);

  const std::int64_t plane = static_cast<std::int64_t>(H) * W;
  const std::int64_t m = static_cast<std::int64_t>(N) * T * plane;  // per-channel count
  const S* X_ = x.ptr();
  S* O_ = out.ptr();
  auto mean = std::make_shared<std::vector<S>>(C, S(0));
  auto invstd = std::make_shared<std::vector<S>>(C, S(0));

  if (training) {
    for (int c = 0; c < C; ++c) {
      double acc = 0;
      for (int n = 0; n < N; ++n)
        for (int t = 0; t < T; ++t) {
          const S* p = X_ + ((static_cast<std::int64_t>(n) * T + t) * C + c) * plane;
          for (std::int64_t i = 0; i < plane; ++i) acc += p[i];
        }
      const double mu = acc / static_cast<double>(m);
      double vacc = 0;
      for (int n = 0; n < N; ++n)
        for (int t = 0; t < T; ++t) {
          const S* p = X_ + ((static_cast<std::int64_t>(n) * T + t) * C + c) * plane;
          for (std::int64_t i = 0; i < plane; ++i) {
            const double d = static_cast<double>(p[i]) - mu;
            vacc += d * d;
          }
        }
      const double var = vacc / static_cast<double>(m);
      (*mean)[c] = static_cast<S>(mu);
      (*invstd)[c] = static_cast<S>(1.0 / std::sqrt(var + bn.eps));
      bn.running_mean[c] =
          static_cast<S>((1.0 - bn.momentum) * bn.running_mean[c] + bn.momentum * mu);
      bn.running_var[c] =
          static_cast<S>((1.0 - bn.momentum) * bn.running_var[c] + bn.momentum * var);
    }
  } else {
    for (int c = 0; c < C; ++c) {
      (*mean)[c] = bn.running_mean[c];
      (*invstd)[c] =
          static_cast<S>(1.0 / std::sqrt(static_cast<double>(bn.running_var[c]) + bn.eps));
    }
  }

  const S* gamma = bn.scale.ptr();
  const S* beta = bn.shift.ptr();
  for (int n = 0; n < N; ++n)
    for (int t = 0; t < T; ++t)
      for (int c = 0; c < C; ++c) {
        const std::int64_t off = ((static_cast<std::int64_t>(n) * T + t) * C + c) * plane;
        const S mu = (*mean)[c], is = (*invstd)[c], g = gamma[c], b = beta[c];
        for (std::int64_t i = 0; i < plane; ++i)
          O_[off + i] = g * (X_[off + i] - mu) * is + b;
      }

  if (rec) {
    TensorT<S> xc = x, oc = out, sc = bn.scale, sh = bn.shift;
    const bool nx = x.requires_grad;
    const bool ng = bn.scale.requires_grad, nb = bn.shift.requires_grad;
    if (nx) const_cast<TensorT<S>&>(x).ensure_grad();
    if (ng) bn.scale.ensure_grad();
    if (nb) bn.shift.ensure_grad();
    tape->record("batch_norm", [=]() mutable {
      const S* G_ = oc.grad_ptr();
      const S* X2 = xc.ptr();
      const S* gam = sc.ptr();
      for (int c = 0; c < C; ++c) {
        const S mu = (*mean)[c], is = (*invstd)[c];
        double sum_g = 0, sum_gx = 0;
        for (int n = 0; n < N; ++n)
          for (int t = 0; t < T; ++t) {
            const std::int64_t off =
                ((static_cast<std::int64_t>(n) * T + t) * C + c) * plane;
            for (std::int64_t i = 0; i < plane; ++i) {
              const double g = G_[off + i];
              sum_g += g;
              sum_gx += g * ((X2[off + i] - mu) * is);
            }
          }
        if (nb) sh.grad_ptr()[c] += static_cast<S>(sum_g);
        if (ng) sc.grad_ptr()[c] += static_cast<S>(sum_gx);
        if (nx) {
          S* dX = xc.grad_ptr();
          const S gis = gam[c] * is;
          if (training) {
            const S mg = static_cast<S>(sum_g / static_cast<double>(m));
            const S mgx = static_cast<S>(sum_gx / static_cast<double>(m));
            for (int n = 0; n < N; ++n)
              for (int t = 0; t < T; ++t) {
                const std::int64_t off =
                    ((static_cast<std::int64_t>(n) * T + t) * C + c) * plane;
                for (std::int64_t i = 0; i < plane; ++i) {
                  const S xh = (X2[off + i] - mu) * is;
                  dX[off + i] += gis * (G_[off + i] - mg - xh * mgx);
                }
              }
          } else {
            for (int n = 0; n < N; ++n)
              for (int t = 0; t < T; ++t) {
                const std::int64_t off =
                    ((static_cast<std::int64_t>(n) * T + t) * C + c) * plane;
                for (std::int64_t i = 0; i < plane; ++i) dX[off + i] += gis * G_[off + i];
              }
          }
        }
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// temporal reshaping ops
// ---------------------------------------------------------------------------

// Frames [t0, t1) of x.
template <typename S>
TensorT<S> temporal_slice(TapeT<S>* tape, const TensorT<S>& x, int t0, int t1) {
  int N, T, C, H, W;
  expect5(x, N, T, C, H, W, "temporal_slice");
  if (t0 < 0 || t1 > T || t0 >= t1)
    throw ShapeError("temporal_slice: bad range [" + std::to_string(t0) + "," +
                     std::to_string(t1) + ") for T=" + std::to_string(T));
  const int To = t1 - t0;
  const bool rec = detail::want_grad<S>(tape, {&x});
  TensorT<S> out = detail::make_output<S>({N, To, C, H, W}, tape, rec);
  const std::int64_t frame = static_cast<std::int64_t>(C) * H * W;
  const S* X_ = x.ptr();
  S* O_ = out.ptr();
  for (int n = 0; n < N; ++n)
    for (int t = 0; t < To; ++t)
      std::copy_n(X_ + (static_cast<std::int64_t>(n) * T + t0 + t) * frame, frame,
                  O_ + (static_cast<std::int64_t>(n) * To + t) * frame);
  if (rec) {
    TensorT<S> xc = x, oc = out;
    const_cast<TensorT<S>&>(x).ensure_grad();
    tape->record("temporal_slice", [=]() mutable {
      const S* G_ = oc.grad_ptr();
      S* dX = xc.grad_ptr();
      for (int n = 0; n < N; ++n)
        for (int t = 0; t < To; ++t) {
          const S* gp = G_ + (static_cast<std::int64_t>(n) * To + t) * frame;
          S* dp = dX + (static_cast<std::int64_t>(n) * T + t0 + t) * frame;
          for (std::int64_t i = 0; i < frame; ++i) dp[i] += gp[i];
        }
    });
  }
  return out;
}

// Appends `count` all-zero frames at the end of the clip.
template <typename S>
TensorT<S> pad_temporal_end(TapeT<S>* tape, const TensorT<S>& x, int count) {
  if (count < 0) throw ValueError("pad_temporal_end: negative count");
  int N, T, C, H, W;
  expect5(x, N, T, C, H, W, "pad_temporal_end");
  const int To = T + count;
  const bool rec = detail::want_grad<S>(tape, {&x});
  TensorT<S> out = detail::make_output<S>({N, To, C, H, W}, tape, rec);
  const std::int64_t frame = static_cast<std::int64_t>(C) * H * W;
  const S* X_ = x.ptr();
  S* O_ = out.ptr();
  for (int n = 0; n < N; ++n)
    std::copy_n(X_ + static_cast<std::int64_t>(n) * T * frame, T * frame,
                O_ + static_cast<std::int64_t>(n) * To * frame);
  if (rec) {
    TensorT<S> xc = x, oc = out;
    const_cast<TensorT<S>&>(x).ensure_grad();
    tape->record("pad_temporal_end", [=]() mutable {
      const S* G_ = oc.grad_ptr();
      S* dX = xc.grad_ptr();
      for (int n = 0; n < N; ++n) {
        const S* gp = G_ + static_cast<std::int64_t>(n) * To * frame;
        S* dp = dX + static_cast<std::int64_t>(n) * T * frame;
        for (std::int64_t i = 0; i < static_cast<std::int64_t>(T) * frame; ++i)
          dp[i] += gp[i];
      }
    });
  }
  return out;
}

// Channels [c0, c1) of x.
template <typename S>
TensorT<S> channel_slice(TapeT<S>* tape, const TensorT<S>& x, int c0, int c1) {
  int N, T, C, H, W;
  expect5(x, N, T, C, H, W, "channel_slice");
  if (c0 < 0 || c1 > C || c0 >= c1)
    throw ShapeError("channel_slice: bad range [" + std::to_string(c0) + "," +
                     std::to_string(c1) + ") for C=" + std::to_string(C));
  const int Co = c1 - c0;
  const bool rec = detail::want_grad<S>(tape, {&x});
  TensorT<S> out = detail::make_output<S>({N, T, Co, H, W}, tape, rec);
  const std::int64_t plane = static_cast<std::int64_t>(H) * W;
  const S* X_ = x.ptr();
  S* O_ = out.ptr();
  const std::int64_t nt = static_cast<std::int64_t>(N) * T;
  for (std::int64_t f = 0; f < nt; ++f)
    std::copy_n(X_ + (f * C + c0) * plane, static_cast<std::int64_t>(Co) * plane,
                O_ + f * Co * plane);
  if (rec) {
    TensorT<S> xc = x, oc = out;
    const_cast<TensorT<S>&>(x).ensure_grad();
    tape->record("channel_slice", [=]() mutable {
      const S* G_ = oc.grad_ptr();
      S* dX = xc.grad_ptr();
      for (std::int64_t f = 0; f < nt; ++f) {
        const S* gp = G_ + f * Co * plane;
        S* dp = dX + (f * C + c0) * plane;
        for (std::int64_t i = 0; i < static_cast<std::int64_t>(Co) * plane; ++i)
          dp[i] += gp[i];
      }
    });
  }
  return out;
}

// Concatenation along the channel axis.
template <typename S>
TensorT<S> channel_concat(TapeT<S>* tape, const std::vector<TensorT<S>>& parts) {
  if (parts.empty()) throw ValueError("channel_concat: no inputs");
  int N, T, C0, H, W;
  expect5(parts[0], N, T, C0, H, W, "channel_concat");
  int Ctot = 0;
  bool any_grad = false;
  for (const auto& p : parts) {
    int n, t, c, h, w;
    expect5(p, n, t, c, h, w, "channel_concat");
    if (n != N || t != T || h != H || w != W)
      throw ShapeError("channel_concat: mismatched shapes");
    Ctot += c;
    any_grad = any_grad || p.requires_grad;
  }
  const bool rec = tape && any_grad;
  TensorT<S> out = detail::make_output<S>({N, T, Ctot, H, W}, tape, rec);
  const std::int64_t plane = static_cast<std::int64_t>(H) * W;
  const std::int64_t nt = static_cast<std::int64_t>(N) * T;
  S* O_ = out.ptr();
  int coff = 0;
  for (const auto& p : parts) {
    const int Cp = p.shape[2];
    const S* P_ = p.ptr();
    for (std::int64_t f = 0; f < nt; ++f)
      std::copy_n(P_ + f * Cp * plane, static_cast<std::int64_t>(Cp) * plane,
                  O_ + (f * Ctot + coff) * plane);
    coff += Cp;
  }
  if (rec) {
    std::vector<TensorT<S>> pc = parts;
    TensorT<S> oc = out;
    for (auto& p : pc)
      if (p.requires_grad) p.ensure_grad();
    tape->record("channel_concat", [=]() mutable {
      const S* G_ = oc.grad_ptr();
      int off = 0;
      for (auto& p : pc) {
        const int Cp = p.shape[2];
        if (p.requires_grad) {
          S* dP = p.grad_ptr();
          for (std::int64_t f = 0; f < nt; ++f) {
            const S* gp = G_ + (f * Ctot + off) * plane;
            S* dp = dP + f * Cp * plane;
            for (std::int64_t i = 0; i < static_cast<std::int64_t>(Cp) * plane; ++i)
              dp[i] += gp[i];
          }
        }
        off += Cp;
      }
    });
  }
  return out;
}

// Mean over the T axis: [N,T,C,1,1] or [N,T,C] -> [N,C].
template <typename S>
TensorT<S> temporal_mean(TapeT<S>* tape, const TensorT<S>& x) {
  int N, T, C;
  if (x.ndim() == 5 && x.shape[3] == 1 && x.shape[4] == 1) {
    N = x.shape[0];
    T = x.shape[1];
    C = x.shape[2];
  } else if (x.ndim() == 3) {
    N = x.shape[0];
    T = x.shape[1];
    C = x.shape[2];
  } else {
    throw ShapeError("temporal_mean: expected [N,T,C,1,1] or [N,T,C], got " +
                     shape_str(x.shape));
  }
  const bool rec = detail::want_grad<S>(tape, {&x});
  TensorT<S> out = detail::make_output<S>({N, C}, tape, rec);
  const S inv = S(1) / static_cast<S>(T);
  const S* X_ = x.ptr();
  S* O_ = out.ptr();
  for (int n = 0; n < N; ++n)
    for (int t = 0; t < T; ++t)
      for (int c = 0; c < C; ++c)
        O_[static_cast<std::int64_t>(n) * C + c] +=
            X_[(static_cast<std::int64_t>(n) * T + t) * C + c] * inv;
  if (rec) {
    TensorT<S> xc = x, oc = out;
    const_cast<TensorT<S>&>(x).ensure_grad();
    tape->record("temporal_mean", [=]() mutable {
      const S* G_ = oc.grad_ptr();
      S* dX = xc.grad_ptr();
      for (int n = 0; n < N; ++n)
        for (int t = 0; t < T; ++t)
          for (int c = 0; c < C; ++c)
            dX[(static_cast<std::int64_t>(n) * T + t) * C + c] +=
                G_[static_cast<std::int64_t>(n) * C + c] * inv;
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// training-only ops
// ---------------------------------------------------------------------------

// Inverted dropout: keep with probability 1-p and scale by 1/(1-p). In
// eval mode this is the identity. Mask draws consume the rng in a fixed
// element order.
template <typename S>
TensorT<S> dropout(TapeT<S>* tape, const TensorT<S>& x, double p, std::mt19937& rng,
                   bool training) {
  if (p < 0.0 || p >= 1.0) throw ValueError("dropout: p must be in [0,1)");
  if (!training || p == 0.0) {
    const bool rec = detail::want_grad<S>(tape, {&x});
    TensorT<S> out = detail::make_output<S>(x.shape, tape, rec);
    std::copy(x.data->begin(), x.data->end(), out.data->begin());
    if (rec) {
      TensorT<S> xc = x, oc = out;
      const_cast<TensorT<S>&>(x).ensure_grad();
      tape->record("dropout", [=]() mutable {
        const S* G_ = oc.grad_ptr();
        S* dX = xc.grad_ptr();
        for (std::int64_t i = 0; i < oc.numel(); ++i) dX[i] += G_[i];
      });
    }
    return out;
  }
  const bool rec = detail::want_grad<S>(tape, {&x});
  TensorT<S> out = detail::make_output<S>(x.shape, tape, rec);
  const std::int64_t n = x.numel();
  auto mask = std::make_shared<std::vector<S>>(static_cast<std::size_t>(n));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const S scale = static_cast<S>(1.0 / (1.0 - p));
  const S* X_ = x.ptr();
  S* O_ = out.ptr();
  for (std::int64_t i = 0; i < n; ++i) {
    const S m = u(rng) < p ? S(0) : scale;
    (*mask)[static_cast<std::size_t>(i)] = m;
    O_[i] = X_[i] * m;
  }
  if (rec) {
    TensorT<S> xc = x, oc = out;
    const_cast<TensorT<S>&>(x).ensure_grad();
    tape->record("dropout", [=]() mutable {
      const S* G_ = oc.grad_ptr();
      S* dX = xc.grad_ptr();
      for (std::int64_t i = 0; i < n; ++i)
        dX[i] += G_[i] * (*mask)[static_cast<std::size_t>(i)];
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// reductions and loss
// ---------------------------------------------------------------------------

template <typename S>
TensorT<S> sum_all(TapeT<S>* tape, const TensorT<S>& x) {
  const bool rec = detail::want_grad<S>(tape, {&x});
  TensorT<S> out = detail::make_output<S>({1}, tape, rec);
  const std::int64_t n = x.numel();
  const S* X_ = x.ptr();
  S acc = 0;
  for (std::int64_t i = 0; i < n; ++i) acc += X_[i];
  (*out.data)[0] = acc;
  if (rec) {
    TensorT<S> xc = x, oc = out;
    const_cast<TensorT<S>&>(x).ensure_grad();
    tape->record("sum_all", [=]() mutable {
      const S g = (*oc.grad)[0];
      S* dX = xc.grad_ptr();
      for (std::int64_t i = 0; i < n; ++i) dX[i] += g;
    });
  }
  return out;
}

// Mean cross entropy over the batch for logits [N,K] and integer labels.
// Log-sum-exp is max-shifted for stability.
template <typename S>
TensorT<S> softmax_cross_entropy(TapeT<S>* tape, const TensorT<S>& logits,
                                 const std::vector<int>& labels) {
  if (logits.ndim() != 2)
    throw ShapeError("softmax_cross_entropy: expected [N,K] logits, got " +
                     shape_str(logits.shape));
  const int N = logits.shape[0], K = logits.shape[1];
  if (static_cast<int>(labels.size()) != N)
    throw ShapeError("softmax_cross_entropy: label count mismatch");
  for (int y : labels)
    if (y < 0 || y >= K) throw ValueError("softmax_cross_entropy: label out of range");
  const bool rec = detail::want_grad<S>(tape, {&logits});
  TensorT<S> out = detail::make_output<S>({1}, tape, rec);
  const S* L_ = logits.ptr();
  double total = 0;
  for (int n = 0; n < N; ++n) {
    const S* row = L_ + static_cast<std::int64_t>(n) * K;
    S mx = row[0];
    for (int k = 1; k < K; ++k) mx = std::max(mx, row[k]);
    double se = 0;
    for (int k = 0; k < K; ++k) se += std::exp(static_cast<double>(row[k] - mx));
    total += std::log(se) + static_cast<double>(mx) - static_cast<double>(row[labels[n]]);
  }
  (*out.data)[0] = static_cast<S>(total / N);
  if (rec) {
    TensorT<S> lc = logits, oc = out;
    std::vector<int> lab = labels;
    const_cast<TensorT<S>&>(logits).ensure_grad();
    tape->record("softmax_cross_entropy", [=]() mutable {
      const S g = (*oc.grad)[0];
      const S* L2 = lc.ptr();
      S* dL = lc.grad_ptr();
      for (int n = 0; n < N; ++n) {
        const S* row = L2 + static_cast<std::int64_t>(n) * K;
        S* drow = dL + static_cast<std::int64_t>(n) * K;
        S mx = row[0];
        for (int k = 1; k < K; ++k) mx = std::max(mx, row[k]);
        double se = 0;
        for (int k = 0; k < K; ++k) se += std::exp(static_cast<double>(row[k] - mx));
        for (int k = 0; k < K; ++k) {
          const double p = std::exp(static_cast<double>(row[k] - mx)) / se;
          const double ind = (k == lab[n]) ? 1.0 : 0.0;
          drow[k] += static_cast<S>((p - ind) / N * static_cast<double>(g));
        }
      }
    });
  }
  return out;
}

}  // namespace tea
