#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "tea/conv_kernel.hpp"
#include "tea/ops.hpp"
#include "tea/tensor.hpp"

// Plain direct-summation reference implementations, written from the
// operator definitions with no shared machinery with ops.hpp (no tape, no
// loop restructuring, value-at-padded-coordinate helpers instead of bounds
// juggling). They exist to check the fast path and are deliberately slow.

namespace tea::ref {

// x[n,t,c,h,w] with zero padding outside the valid range.
template <typename S>
S padded_at(const TensorT<S>& x, int n, int t, int c, int h, int w) {
  const int T = x.shape[1], C = x.shape[2], H = x.shape[3], W = x.shape[4];
  if (t < 0 || t >= T || h < 0 || h >= H || w < 0 || w >= W) return S(0);
  return (*x.data)[static_cast<std::size_t>(
      ((((static_cast<std::int64_t>(n) * T + t) * C + c) * H + h) * W + w))];
}

template <typename S>
TensorT<S> conv2d(const TensorT<S>& x, const ConvKernelT<S>& k) {
  const int N = x.shape[0], T = x.shape[1], H = x.shape[3], W = x.shape[4];
  const int Ho = (H + 2 * k.pad_h - k.kernel_h) / k.stride_h + 1;
  const int Wo = (W + 2 * k.pad_w - k.kernel_w) / k.stride_w + 1;
  TensorT<S> out = TensorT<S>::zeros({N, T, k.out_channels, Ho, Wo});
  const int ocpg = k.out_channels / k.groups;
  for (int n = 0; n < N; ++n)
    for (int t = 0; t < T; ++t)
      for (int oc = 0; oc < k.out_channels; ++oc) {
        const int g = oc / ocpg;
        for (int oh = 0; oh < Ho; ++oh)
          for (int ow = 0; ow < Wo; ++ow) {
            double acc = k.has_bias() ? static_cast<double>((*k.bias.data)[oc]) : 0.0;
            for (int ip = 0; ip < k.in_per_group; ++ip)
              for (int dh = 0; dh < k.kernel_h; ++dh)
                for (int dw = 0; dw < k.kernel_w; ++dw) {
                  const int ic = g * k.in_per_group + ip;
                  const S wv = (*k.weights.data)[static_cast<std::size_t>(
                      (((static_cast<std::int64_t>(oc) * k.in_per_group + ip) * k.kernel_t) *
                           k.kernel_h +
                       dh) *
                          k.kernel_w +
                      dw)];
                  acc += static_cast<double>(wv) *
                         static_cast<double>(padded_at(x, n, t, ic,
                                                       oh * k.stride_h - k.pad_h + dh,
                                                       ow * k.stride_w - k.pad_w + dw));
                }
            out.at5(n, t, oc, oh, ow) = static_cast<S>(acc);
          }
      }
  return out;
}

template <typename S>
TensorT<S> temporal_conv(const TensorT<S>& x, const ConvKernelT<S>& k) {
  const int N = x.shape[0], T = x.shape[1], H = x.shape[3], W = x.shape[4];
  TensorT<S> out = TensorT<S>::zeros({N, T, k.out_channels, H, W});
  const int ocpg = k.out_channels / k.groups;
  for (int n = 0; n < N; ++n)
    for (int t = 0; t < T; ++t)
      for (int oc = 0; oc < k.out_channels; ++oc) {
        const int g = oc / ocpg;
        for (int h = 0; h < H; ++h)
          for (int w = 0; w < W; ++w) {
            double acc = k.has_bias() ? static_cast<double>((*k.bias.data)[oc]) : 0.0;
            for (int ip = 0; ip < k.in_per_group; ++ip)
              for (int dt = 0; dt < k.kernel_t; ++dt) {
                const int ic = g * k.in_per_group + ip;
                const S wv = (*k.weights.data)[static_cast<std::size_t>(
                    (static_cast<std::int64_t>(oc) * k.in_per_group + ip) * k.kernel_t + dt)];
                acc += static_cast<double>(wv) *
                       static_cast<double>(padded_at(x, n, t + dt - k.pad_t, ic, h, w));
              }
            out.at5(n, t, oc, h, w) = static_cast<S>(acc);
          }
      }
  return out;
}

template <typename S>
TensorT<S> global_avg_pool_spatial(const TensorT<S>& x) {
  const int N = x.shape[0], T = x.shape[1], C = x.shape[2], H = x.shape[3], W = x.shape[4];
  TensorT<S> out = TensorT<S>::zeros({N, T, C, 1, 1});
  for (int n = 0; n < N; ++n)
    for (int t = 0; t < T; ++t)
      for (int c = 0; c < C; ++c) {
        double acc = 0;
        for (int h = 0; h < H; ++h)
          for (int w = 0; w < W; ++w) acc += static_cast<double>(x.at5(n, t, c, h, w));
        out.at5(n, t, c, 0, 0) = static_cast<S>(acc / (static_cast<double>(H) * W));
      }
  return out;
}

template <typename S>
TensorT<S> avg_pool2d(const TensorT<S>& x, int k, int s) {
  const int N = x.shape[0], T = x.shape[1], C = x.shape[2], H = x.shape[3], W = x.shape[4];
  const int Ho = (H - k) / s + 1, Wo = (W - k) / s + 1;
  TensorT<S> out = TensorT<S>::zeros({N, T, C, Ho, Wo});
  for (int n = 0; n < N; ++n)
    for (int t = 0; t < T; ++t)
      for (int c = 0; c < C; ++c)
        for (int oh = 0; oh < Ho; ++oh)
          for (int ow = 0; ow < Wo; ++ow) {
            double acc = 0;
            for (int dh = 0; dh < k; ++dh)
              for (int dw = 0; dw < k; ++dw)
                acc += static_cast<double>(x.at5(n, t, c, oh * s + dh, ow * s + dw));
            out.at5(n, t, c, oh, ow) = static_cast<S>(acc / (k * k));
          }
  return out;
}

template <typename S>
TensorT<S> max_pool2d(const TensorT<S>& x, int k, int s, int pad) {
  const int N = x.shape[0], T = x.shape[1], C = x.shape[2], H = x.shape[3], W = x.shape[4];
  const int Ho = (H + 2 * pad - k) / s + 1, Wo = (W + 2 * pad - k) / s + 1;
  TensorT<S> out = TensorT<S>::zeros({N, T, C, Ho, Wo});
  for (int n = 0; n < N; ++n)
    for (int t = 0; t < T; ++t)
      for (int c = 0; c < C; ++c)
        for (int oh = 0; oh < Ho; ++oh)
          for (int ow = 0; ow < Wo; ++ow) {
            S best = std::numeric_limits<S>::lowest();
            for (int dh = 0; dh < k; ++dh)
              for (int dw = 0; dw < k; ++dw) {
                const int ih = oh * s - pad + dh, iw = ow * s - pad + dw;
                if (ih < 0 || ih >= H || iw < 0 || iw >= W) continue;
                best = std::max(best, x.at5(n, t, c, ih, iw));
              }
            out.at5(n, t, c, oh, ow) = best;
          }
  return out;
}

// Forward-only batch norm; takes stats by value so it cannot share state
// with the checked implementation.
template <typename S>
TensorT<S> batch_norm(const TensorT<S>& x, const std::vector<S>& gamma,
                      const std::vector<S>& beta, std::vector<S> running_mean,
                      std::vector<S> running_var, double eps, bool training) {
  const int N = x.shape[0], T = x.shape[1], C = x.shape[2], H = x.shape[3], W = x.shape[4];
  std::vector<double> mu(C, 0.0), var(C, 0.0);
  if (training) {
    const double m = static_cast<double>(N) * T * H * W;
    for (int c = 0; c < C; ++c) {
      double acc = 0;
      for (int n = 0; n < N; ++n)
        for (int t = 0; t < T; ++t)
          for (int h = 0; h < H; ++h)
            for (int w = 0; w < W; ++w) acc += static_cast<double>(x.at5(n, t, c, h, w));
      mu[c] = acc / m;
      double v = 0;
      for (int n = 0; n < N; ++n)
        for (int t = 0; t < T; ++t)
          for (int h = 0; h < H; ++h)
            for (int w = 0; w < W; ++w) {
              const double d = static_cast<double>(x.at5(n, t, c, h, w)) - mu[c];
              v += d * d;
            }
      var[c] = v / m;
    }
  } else {
    for (int c = 0; c < C; ++c) {
      mu[c] = static_cast<double>(running_mean[c]);
      var[c] = static_cast<double>(running_var[c]);
    }
  }
  TensorT<S> out = TensorT<S>::zeros(x.shape);
  for (int n = 0; n < N; ++n)
    for (int t = 0; t < T; ++t)
      for (int c = 0; c < C; ++c)
        for (int h = 0; h < H; ++h)
          for (int w = 0; w < W; ++w)
            out.at5(n, t, c, h, w) = static_cast<S>(
                static_cast<double>(gamma[c]) *
                    (static_cast<double>(x.at5(n, t, c, h, w)) - mu[c]) /
                    std::sqrt(var[c] + eps) +
                static_cast<double>(beta[c]));
  return out;
}

template <typename S>
double softmax_cross_entropy(const TensorT<S>& logits, const std::vector<int>& labels) {
  const int N = logits.shape[0], K = logits.shape[1];
  double total = 0;
  for (int n = 0; n < N; ++n) {
    double denom = 0;
    for (int k = 0; k < K; ++k)
      denom += std::exp(static_cast<double>((*logits.data)[n * K + k]));
    const double p =
        std::exp(static_cast<double>((*logits.data)[n * K + labels[n]])) / denom;
    total += -std::log(p);
  }
  return total / N;
}

template <typename S>
TensorT<S> temporal_shift(const TensorT<S>& x) {
  const int N = x.shape[0], T = x.shape[1], C = x.shape[2], H = x.shape[3], W = x.shape[4];
  const int n8 = C / 8;
  TensorT<S> out = TensorT<S>::zeros(x.shape);
  for (int n = 0; n < N; ++n)
    for (int t = 0; t < T; ++t)
      for (int c = 0; c < C; ++c)
        for (int h = 0; h < H; ++h)
          for (int w = 0; w < W; ++w) {
            S v;
            if (c < n8)
              v = padded_at(x, n, t + 1, c, h, w);
            else if (c < 2 * n8)
              v = padded_at(x, n, t - 1, c, h, w);
            else
              v = x.at5(n, t, c, h, w);
            out.at5(n, t, c, h, w) = v;
          }
  return out;
}

// Motion-excitation attention computed directly from its definition:
// reduce, transform the next frame, subtract, pool, expand, squash to
// (-1,1). Returns the [N,T,C,1,1] attention tensor.
template <typename S>
TensorT<S> me_attention(const TensorT<S>& x, const ConvKernelT<S>& conv_red,
                        const ConvKernelT<S>& conv_trans, const ConvKernelT<S>& conv_exp) {
  const int N = x.shape[0], T = x.shape[1];
  TensorT<S> xr = conv2d(x, conv_red);
  const int Cr = xr.shape[2], H = xr.shape[3], W = xr.shape[4];
  TensorT<S> xt = conv2d(xr, conv_trans);
  TensorT<S> motion = TensorT<S>::zeros({N, T, Cr, H, W});
  for (int n = 0; n < N; ++n)
    for (int t = 0; t + 1 < T; ++t)
      for (int c = 0; c < Cr; ++c)
        for (int h = 0; h < H; ++h)
          for (int w = 0; w < W; ++w)
            motion.at5(n, t, c, h, w) = xt.at5(n, t + 1, c, h, w) - xr.at5(n, t, c, h, w);
  TensorT<S> pooled = global_avg_pool_spatial(motion);
  TensorT<S> e = conv2d(pooled, conv_exp);
  const int C = e.shape[2];
  TensorT<S> a = TensorT<S>::zeros({N, T, C, 1, 1});
  for (int n = 0; n < N; ++n)
    for (int t = 0; t < T; ++t)
      for (int c = 0; c < C; ++c) {
        const double s = 1.0 / (1.0 + std::exp(-static_cast<double>(e.at5(n, t, c, 0, 0))));
        a.at5(n, t, c, 0, 0) = static_cast<S>(2.0 * s - 1.0);
      }
  return a;
}

// Hierarchical four-way split-aggregate forward (no norm layers), straight
// from the cascade definition. conv_temp/conv_spa hold three kernels for
// fragments 2..4.
template <typename S>
TensorT<S> mta_forward_bare(const TensorT<S>& x,
                            const std::vector<ConvKernelT<S>>& conv_temp,
                            const std::vector<ConvKernelT<S>>& conv_spa) {
  const int C = x.shape[2];
  const int frag = C / 4;
  const int N = x.shape[0], T = x.shape[1], H = x.shape[3], W = x.shape[4];
  auto slice = [&](int i) {
    TensorT<S> out = TensorT<S>::zeros({N, T, frag, H, W});
    for (int n = 0; n < N; ++n)
      for (int t = 0; t < T; ++t)
        for (int c = 0; c < frag; ++c)
          for (int h = 0; h < H; ++h)
            for (int w = 0; w < W; ++w)
              out.at5(n, t, c, h, w) = x.at5(n, t, i * frag + c, h, w);
    return out;
  };
  std::vector<TensorT<S>> outs(4);
  outs[0] = slice(0);
  TensorT<S> prev;
  for (int i = 1; i < 4; ++i) {
    TensorT<S> in = slice(i);
    if (i >= 2) {
      for (std::int64_t j = 0; j < in.numel(); ++j) (*in.data)[j] += (*prev.data)[j];
    }
    TensorT<S> z = temporal_conv(in, conv_temp[i - 1]);
    outs[i] = conv2d(z, conv_spa[i - 1]);
    prev = outs[i];
  }
  TensorT<S> out = TensorT<S>::zeros(x.shape);
  for (int i = 0; i < 4; ++i)
    for (int n = 0; n < N; ++n)
      for (int t = 0; t < T; ++t)
        for (int c = 0; c < frag; ++c)
          for (int h = 0; h < H; ++h)
            for (int w = 0; w < W; ++w)
              out.at5(n, t, i * frag + c, h, w) = outs[i].at5(n, t, c, h, w);
  return out;
}

}  // namespace tea::ref
