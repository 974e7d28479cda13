#pragma once

#include "tea/conv_kernel.hpp"
#include "tea/ops.hpp"

namespace tea {

// Partial temporal shift over the channel axis. With n8 = C/8 (floor):
//   channels [0, n8)      read from frame t+1 (shift left),
//   channels [n8, 2*n8)   read from frame t-1 (shift right),
//   the rest              pass through.
// Out-of-range frames are zero. Exactly equivalent to a channel-wise
// 3-tap temporal conv whose per-channel kernels are [0,0,1], [1,0,0]
// and [0,1,0]; see shift_init_kernel below.
template <typename S>
TensorT<S> temporal_shift(TapeT<S>* tape, const TensorT<S>& x) {
  int N, T, C, H, W;
  expect5(x, N, T, C, H, W, "temporal_shift");
  const int n8 = C / 8;
  const bool rec = detail::want_grad<S>(tape, {&x});
  TensorT<S> out = detail::make_output<S>(x.shape, tape, rec);
  const std::int64_t plane = static_cast<std::int64_t>(H) * W;
  const S* X_ = x.ptr();
  S* O_ = out.ptr();
  auto off = [&](int n, int t, int c) {
    return ((static_cast<std::int64_t>(n) * T + t) * C + c) * plane;
  };
  for (int n = 0; n < N; ++n)
    for (int t = 0; t < T; ++t)
      for (int c = 0; c < C; ++c) {
        int ts;
        if (c < n8)
          ts = t + 1;  // take from the future frame
        else if (c < 2 * n8)
          ts = t - 1;  // take from the past frame
        else
          ts = t;
        if (ts < 0 || ts >= T) continue;  // output stays zero
        std::copy_n(X_ + off(n, ts, c), plane, O_ + off(n, t, c));
      }
  if (rec) {
    TensorT<S> xc = x, oc = out;
    const_cast<TensorT<S>&>(x).ensure_grad();
    tape->record("temporal_shift", [=]() mutable {
      const S* G_ = oc.grad_ptr();
      S* dX = xc.grad_ptr();
      auto o2 = [&](int n, int t, int c) {
        return ((static_cast<std::int64_t>(n) * T + t) * C + c) * plane;
      };
      for (int n = 0; n < N; ++n)
        for (int t = 0; t < T; ++t)
          for (int c = 0; c < C; ++c) {
            int ts;
            if (c < n8)
              ts = t + 1;
            else if (c < 2 * n8)
              ts = t - 1;
            else
              ts = t;
            if (ts < 0 || ts >= T) continue;
            const S* gp = G_ + o2(n, t, c);
            S* dp = dX + o2(n, ts, c);
            for (std::int64_t i = 0; i < plane; ++i) dp[i] += gp[i];
          }
    });
  }
  return out;
}

// Channel-wise 3-tap temporal conv initialized so that applying it equals
// temporal_shift exactly: kernel layout per channel is [w(t-1), w(t), w(t+1)],
// so "read from t+1" is [0,0,1] and "read from t-1" is [1,0,0].
template <typename S>
ConvKernelT<S> shift_init_kernel(int channels) {
  if (channels <= 0) throw ValueError("shift_init_kernel: channels must be positive");
  ConvKernelT<S> k;
  k.out_channels = channels;
  k.in_per_group = 1;
  k.groups = channels;
  k.kernel_t = 3;
  k.pad_t = 1;
  k.weights = TensorT<S>::zeros({channels, 1, 3, 1, 1}, true);
  const int n8 = channels / 8;
  S* w = k.weights.ptr();
  for (int c = 0; c < channels; ++c) {
    if (c < n8)
      w[c * 3 + 2] = S(1);
    else if (c < 2 * n8)
      w[c * 3 + 0] = S(1);
    else
      w[c * 3 + 1] = S(1);
  }
  k.validate();
  return k;
}

}  // namespace tea
