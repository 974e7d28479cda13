#pragma once

#include <array>
#include <functional>

#include "tea/conv_kernel.hpp"
#include "tea/ops.hpp"
#include "tea/shift.hpp"

namespace tea {

// Multiple temporal aggregation. The channel axis is split into four equal
// fragments; fragment 1 passes through, fragments 2..4 run a channel-wise
// temporal conv followed by a 3x3 spatial conv, and each fragment past the
// second also receives the previous fragment's output before its convs:
//
//   y1 = x1
//   y2 = spa2(temp2(x2))
//   yi = spa_i(temp_i(x_i + y_{i-1}))     i = 3, 4
//
// so the temporal radii of the fragments are (0, 1, 2, 3) frames and the
// cascade costs a fraction of a dense 3x3 conv at full width.
//
// When the block is strided, the spatial convs change resolution, so the
// stride-1 cascade above cannot add y_{i-1} (shapes differ). In that case
// the cascade instead carries the temporal-conv output z_{i-1}, which is
// still full resolution and already carries the accumulated temporal
// extent; the spatial convs then downsample each fragment independently:
//
//   y1 = avgpool(x1)
//   z2 = temp2(x2);            y2 = spa2(z2)
//   zi = temp_i(x_i + z_{i-1}); yi = spa_i(z_i)     i = 3, 4
//
// This keeps per-fragment temporal radii (0,1,2,3) in strided blocks too.
template <typename S>
struct MTAModuleT {
  int channels = 0;
  int stride = 1;
  std::array<ConvKernelT<S>, 3> conv_temp;  // channel-wise, 3 taps, fragments 2..4
  std::array<ConvKernelT<S>, 3> conv_spa;   // 3x3 dense within the fragment
  std::array<BatchNormT<S>, 3> bn_spa;

  // random_temporal draws the temporal taps from the usual random init;
  // the default is the shift pattern (degenerating to the identity tap for
  // fragments narrower than 8 channels), which trains from a strong
  // temporal prior.
  static MTAModuleT make(int channels, int stride, std::mt19937& rng,
                         bool random_temporal = false) {
    if (channels <= 0 || channels % 4 != 0)
      throw ValueError("mta: channels must be divisible by 4");
    if (stride <= 0) throw ValueError("mta: stride must be positive");
    MTAModuleT m;
    m.channels = channels;
    m.stride = stride;
    const int frag = channels / 4;
    for (int i = 0; i < 3; ++i) {
      m.conv_temp[i] = random_temporal ? make_temporal_cw<S>(frag, 3, rng, true)
                                       : shift_init_kernel<S>(frag);
      m.conv_spa[i] = make_conv2d<S>(frag, frag, 3, stride, 1, rng, /*bias=*/false);
      m.bn_spa[i] = BatchNormT<S>::make(frag);
    }
    return m;
  }

  std::vector<TensorT<S>*> params() {
    std::vector<TensorT<S>*> p;
    for (int i = 0; i < 3; ++i) {
      for (auto* t : conv_temp[i].params()) p.push_back(t);
      for (auto* t : conv_spa[i].params()) p.push_back(t);
      for (auto* t : bn_spa[i].params()) p.push_back(t);
    }
    return p;
  }

  template <typename U>
  MTAModuleT<U> cast() const {
    MTAModuleT<U> o;
    o.channels = channels;
    o.stride = stride;
    for (int i = 0; i < 3; ++i) {
      o.conv_temp[i] = conv_temp[i].template cast<U>();
      o.conv_spa[i] = conv_spa[i].template cast<U>();
      o.bn_spa[i] = bn_spa[i].template cast<U>();
    }
    return o;
  }
};

using MTAModule = MTAModuleT<float>;

// `bare` drops the batch norm + relu after each spatial conv, leaving the
// pure cascade (used by oracles and impulse probes).
template <typename S>
TensorT<S> mta_forward(TapeT<S>* tape, MTAModuleT<S>& m, const TensorT<S>& x,
                       bool training = false, bool bare = false) {
  int N, T, C, H, W;
  expect5(x, N, T, C, H, W, "mta_forward");
  if (C != m.channels) throw ShapeError("mta_forward: channel mismatch");
  if (m.stride != 1 && (H % m.stride != 0 || W % m.stride != 0))
    throw ShapeError("mta_forward: stride " + std::to_string(m.stride) +
                     " needs H and W divisible by it, got " + std::to_string(H) + "x" +
                     std::to_string(W));
  const int frag = C / 4;
  std::vector<TensorT<S>> outs(4);

  if (m.stride == 1) {
    outs[0] = channel_slice(tape, x, 0, frag);
    TensorT<S> prev;
    for (int i = 1; i < 4; ++i) {
      TensorT<S> xi = channel_slice(tape, x, i * frag, (i + 1) * frag);
      TensorT<S> in = (i >= 2) ? add(tape, xi, prev) : xi;
      TensorT<S> z = temporal_conv(tape, in, m.conv_temp[i - 1]);
      TensorT<S> y = conv2d(tape, z, m.conv_spa[i - 1]);
      if (!bare) y = relu(tape, batch_norm(tape, y, m.bn_spa[i - 1], training));
      outs[i] = y;
      prev = y;
    }
  } else {
    outs[0] = avg_pool2d(tape, channel_slice(tape, x, 0, frag), m.stride, m.stride);
    TensorT<S> carrier;
    for (int i = 1; i < 4; ++i) {
      TensorT<S> xi = channel_slice(tape, x, i * frag, (i + 1) * frag);
      TensorT<S> in = (i >= 2) ? add(tape, xi, carrier) : xi;
      TensorT<S> z = temporal_conv(tape, in, m.conv_temp[i - 1]);
      carrier = z;
      TensorT<S> y = conv2d(tape, z, m.conv_spa[i - 1]);
      if (!bare) y = relu(tape, batch_norm(tape, y, m.bn_spa[i - 1], training));
      outs[i] = y;
    }
  }
  return channel_concat(tape, outs);
}

// Conv+BN parameter count of an MTA stage at width C, for comparing with
// the 9*C^2 weights of a dense 3x3 conv.
inline std::int64_t mta_param_count(int channels) {
  const std::int64_t frag = channels / 4;
  return 3 * (3 * frag)            // temporal taps
         + 3 * (frag * frag * 9)   // spatial convs
         + 3 * (2 * frag);         // batch norm affine
}

// ---------------------------------------------------------------------------
// impulse probes
// ---------------------------------------------------------------------------

// Feeds a single impulse frame (one lit channel per fragment, centre pixel,
// frame t0 = T/2) through `fwd` and reports, per output fragment, the
// largest |t - t0| whose frame holds any energy above a relative floor.
// Frames outside the true support are structural zeros, so the floor only
// guards against printable noise.
template <typename S, typename Fn>
std::array<int, 4> probe_temporal_radii(Fn&& fwd, int T, int C, int H, int W) {
  if (C % 4 != 0) throw ValueError("probe_temporal_radii: C must be divisible by 4");
  const int frag = C / 4;
  const int t0 = T / 2;
  TensorT<S> x = TensorT<S>::zeros({1, T, C, H, W});
  for (int i = 0; i < 4; ++i) x.at5(0, t0, i * frag, H / 2, W / 2) = S(1);
  TensorT<S> y = fwd(x);
  const int To = y.shape[1], Co = y.shape[2], Ho = y.shape[3], Wo = y.shape[4];
  if (Co != C) throw ShapeError("probe_temporal_radii: probe map changed channel count");
  S peak = 0;
  for (std::int64_t i = 0; i < y.numel(); ++i) peak = std::max(peak, std::abs((*y.data)[i]));
  const S tol = peak * static_cast<S>(1e-9);
  std::array<int, 4> radii{0, 0, 0, 0};
  for (int f = 0; f < 4; ++f)
    for (int t = 0; t < To; ++t)
      for (int c = f * frag; c < (f + 1) * frag; ++c)
        for (int h = 0; h < Ho; ++h)
          for (int w = 0; w < Wo; ++w)
            if (std::abs(y.at5(0, t, c, h, w)) > tol)
              radii[f] = std::max(radii[f], std::abs(t - t0));
  return radii;
}

// Spatial analogue: centre-pixel impulse, radius is the largest Chebyshev
// distance from the centre with energy. Only meaningful at stride 1.
template <typename S, typename Fn>
std::array<int, 4> probe_spatial_radii(Fn&& fwd, int T, int C, int H, int W) {
  if (C % 4 != 0) throw ValueError("probe_spatial_radii: C must be divisible by 4");
  const int frag = C / 4;
  const int t0 = T / 2, h0 = H / 2, w0 = W / 2;
  TensorT<S> x = TensorT<S>::zeros({1, T, C, H, W});
  for (int i = 0; i < 4; ++i) x.at5(0, t0, i * frag, h0, w0) = S(1);
  TensorT<S> y = fwd(x);
  S peak = 0;
  for (std::int64_t i = 0; i < y.numel(); ++i) peak = std::max(peak, std::abs((*y.data)[i]));
  const S tol = peak * static_cast<S>(1e-9);
  std::array<int, 4> radii{0, 0, 0, 0};
  for (int f = 0; f < 4; ++f)
    for (int t = 0; t < y.shape[1]; ++t)
      for (int c = f * frag; c < (f + 1) * frag; ++c)
        for (int h = 0; h < y.shape[3]; ++h)
          for (int w = 0; w < y.shape[4]; ++w)
            if (std::abs(y.at5(0, t, c, h, w)) > tol)
              radii[f] = std::max(radii[f], std::max(std::abs(h - h0), std::abs(w - w0)));
  return radii;
}

// Per-fragment temporal radii of one module, random temporal taps, bare
// cascade. The expected result is (0,1,2,3) for any seed.
template <typename S>
std::array<int, 4> mta_probe_temporal_radii(int channels, int stride, std::mt19937& rng,
                                            int T = 9, int H = 6, int W = 6) {
  MTAModuleT<S> m = MTAModuleT<S>::make(channels, stride, rng, /*random_temporal=*/true);
  return probe_temporal_radii<S>(
      [&](const TensorT<S>& x) { return mta_forward<S>(nullptr, m, x, false, true); }, T,
      channels, H, W);
}

template <typename S>
std::array<int, 4> mta_probe_spatial_radii(int channels, std::mt19937& rng, int T = 3,
                                           int HW = 9) {
  MTAModuleT<S> m = MTAModuleT<S>::make(channels, 1, rng, /*random_temporal=*/true);
  return probe_spatial_radii<S>(
      [&](const TensorT<S>& x) { return mta_forward<S>(nullptr, m, x, false, true); }, T,
      channels, HW, HW);
}

// ---------------------------------------------------------------------------
// parallel split variant
// ---------------------------------------------------------------------------

// Baseline used for ablations: one full-width channel-wise temporal conv in
// front, then the four-way spatial cascade without any temporal convs
// inside. Temporal radius is 1 regardless of fragment.
template <typename S>
struct Res2NetTemporalT {
  int channels = 0;
  int stride = 1;
  ConvKernelT<S> conv_temp;  // full width, channel-wise
  std::array<ConvKernelT<S>, 3> conv_spa;
  std::array<BatchNormT<S>, 3> bn_spa;

  static Res2NetTemporalT make(int channels, int stride, std::mt19937& rng,
                               bool random_temporal = false) {
    if (channels <= 0 || channels % 4 != 0)
      throw ValueError("res2net_temporal: channels must be divisible by 4");
    Res2NetTemporalT m;
    m.channels = channels;
    m.stride = stride;
    m.conv_temp = random_temporal ? make_temporal_cw<S>(channels, 3, rng, true)
                                  : shift_init_kernel<S>(channels);
    const int frag = channels / 4;
    for (int i = 0; i < 3; ++i) {
      m.conv_spa[i] = make_conv2d<S>(frag, frag, 3, stride, 1, rng, false);
      m.bn_spa[i] = BatchNormT<S>::make(frag);
    }
    return m;
  }

  std::vector<TensorT<S>*> params() {
    std::vector<TensorT<S>*> p;
    for (auto* t : conv_temp.params()) p.push_back(t);
    for (int i = 0; i < 3; ++i) {
      for (auto* t : conv_spa[i].params()) p.push_back(t);
      for (auto* t : bn_spa[i].params()) p.push_back(t);
    }
    return p;
  }

  template <typename U>
  Res2NetTemporalT<U> cast() const {
    Res2NetTemporalT<U> o;
    o.channels = channels;
    o.stride = stride;
    o.conv_temp = conv_temp.template cast<U>();
    for (int i = 0; i < 3; ++i) {
      o.conv_spa[i] = conv_spa[i].template cast<U>();
      o.bn_spa[i] = bn_spa[i].template cast<U>();
    }
    return o;
  }
};

using Res2NetTemporal = Res2NetTemporalT<float>;

template <typename S>
TensorT<S> res2net_temporal_forward(TapeT<S>* tape, Res2NetTemporalT<S>& m,
                                    const TensorT<S>& x, bool training = false,
                                    bool bare = false) {
  int N, T, C, H, W;
  expect5(x, N, T, C, H, W, "res2net_temporal_forward");
  if (C != m.channels) throw ShapeError("res2net_temporal_forward: channel mismatch");
  if (m.stride != 1 && (H % m.stride != 0 || W % m.stride != 0))
    throw ShapeError("res2net_temporal_forward: stride " + std::to_string(m.stride) +
                     " needs H and W divisible by it, got " + std::to_string(H) + "x" +
                     std::to_string(W));
  TensorT<S> mixed = temporal_conv(tape, x, m.conv_temp);
  const int frag = C / 4;
  std::vector<TensorT<S>> outs(4);
  if (m.stride == 1) {
    outs[0] = channel_slice(tape, mixed, 0, frag);
    TensorT<S> prev;
    for (int i = 1; i < 4; ++i) {
      TensorT<S> xi = channel_slice(tape, mixed, i * frag, (i + 1) * frag);
      TensorT<S> in = (i >= 2) ? add(tape, xi, prev) : xi;
      TensorT<S> y = conv2d(tape, in, m.conv_spa[i - 1]);
      if (!bare) y = relu(tape, batch_norm(tape, y, m.bn_spa[i - 1], training));
      outs[i] = y;
      prev = y;
    }
  } else {
    // strided blocks run the fragments in parallel
    outs[0] = avg_pool2d(tape, channel_slice(tape, mixed, 0, frag), m.stride, m.stride);
    for (int i = 1; i < 4; ++i) {
      TensorT<S> xi = channel_slice(tape, mixed, i * frag, (i + 1) * frag);
      TensorT<S> y = conv2d(tape, xi, m.conv_spa[i - 1]);
      if (!bare) y = relu(tape, batch_norm(tape, y, m.bn_spa[i - 1], training));
      outs[i] = y;
    }
  }
  return channel_concat(tape, outs);
}

}  // namespace tea
