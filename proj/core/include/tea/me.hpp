#pragma once

#include <optional>

#include "tea/conv_kernel.hpp"
#include "tea/ops.hpp"

namespace tea {

// Motion excitation. Computes per-channel attention from frame-to-frame
// feature differences in a reduced channel space:
//   xr  = 1x1 reduce (C -> C/r)
//   m_t = cw3x3(xr_{t+1}) - xr_t   for t < T, zero for the last frame
//   a   = 2*sigmoid(1x1 expand(spatial_mean(m))) - 1      in (-1, 1)
// and returns x + x * a (channel-broadcast), keeping the residual path so
// static content survives.
template <typename S>
struct MEModuleT {
  int channels = 0;
  int reduction = 16;
  ConvKernelT<S> conv_red;    // 1x1, C -> C/r, bias
  ConvKernelT<S> conv_trans;  // 3x3 channel-wise on C/r, no bias
  ConvKernelT<S> conv_exp;    // 1x1, C/r -> C, bias
  bool use_batch_norm = false;
  std::optional<BatchNormT<S>> bn_red, bn_exp;

  static MEModuleT make(int channels, int reduction, std::mt19937& rng,
                        bool with_bn = false) {
    if (channels <= 0 || reduction <= 0 || channels % reduction != 0)
      throw ValueError("me: reduction must divide channels");
    MEModuleT m;
    m.channels = channels;
    m.reduction = reduction;
    const int cr = channels / reduction;
    m.conv_red = make_conv2d<S>(channels, cr, 1, 1, 0, rng, /*bias=*/true);
    // transform starts as identity so the initial motion signal is a plain
    // frame difference
    ConvKernelT<S> tr;
    tr.out_channels = cr;
    tr.in_per_group = 1;
    tr.groups = cr;
    tr.kernel_h = tr.kernel_w = 3;
    tr.pad_h = tr.pad_w = 1;
    tr.weights = TensorT<S>::zeros({cr, 1, 1, 3, 3}, true);
    for (int c = 0; c < cr; ++c) (*tr.weights.data)[static_cast<std::size_t>(c) * 9 + 4] = S(1);
    tr.validate();
    m.conv_trans = tr;
    m.conv_exp = make_conv2d<S>(cr, channels, 1, 1, 0, rng, /*bias=*/true);
    m.use_batch_norm = with_bn;
    if (with_bn) {
      m.bn_red = BatchNormT<S>::make(cr);
      m.bn_exp = BatchNormT<S>::make(channels);
    }
    return m;
  }

  std::vector<TensorT<S>*> params() {
    std::vector<TensorT<S>*> p;
    for (auto* t : conv_red.params()) p.push_back(t);
    for (auto* t : conv_trans.params()) p.push_back(t);
    for (auto* t : conv_exp.params()) p.push_back(t);
    if (bn_red) for (auto* t : bn_red->params()) p.push_back(t);
    if (bn_exp) for (auto* t : bn_exp->params()) p.push_back(t);
    return p;
  }

  template <typename U>
  MEModuleT<U> cast() const {
    MEModuleT<U> o;
    o.channels = channels;
    o.reduction = reduction;
    o.conv_red = conv_red.template cast<U>();
    o.conv_trans = conv_trans.template cast<U>();
    o.conv_exp = conv_exp.template cast<U>();
    o.use_batch_norm = use_batch_norm;
    if (bn_red) o.bn_red = bn_red->template cast<U>();
    if (bn_exp) o.bn_exp = bn_exp->template cast<U>();
    return o;
  }
};

using MEModule = MEModuleT<float>;

// The attention tensor a in (-1,1), shape [N,T,C,1,1].
template <typename S>
TensorT<S> me_attention(TapeT<S>* tape, MEModuleT<S>& m, const TensorT<S>& x,
                        bool training = false) {
  int N, T, C, H, W;
  expect5(x, N, T, C, H, W, "me_attention");
  if (C != m.channels) throw ShapeError("me_attention: channel mismatch");
  const int cr = m.channels / m.reduction;

  TensorT<S> pooled;  // [N,T,cr,1,1]
  if (T == 1) {
    // no successor frame anywhere: motion is identically zero
    pooled = TensorT<S>::zeros({N, 1, cr, 1, 1});
  } else {
    TensorT<S> xr = conv2d(tape, x, m.conv_red);
    if (m.use_batch_norm) xr = batch_norm(tape, xr, *m.bn_red, training);
    TensorT<S> xt = conv2d(tape, xr, m.conv_trans);
    TensorT<S> next = temporal_slice(tape, xt, 1, T);      // transformed frames 2..T
    TensorT<S> cur = temporal_slice(tape, xr, 0, T - 1);   // raw frames 1..T-1
    TensorT<S> diff = sub(tape, next, cur);
    TensorT<S> motion = pad_temporal_end(tape, diff, 1);   // last frame has no motion
    pooled = global_avg_pool_spatial(tape, motion);
  }
  TensorT<S> e = conv2d(tape, pooled, m.conv_exp);
  if (m.use_batch_norm) e = batch_norm(tape, e, *m.bn_exp, training);
  return affine(tape, sigmoid(tape, e), S(2), S(-1));
}

// x + x * a.
template <typename S>
TensorT<S> me_forward(TapeT<S>* tape, MEModuleT<S>& m, const TensorT<S>& x,
                      bool training = false) {
  TensorT<S> a = me_attention(tape, m, x, training);
  return add(tape, x, mul_broadcast_channel(tape, x, a));
}

// Ablation without the inner residual: plain gating x * a. Discards static
// content wherever attention saturates low.
template <typename S>
TensorT<S> me_forward_no_residual(TapeT<S>* tape, MEModuleT<S>& m, const TensorT<S>& x,
                                  bool training = false) {
  TensorT<S> a = me_attention(tape, m, x, training);
  return mul_broadcast_channel(tape, x, a);
}

// Squeeze-and-excitation baseline: same placement as motion excitation but
// attention comes from the frame's own pooled features, so it is blind to
// temporal order. Gate in (0,1), applied multiplicatively (no residual).
template <typename S>
struct SEModuleT {
  int channels = 0;
  int reduction = 16;
  ConvKernelT<S> fc1, fc2;  // 1x1 convs acting on pooled [N,T,C,1,1]

  static SEModuleT make(int channels, int reduction, std::mt19937& rng) {
    if (channels <= 0 || reduction <= 0 || channels % reduction != 0)
      throw ValueError("se: reduction must divide channels");
    SEModuleT m;
    m.channels = channels;
    m.reduction = reduction;
    m.fc1 = make_conv2d<S>(channels, channels / reduction, 1, 1, 0, rng, true);
    m.fc2 = make_conv2d<S>(channels / reduction, channels, 1, 1, 0, rng, true);
    return m;
  }

  std::vector<TensorT<S>*> params() {
    std::vector<TensorT<S>*> p;
    for (auto* t : fc1.params()) p.push_back(t);
    for (auto* t : fc2.params()) p.push_back(t);
    return p;
  }

  template <typename U>
  SEModuleT<U> cast() const {
    SEModuleT<U> o;
    o.channels = channels;
    o.reduction = reduction;
    o.fc1 = fc1.template cast<U>();
    o.fc2 = fc2.template cast<U>();
    return o;
  }
};

using SEModule = SEModuleT<float>;

template <typename S>
TensorT<S> se_forward(TapeT<S>* tape, SEModuleT<S>& m, const TensorT<S>& x) {
  TensorT<S> z = global_avg_pool_spatial(tape, x);
  TensorT<S> h = relu(tape, conv2d(tape, z, m.fc1));
  TensorT<S> gate = sigmoid(tape, conv2d(tape, h, m.fc2));
  return mul_broadcast_channel(tape, x, gate);
}

}  // namespace tea
