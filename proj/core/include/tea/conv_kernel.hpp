#pragma once

#include <random>

#include "tea/errors.hpp"
#include "tea/tensor.hpp"

namespace tea {

// Convolution weights plus the geometry needed to apply them. One struct
// covers the three cases used here:
//   * 2D spatial conv (kernel_t == 1), grouped or dense
//   * channel-wise temporal conv (kernel_h == kernel_w == 1,
//     groups == channels, one input channel per group)
//   * 1x1 "linear" conv
// Weight layout is [out_channels, in_per_group, kt, kh, kw], row major.
template <typename S>
struct ConvKernelT {
  int out_channels = 0;
  int in_per_group = 0;
  int groups = 1;
  int kernel_t = 1, kernel_h = 1, kernel_w = 1;
  int stride_h = 1, stride_w = 1;
  int pad_t = 0, pad_h = 0, pad_w = 0;
  TensorT<S> weights;
  TensorT<S> bias;  // undefined data => no bias term

  int in_channels() const { return in_per_group * groups; }
  bool has_bias() const { return bias.defined(); }

  void validate() const {
    if (out_channels <= 0 || in_per_group <= 0 || groups <= 0)
      throw ValueError("conv kernel: channel counts must be positive");
    if (out_channels % groups != 0)
      throw ValueError("conv kernel: out_channels not divisible by groups");
    if (kernel_t <= 0 || kernel_h <= 0 || kernel_w <= 0 || stride_h <= 0 || stride_w <= 0)
      throw ValueError("conv kernel: kernel and stride must be positive");
    if (pad_t < 0 || pad_h < 0 || pad_w < 0)
      throw ValueError("conv kernel: negative padding");
    Shape want{out_channels, in_per_group, kernel_t, kernel_h, kernel_w};
    if (weights.shape != want)
      throw ShapeError("conv kernel: weights " + shape_str(weights.shape) +
                       " do not match geometry " + shape_str(want));
    if (has_bias() && bias.shape != Shape{out_channels})
      throw ShapeError("conv kernel: bias shape " + shape_str(bias.shape));
  }

  std::vector<TensorT<S>*> params() {
    std::vector<TensorT<S>*> p{&weights};
    if (has_bias()) p.push_back(&bias);
    return p;
  }

  template <typename U>
  ConvKernelT<U> cast() const {
    ConvKernelT<U> k;
    k.out_channels = out_channels;
    k.in_per_group = in_per_group;
    k.groups = groups;
    k.kernel_t = kernel_t;
    k.kernel_h = kernel_h;
    k.kernel_w = kernel_w;
    k.stride_h = stride_h;
    k.stride_w = stride_w;
    k.pad_t = pad_t;
    k.pad_h = pad_h;
    k.pad_w = pad_w;
    k.weights = weights.template cast<U>();
    if (has_bias()) k.bias = bias.template cast<U>();
    return k;
  }
};

using ConvKernel = ConvKernelT<float>;

// Dense (or grouped) 2D spatial conv, He-initialized, zero bias.
template <typename S>
ConvKernelT<S> make_conv2d(int in_ch, int out_ch, int ksize, int stride, int pad,
                           std::mt19937& rng, bool with_bias, int groups = 1) {
  if (groups <= 0 || in_ch % groups != 0)
    throw ValueError("make_conv2d: in_channels not divisible by groups");
  ConvKernelT<S> k;
  k.out_channels = out_ch;
  k.in_per_group = in_ch / groups;
  k.groups = groups;
  k.kernel_h = k.kernel_w = ksize;
  k.stride_h = k.stride_w = stride;
  k.pad_h = k.pad_w = pad;
  k.weights = TensorT<S>::zeros({out_ch, k.in_per_group, 1, ksize, ksize}, true);
  double fan_in = static_cast<double>(k.in_per_group) * ksize * ksize;
  fill_normal(k.weights, rng, std::sqrt(2.0 / fan_in));
  if (with_bias) k.bias = TensorT<S>::zeros({out_ch}, true);
  k.validate();
  return k;
}

// Channel-wise temporal conv: one kernel_t-tap filter per channel, output
// length equal to input length (odd kernel, symmetric zero padding).
template <typename S>
ConvKernelT<S> make_temporal_cw(int channels, int kernel_t, std::mt19937& rng,
                                bool random_init) {
  if (kernel_t % 2 == 0) throw ValueError("temporal conv kernel must be odd");
  ConvKernelT<S> k;
  k.out_channels = channels;
  k.in_per_group = 1;
  k.groups = channels;
  k.kernel_t = kernel_t;
  k.pad_t = (kernel_t - 1) / 2;
  k.weights = TensorT<S>::zeros({channels, 1, kernel_t, 1, 1}, true);
  if (random_init) {
    fill_normal(k.weights, rng, std::sqrt(2.0 / kernel_t));
  } else {
    // identity: centre tap 1
    for (int c = 0; c < channels; ++c)
      (*k.weights.data)[static_cast<std::size_t>(c) * kernel_t + kernel_t / 2] = S(1);
  }
  k.validate();
  return k;
}

// Dense temporal conv mixing all channels (the expensive "(2+1)D" flavour).
template <typename S>
ConvKernelT<S> make_temporal_dense(int channels, int kernel_t, std::mt19937& rng) {
  if (kernel_t % 2 == 0) throw ValueError("temporal conv kernel must be odd");
  ConvKernelT<S> k;
  k.out_channels = channels;
  k.in_per_group = channels;
  k.groups = 1;
  k.kernel_t = kernel_t;
  k.pad_t = (kernel_t - 1) / 2;
  k.weights = TensorT<S>::zeros({channels, channels, kernel_t, 1, 1}, true);
  fill_normal(k.weights, rng, std::sqrt(2.0 / (static_cast<double>(channels) * kernel_t)));
  k.validate();
  return k;
}

}  // namespace tea
