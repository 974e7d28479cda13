#pragma once

#include <optional>
#include <utility>

#include "tea/me.hpp"
#include "tea/mta.hpp"
#include "tea/network_spec.hpp"
#include "tea/ops.hpp"
#include "tea/shift.hpp"

namespace tea {

// Bottleneck residual block: 1x1 reduce -> <interior> -> 1x1 expand, plus
// identity or projection shortcut. The interior depends on the variant;
// see BlockVariant. 1x1 convs carry biases, spatial/temporal convs do not
// (a batch norm follows them everywhere they appear).
template <typename S>
struct TeaBlockT {
  BlockVariant variant = BlockVariant::Plain2d;
  TemporalFlavor flavor = TemporalFlavor::ShiftInit;
  int in_channels = 0, bottleneck = 0, out_channels = 0, stride = 1;

  ConvKernelT<S> conv1;
  BatchNormT<S> bn1;
  std::optional<MEModuleT<S>> me;
  std::optional<SEModuleT<S>> se;
  std::optional<MTAModuleT<S>> mta;
  std::optional<Res2NetTemporalT<S>> res2;
  std::optional<ConvKernelT<S>> tconv;     // inserted temporal conv
  std::optional<ConvKernelT<S>> conv_mid;  // 3x3 spatial conv
  std::optional<BatchNormT<S>> bn_mid;
  ConvKernelT<S> conv3;
  BatchNormT<S> bn3;
  std::optional<ConvKernelT<S>> shortcut_conv;
  std::optional<BatchNormT<S>> shortcut_bn;

  // When set, the forward pass substitutes the shift op for the inserted
  // temporal conv. Only meaningful with the ShiftInit flavor, where the two
  // are exactly interchangeable until training updates the taps.
  bool use_shift_op = false;

  static bool variant_runs_temporal_conv(BlockVariant v) {
    return v == BlockVariant::P21dResNet || v == BlockVariant::MeOnly ||
           v == BlockVariant::MeNoResidual || v == BlockVariant::P21dSeNet;
  }
  static bool variant_runs_spatial_mid(BlockVariant v) {
    return v == BlockVariant::Plain2d || variant_runs_temporal_conv(v);
  }

  static TeaBlockT make(BlockVariant v, TemporalFlavor f, int in_ch, int bneck, int out_ch,
                        int stride, int reduction, std::mt19937& rng) {
    TeaBlockT b;
    b.variant = v;
    b.flavor = f;
    b.in_channels = in_ch;
    b.bottleneck = bneck;
    b.out_channels = out_ch;
    b.stride = stride;
    b.conv1 = make_conv2d<S>(in_ch, bneck, 1, 1, 0, rng, /*bias=*/true);
    b.bn1 = BatchNormT<S>::make(bneck);

    const bool wants_me = v == BlockVariant::Tea || v == BlockVariant::MeOnly ||
                          v == BlockVariant::MeNoResidual;
    if (wants_me) b.me = MEModuleT<S>::make(bneck, reduction, rng);
    if (v == BlockVariant::P21dSeNet) b.se = SEModuleT<S>::make(bneck, reduction, rng);
    if (v == BlockVariant::Tea || v == BlockVariant::MtaOnly)
      b.mta = MTAModuleT<S>::make(bneck, stride, rng);
    if (v == BlockVariant::P21dRes2Net)
      b.res2 = Res2NetTemporalT<S>::make(bneck, stride, rng);
    if (variant_runs_temporal_conv(v)) {
      switch (f) {
        case TemporalFlavor::Dense:
          b.tconv = make_temporal_dense<S>(bneck, 3, rng);
          break;
        case TemporalFlavor::ChannelWise:
          b.tconv = make_temporal_cw<S>(bneck, 3, rng, true);
          break;
        case TemporalFlavor::ShiftInit:
          b.tconv = shift_init_kernel<S>(bneck);
          break;
      }
    }
    if (variant_runs_spatial_mid(v)) {
      b.conv_mid = make_conv2d<S>(bneck, bneck, 3, stride, 1, rng, /*bias=*/false);
      b.bn_mid = BatchNormT<S>::make(bneck);
    }
    b.conv3 = make_conv2d<S>(bneck, out_ch, 1, 1, 0, rng, /*bias=*/true);
    b.bn3 = BatchNormT<S>::make(out_ch);
    if (in_ch != out_ch || stride != 1) {
      b.shortcut_conv = make_conv2d<S>(in_ch, out_ch, 1, stride, 0, rng, /*bias=*/true);
      b.shortcut_bn = BatchNormT<S>::make(out_ch);
    }
    return b;
  }

  TensorT<S> forward(TapeT<S>* tape, const TensorT<S>& x, bool training) {
    TensorT<S> h = relu(tape, batch_norm(tape, conv2d(tape, x, conv1), bn1, training));
    switch (variant) {
      case BlockVariant::Plain2d:
        h = spatial_mid(tape, h, training);
        break;
      case BlockVariant::P21dResNet:
        h = temporal_mix(tape, h);
        h = spatial_mid(tape, h, training);
        break;
      case BlockVariant::MeOnly:
        h = me_forward(tape, *me, h, training);
        h = temporal_mix(tape, h);
        h = spatial_mid(tape, h, training);
        break;
      case BlockVariant::MeNoResidual:
        h = me_forward_no_residual(tape, *me, h, training);
        h = temporal_mix(tape, h);
        h = spatial_mid(tape, h, training);
        break;
      case BlockVariant::P21dSeNet:
        h = se_forward(tape, *se, h);
        h = temporal_mix(tape, h);
        h = spatial_mid(tape, h, training);
        break;
      case BlockVariant::P21dRes2Net:
        h = res2net_temporal_forward(tape, *res2, h, training);
        break;
      case BlockVariant::MtaOnly:
        h = mta_forward(tape, *mta, h, training);
        break;
      case BlockVariant::Tea:
        h = me_forward(tape, *me, h, training);
        h = mta_forward(tape, *mta, h, training);
        break;
    }
    TensorT<S> y = batch_norm(tape, conv2d(tape, h, conv3), bn3, training);
    TensorT<S> s = x;
    if (shortcut_conv)
      s = batch_norm(tape, conv2d(tape, x, *shortcut_conv), *shortcut_bn, training);
    return relu(tape, add(tape, y, s));
  }

  std::vector<std::pair<std::string, TensorT<S>*>> named_params(const std::string& prefix) {
    std::vector<std::pair<std::string, TensorT<S>*>> out;
    auto kernel = [&](const std::string& name, ConvKernelT<S>& k) {
      out.emplace_back(prefix + "." + name + ".weight", &k.weights);
      if (k.has_bias()) out.emplace_back(prefix + "." + name + ".bias", &k.bias);
    };
    auto norm = [&](const std::string& name, BatchNormT<S>& bn) {
      out.emplace_back(prefix + "." + name + ".scale", &bn.scale);
      out.emplace_back(prefix + "." + name + ".shift", &bn.shift);
    };
    kernel("conv1", conv1);
    norm("bn1", bn1);
    if (me) {
      kernel("me.conv_red", me->conv_red);
      kernel("me.conv_trans", me->conv_trans);
      kernel("me.conv_exp", me->conv_exp);
      if (me->bn_red) norm("me.bn_red", *me->bn_red);
      if (me->bn_exp) norm("me.bn_exp", *me->bn_exp);
    }
    if (se) {
      kernel("se.fc1", se->fc1);
      kernel("se.fc2", se->fc2);
    }
    if (mta)
      for (int i = 0; i < 3; ++i) {
        const std::string n = std::to_string(i + 2);
        kernel("mta.temp" + n, mta->conv_temp[i]);
        kernel("mta.spa" + n, mta->conv_spa[i]);
        norm("mta.bn" + n, mta->bn_spa[i]);
      }
    if (res2) {
      kernel("res2.temp", res2->conv_temp);
      for (int i = 0; i < 3; ++i) {
        const std::string n = std::to_string(i + 2);
        kernel("res2.spa" + n, res2->conv_spa[i]);
        norm("res2.bn" + n, res2->bn_spa[i]);
      }
    }
    if (tconv) kernel("tconv", *tconv);
    if (conv_mid) kernel("conv_mid", *conv_mid);
    if (bn_mid) norm("bn_mid", *bn_mid);
    kernel("conv3", conv3);
    norm("bn3", bn3);
    if (shortcut_conv) kernel("shortcut", *shortcut_conv);
    if (shortcut_bn) norm("shortcut_bn", *shortcut_bn);
    return out;
  }

  // Non-trainable state that still belongs in a checkpoint: the batch norm
  // running statistics.
  std::vector<std::pair<std::string, std::vector<S>*>> named_buffers(
      const std::string& prefix) {
    std::vector<std::pair<std::string, std::vector<S>*>> out;
    auto norm = [&](const std::string& name, BatchNormT<S>& bn) {
      out.emplace_back(prefix + "." + name + ".running_mean", &bn.running_mean);
      out.emplace_back(prefix + "." + name + ".running_var", &bn.running_var);
    };
    norm("bn1", bn1);
    if (me && me->bn_red) norm("me.bn_red", *me->bn_red);
    if (me && me->bn_exp) norm("me.bn_exp", *me->bn_exp);
    if (mta)
      for (int i = 0; i < 3; ++i) norm("mta.bn" + std::to_string(i + 2), mta->bn_spa[i]);
    if (res2)
      for (int i = 0; i < 3; ++i) norm("res2.bn" + std::to_string(i + 2), res2->bn_spa[i]);
    if (bn_mid) norm("bn_mid", *bn_mid);
    norm("bn3", bn3);
    if (shortcut_bn) norm("shortcut_bn", *shortcut_bn);
    return out;
  }

  template <typename U>
  TeaBlockT<U> cast() const {
    TeaBlockT<U> o;
    o.variant = variant;
    o.flavor = flavor;
    o.in_channels = in_channels;
    o.bottleneck = bottleneck;
    o.out_channels = out_channels;
    o.stride = stride;
    o.conv1 = conv1.template cast<U>();
    o.bn1 = bn1.template cast<U>();
    if (me) o.me = me->template cast<U>();
    if (se) o.se = se->template cast<U>();
    if (mta) o.mta = mta->template cast<U>();
    if (res2) o.res2 = res2->template cast<U>();
    if (tconv) o.tconv = tconv->template cast<U>();
    if (conv_mid) o.conv_mid = conv_mid->template cast<U>();
    if (bn_mid) o.bn_mid = bn_mid->template cast<U>();
    o.conv3 = conv3.template cast<U>();
    o.bn3 = bn3.template cast<U>();
    if (shortcut_conv) o.shortcut_conv = shortcut_conv->template cast<U>();
    if (shortcut_bn) o.shortcut_bn = shortcut_bn->template cast<U>();
    o.use_shift_op = use_shift_op;
    return o;
  }

 private:
  TensorT<S> temporal_mix(TapeT<S>* tape, const TensorT<S>& h) {
    if (use_shift_op) return temporal_shift(tape, h);
    return temporal_conv(tape, h, *tconv);
  }
  TensorT<S> spatial_mid(TapeT<S>* tape, const TensorT<S>& h, bool training) {
    return relu(tape, batch_norm(tape, conv2d(tape, h, *conv_mid), *bn_mid, training));
  }
};

using TeaBlock = TeaBlockT<float>;

}  // namespace tea
