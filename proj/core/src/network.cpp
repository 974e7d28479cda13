#include "tea/network.hpp"

#include <cmath>

#include "tea/rng.hpp"

namespace tea {

Tensor Network::forward_features(Tape* tape, const Tensor& x, bool training) {
  int N, T, C, H, W;
  expect5(x, N, T, C, H, W, "network");
  if (C != spec.in_channels || T != spec.frames || H != spec.height || W != spec.width)
    throw ShapeError("network: input " + shape_str(x.shape) + " does not match spec (T=" +
                     std::to_string(spec.frames) + ", C=" + std::to_string(spec.in_channels) +
                     ", H=" + std::to_string(spec.height) + ", W=" + std::to_string(spec.width) +
                     ")");
  Tensor h = relu(tape, batch_norm(tape, conv2d(tape, x, stem_conv), stem_bn, training));
  if (spec.stem.maxpool) h = max_pool2d(tape, h, 3, 2, 1);
  for (auto& b : blocks) h = b.forward(tape, h, training);
  return global_avg_pool_spatial(tape, h);
}

Tensor Network::forward_logits(Tape* tape, const Tensor& x, bool training,
                               std::mt19937* rng) {
  Tensor feat = forward_features(tape, x, training);
  if (training && spec.dropout > 0.0) {
    if (!rng) throw ValueError("network: training with dropout needs an rng");
    feat = dropout(tape, feat, spec.dropout, *rng, true);
  }
  Tensor per_frame = conv2d(tape, feat, classifier);  // [N,T,K,1,1]
  return temporal_mean(tape, per_frame);
}

std::vector<float> Network::predict_video(const Tensor& clip) {
  Tensor x = clip;
  if (x.ndim() == 4) {
    x = clip;  // reshape view: same buffer, rank-5 shape
    x.shape = Shape{1, clip.shape[0], clip.shape[1], clip.shape[2], clip.shape[3]};
  }
  int N, T, C, H, W;
  expect5(x, N, T, C, H, W, "predict_video");
  if (N != 1) throw ShapeError("predict_video: expected a single clip");
  Tensor logits = forward_logits(nullptr, x, false, nullptr);
  const int K = logits.shape[1];
  std::vector<float> scores(static_cast<std::size_t>(K));
  float mx = (*logits.data)[0];
  for (int k = 1; k < K; ++k) mx = std::max(mx, (*logits.data)[k]);
  double denom = 0;
  for (int k = 0; k < K; ++k) denom += std::exp(static_cast<double>((*logits.data)[k] - mx));
  for (int k = 0; k < K; ++k)
    scores[k] = static_cast<float>(
        std::exp(static_cast<double>((*logits.data)[k] - mx)) / denom);
  return scores;
}

std::vector<std::pair<std::string, Tensor*>> Network::named_params() {
  std::vector<std::pair<std::string, Tensor*>> out;
  out.emplace_back("stem.conv.weight", &stem_conv.weights);
  if (stem_conv.has_bias()) out.emplace_back("stem.conv.bias", &stem_conv.bias);
  out.emplace_back("stem.bn.scale", &stem_bn.scale);
  out.emplace_back("stem.bn.shift", &stem_bn.shift);
  std::size_t bi = 0;
  for (std::size_t si = 0; si < spec.stages.size(); ++si)
    for (int k = 0; k < spec.stages[si].blocks; ++k, ++bi) {
      const std::string prefix =
          "stage" + std::to_string(si + 1) + ".block" + std::to_string(k + 1);
      for (auto& [n, p] : blocks[bi].named_params(prefix)) out.emplace_back(n, p);
    }
  out.emplace_back("classifier.weight", &classifier.weights);
  if (classifier.has_bias()) out.emplace_back("classifier.bias", &classifier.bias);
  return out;
}

std::vector<std::pair<std::string, std::vector<float>*>> Network::named_buffers() {
  std::vector<std::pair<std::string, std::vector<float>*>> out;
  out.emplace_back("stem.bn.running_mean", &stem_bn.running_mean);
  out.emplace_back("stem.bn.running_var", &stem_bn.running_var);
  std::size_t bi = 0;
  for (std::size_t si = 0; si < spec.stages.size(); ++si)
    for (int k = 0; k < spec.stages[si].blocks; ++k, ++bi) {
      const std::string prefix =
          "stage" + std::to_string(si + 1) + ".block" + std::to_string(k + 1);
      for (auto& [n, b] : blocks[bi].named_buffers(prefix)) out.emplace_back(n, b);
    }
  return out;
}

std::vector<Tensor*> Network::params() {
  std::vector<Tensor*> v;
  for (auto& [n, p] : named_params()) v.push_back(p);
  return v;
}

std::int64_t Network::param_count() {
  std::int64_t total = 0;
  for (auto& [n, p] : named_params()) total += p->numel();
  return total;
}

void Network::set_use_shift_op(bool on) {
  for (auto& b : blocks) {
    if (on && b.tconv && b.flavor != TemporalFlavor::ShiftInit)
      throw ValueError("set_use_shift_op: block temporal conv is not shift-initialized");
    b.use_shift_op = on;
  }
}

Network build_network(const NetworkSpec& spec, std::uint64_t seed) {
  spec.validate();
  Network net;
  net.spec = spec;
  std::mt19937 rng = make_rng(mix_seed(seed, 0xfeedULL));
  net.stem_conv = make_conv2d<float>(spec.in_channels, spec.stem.out_channels,
                                     spec.stem.kernel, spec.stem.stride,
                                     (spec.stem.kernel - 1) / 2, rng, /*bias=*/false);
  net.stem_bn = BatchNorm::make(spec.stem.out_channels);
  int in_ch = spec.stem.out_channels;
  for (std::size_t si = 0; si < spec.stages.size(); ++si) {
    const StageSpec& st = spec.stages[si];
    for (int k = 0; k < st.blocks; ++k) {
      const int stride = (k == 0) ? st.stride : 1;
      net.blocks.push_back(TeaBlock::make(spec.stage_variant(si), spec.stage_flavor(si),
                                          in_ch, st.bottleneck, st.out_channels, stride,
                                          spec.reduction, rng));
      in_ch = st.out_channels;
    }
  }
  net.classifier = make_conv2d<float>(in_ch, spec.classes, 1, 1, 0, rng, /*bias=*/true);
  return net;
}

std::vector<int> probe_block_temporal_radii(const NetworkSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::vector<int> radii;
  std::size_t bi = 0;
  for (std::size_t si = 0; si < spec.stages.size(); ++si) {
    const StageSpec& st = spec.stages[si];
    const BlockVariant v = spec.stage_variant(si);
    for (int k = 0; k < st.blocks; ++k, ++bi) {
      const int stride = (k == 0) ? st.stride : 1;
      std::mt19937 rng = make_rng(mix_seed(seed, bi));
      const int T = 9, HW = 8;
      switch (v) {
        case BlockVariant::Tea:
        case BlockVariant::MtaOnly: {
          auto r = mta_probe_temporal_radii<float>(st.bottleneck, stride, rng, T, HW, HW);
          radii.push_back(*std::max_element(r.begin(), r.end()));
          break;
        }
        case BlockVariant::P21dRes2Net: {
          auto m = Res2NetTemporalT<float>::make(st.bottleneck, stride, rng,
                                                 /*random_temporal=*/true);
          auto r = probe_temporal_radii<float>(
              [&](const Tensor& x) {
                return res2net_temporal_forward<float>(nullptr, m, x, false, true);
              },
              T, st.bottleneck, HW, HW);
          radii.push_back(*std::max_element(r.begin(), r.end()));
          break;
        }
        case BlockVariant::P21dResNet:
        case BlockVariant::MeOnly:
        case BlockVariant::MeNoResidual:
        case BlockVariant::P21dSeNet: {
          // probe the inserted temporal conv with random taps; a single
          // impulse channel suffices
          ConvKernelT<float> tk =
              (spec.stage_flavor(si) == TemporalFlavor::Dense)
                  ? make_temporal_dense<float>(st.bottleneck, 3, rng)
                  : make_temporal_cw<float>(st.bottleneck, 3, rng, true);
          const int t0 = T / 2;
          Tensor x = Tensor::zeros({1, T, st.bottleneck, 1, 1});
          x.at5(0, t0, 0, 0, 0) = 1.0f;
          Tensor y = temporal_conv<float>(nullptr, x, tk);
          int r = 0;
          for (int t = 0; t < T; ++t)
            for (int c = 0; c < st.bottleneck; ++c)
              if (std::abs(y.at5(0, t, c, 0, 0)) > 1e-12f)
                r = std::max(r, std::abs(t - t0));
          radii.push_back(r);
          break;
        }
        case BlockVariant::Plain2d:
          radii.push_back(0);
          break;
      }
    }
  }
  return radii;
}

}  // namespace tea
