#include "tea/analyzer.hpp"

#include <algorithm>

#include "json.hpp"
#include "tea/block.hpp"

namespace tea {

using nlohmann::json;

namespace {

struct Emitter {
  CostReport& rep;
  int T;

  void push(LayerCost lc) {
    rep.total_macs += lc.macs;
    rep.total_params += lc.params;
    rep.total_aux += lc.aux_ops;
    rep.layers.push_back(std::move(lc));
  }

  // out_elems = T * C_out * H * W for the layer's own output
  void conv(const std::string& name, std::int64_t c_out, std::int64_t h, std::int64_t w,
            std::int64_t in_per_group, std::int64_t kt, std::int64_t kh, std::int64_t kw,
            bool bias, const char* kind = "conv") {
    LayerCost lc;
    lc.name = name;
    lc.kind = kind;
    lc.out_shape = {T, static_cast<int>(c_out), static_cast<int>(h), static_cast<int>(w)};
    const std::int64_t out_elems = static_cast<std::int64_t>(T) * c_out * h * w;
    lc.macs = out_elems * in_per_group * kt * kh * kw;
    lc.params = c_out * in_per_group * kt * kh * kw + (bias ? c_out : 0);
    lc.aux_ops = bias ? out_elems : 0;
    push(std::move(lc));
  }

  void bn(const std::string& name, std::int64_t c, std::int64_t h, std::int64_t w) {
    LayerCost lc;
    lc.name = name;
    lc.kind = "bn";
    lc.out_shape = {T, static_cast<int>(c), static_cast<int>(h), static_cast<int>(w)};
    lc.params = 2 * c;
    lc.aux_ops = 2 * static_cast<std::int64_t>(T) * c * h * w;
    push(std::move(lc));
  }

  void aux(const std::string& name, const char* kind, std::int64_t c, std::int64_t h,
           std::int64_t w, std::int64_t ops) {
    LayerCost lc;
    lc.name = name;
    lc.kind = kind;
    lc.out_shape = {T, static_cast<int>(c), static_cast<int>(h), static_cast<int>(w)};
    lc.aux_ops = ops;
    push(std::move(lc));
  }
};

std::int64_t elems(int T, std::int64_t c, std::int64_t h, std::int64_t w) {
  return static_cast<std::int64_t>(T) * c * h * w;
}

void emit_me(Emitter& em, const std::string& p, int C, int r, std::int64_t h,
             std::int64_t w, bool with_residual) {
  const int T = em.T;
  const std::int64_t cr = C / r;
  em.conv(p + ".me.conv_red", cr, h, w, C, 1, 1, 1, true);
  em.conv(p + ".me.conv_trans", cr, h, w, 1, 1, 3, 3, false);
  em.aux(p + ".me.motion", "elemwise", cr, h, w, T > 1 ? elems(T - 1, cr, h, w) : 0);
  em.aux(p + ".me.pool", "gap", cr, 1, 1, elems(T, cr, h, w));
  em.conv(p + ".me.conv_exp", C, 1, 1, cr, 1, 1, 1, true);
  // 2*sigmoid(e)-1, per-channel scale, plus the residual add when present
  em.aux(p + ".me.gate", "attention", C, h, w,
         2 * elems(T, C, 1, 1) + (with_residual ? 2 : 1) * elems(T, C, h, w));
}

void emit_se(Emitter& em, const std::string& p, int C, int r, std::int64_t h,
             std::int64_t w) {
  const int T = em.T;
  const std::int64_t cr = C / r;
  em.aux(p + ".se.pool", "gap", C, 1, 1, elems(T, C, h, w));
  em.conv(p + ".se.fc1", cr, 1, 1, C, 1, 1, 1, true);
  em.aux(p + ".se.relu", "act", cr, 1, 1, elems(T, cr, 1, 1));
  em.conv(p + ".se.fc2", C, 1, 1, cr, 1, 1, 1, true);
  em.aux(p + ".se.gate", "attention", C, h, w, elems(T, C, 1, 1) + elems(T, C, h, w));
}

void emit_mta(Emitter& em, const std::string& p, int C, int stride, std::int64_t h,
              std::int64_t w) {
  const int T = em.T;
  const std::int64_t frag = C / 4;
  const std::int64_t ho = stride == 1 ? h : h / stride;
  const std::int64_t wo = stride == 1 ? w : w / stride;
  if (stride > 1)
    em.aux(p + ".mta.pool1", "pool", frag, ho, wo,
           elems(T, frag, ho, wo) * stride * stride);
  for (int i = 2; i <= 4; ++i) {
    const std::string n = std::to_string(i);
    if (i >= 3) em.aux(p + ".mta.add" + n, "elemwise", frag, h, w, elems(T, frag, h, w));
    em.conv(p + ".mta.temp" + n, frag, h, w, 1, 3, 1, 1, false, "temporal_conv");
    em.conv(p + ".mta.spa" + n, frag, ho, wo, frag, 1, 3, 3, false);
    em.bn(p + ".mta.bn" + n, frag, ho, wo);
    em.aux(p + ".mta.relu" + n, "act", frag, ho, wo, elems(T, frag, ho, wo));
  }
}

void emit_res2(Emitter& em, const std::string& p, int C, int stride, std::int64_t h,
               std::int64_t w) {
  const int T = em.T;
  const std::int64_t frag = C / 4;
  const std::int64_t ho = stride == 1 ? h : h / stride;
  const std::int64_t wo = stride == 1 ? w : w / stride;
  em.conv(p + ".res2.temp", C, h, w, 1, 3, 1, 1, false, "temporal_conv");
  if (stride > 1)
    em.aux(p + ".res2.pool1", "pool", frag, ho, wo,
           elems(T, frag, ho, wo) * stride * stride);
  for (int i = 2; i <= 4; ++i) {
    const std::string n = std::to_string(i);
    if (i >= 3 && stride == 1)
      em.aux(p + ".res2.add" + n, "elemwise", frag, h, w, elems(T, frag, h, w));
    em.conv(p + ".res2.spa" + n, frag, ho, wo, frag, 1, 3, 3, false);
    em.bn(p + ".res2.bn" + n, frag, ho, wo);
    em.aux(p + ".res2.relu" + n, "act", frag, ho, wo, elems(T, frag, ho, wo));
  }
}

}  // namespace

CostReport analyze_cost(const NetworkSpec& spec) {
  spec.validate();
  CostReport rep;
  rep.frames = spec.frames;
  rep.height = spec.height;
  rep.width = spec.width;
  Emitter em{rep, spec.frames};
  const int T = spec.frames;

  std::int64_t h = (spec.height + 2 * ((spec.stem.kernel - 1) / 2) - spec.stem.kernel) /
                       spec.stem.stride +
                   1;
  std::int64_t w = (spec.width + 2 * ((spec.stem.kernel - 1) / 2) - spec.stem.kernel) /
                       spec.stem.stride +
                   1;
  em.conv("stem.conv", spec.stem.out_channels, h, w, spec.in_channels, 1, spec.stem.kernel,
          spec.stem.kernel, false);
  em.bn("stem.bn", spec.stem.out_channels, h, w);
  em.aux("stem.relu", "act", spec.stem.out_channels, h, w,
         elems(T, spec.stem.out_channels, h, w));
  if (spec.stem.maxpool) {
    const std::int64_t hp = (h + 2 - 3) / 2 + 1, wp = (w + 2 - 3) / 2 + 1;
    em.aux("stem.maxpool", "pool", spec.stem.out_channels, hp, wp,
           elems(T, spec.stem.out_channels, hp, wp) * 9);
    h = hp;
    w = wp;
  }

  int in_ch = spec.stem.out_channels;
  for (std::size_t si = 0; si < spec.stages.size(); ++si) {
    const StageSpec& st = spec.stages[si];
    const BlockVariant v = spec.stage_variant(si);
    const TemporalFlavor f = spec.stage_flavor(si);
    for (int k = 0; k < st.blocks; ++k) {
      const int stride = (k == 0) ? st.stride : 1;
      const std::string p =
          "stage" + std::to_string(si + 1) + ".block" + std::to_string(k + 1);
      const std::int64_t ho = stride == 1 ? h : (h - 1) / stride + 1;
      const std::int64_t wo = stride == 1 ? w : (w - 1) / stride + 1;
      const int B = st.bottleneck;

      em.conv(p + ".conv1", B, h, w, in_ch, 1, 1, 1, true);
      em.bn(p + ".bn1", B, h, w);
      em.aux(p + ".relu1", "act", B, h, w, elems(T, B, h, w));

      const bool temporal_conv_inserted = TeaBlock::variant_runs_temporal_conv(v);
      switch (v) {
        case BlockVariant::Tea:
          emit_me(em, p, B, spec.reduction, h, w, true);
          emit_mta(em, p, B, stride, h, w);
          break;
        case BlockVariant::MtaOnly:
          emit_mta(em, p, B, stride, h, w);
          break;
        case BlockVariant::P21dRes2Net:
          emit_res2(em, p, B, stride, h, w);
          break;
        case BlockVariant::MeOnly:
          emit_me(em, p, B, spec.reduction, h, w, true);
          break;
        case BlockVariant::MeNoResidual:
          emit_me(em, p, B, spec.reduction, h, w, false);
          break;
        case BlockVariant::P21dSeNet:
          emit_se(em, p, B, spec.reduction, h, w);
          break;
        case BlockVariant::P21dResNet:
        case BlockVariant::Plain2d:
          break;
      }
      if (temporal_conv_inserted) {
        if (f == TemporalFlavor::Dense)
          em.conv(p + ".tconv", B, h, w, B, 3, 1, 1, false, "temporal_conv");
        else
          em.conv(p + ".tconv", B, h, w, 1, 3, 1, 1, false, "temporal_conv");
      }
      if (TeaBlock::variant_runs_spatial_mid(v)) {
        em.conv(p + ".conv_mid", B, ho, wo, B, 1, 3, 3, false);
        em.bn(p + ".bn_mid", B, ho, wo);
        em.aux(p + ".relu_mid", "act", B, ho, wo, elems(T, B, ho, wo));
      }

      em.conv(p + ".conv3", st.out_channels, ho, wo, B, 1, 1, 1, true);
      em.bn(p + ".bn3", st.out_channels, ho, wo);
      if (in_ch != st.out_channels || stride != 1) {
        em.conv(p + ".shortcut", st.out_channels, ho, wo, in_ch, 1, 1, 1, true);
        em.bn(p + ".shortcut_bn", st.out_channels, ho, wo);
      }
      em.aux(p + ".add", "elemwise", st.out_channels, ho, wo,
             elems(T, st.out_channels, ho, wo));
      em.aux(p + ".relu_out", "act", st.out_channels, ho, wo,
             elems(T, st.out_channels, ho, wo));

      in_ch = st.out_channels;
      h = ho;
      w = wo;
    }
  }

  em.aux("head.pool", "gap", in_ch, 1, 1, elems(T, in_ch, h, w));
  em.conv("classifier", spec.classes, 1, 1, in_ch, 1, 1, 1, true);
  em.aux("head.consensus", "elemwise", spec.classes, 1, 1, elems(T, spec.classes, 1, 1));
  return rep;
}

RFReport analyze_temporal_rf(const NetworkSpec& spec) {
  spec.validate();
  RFReport rf;
  for (std::size_t si = 0; si < spec.stages.size(); ++si) {
    const BlockVariant v = spec.stage_variant(si);
    int per_block = 0;
    switch (v) {
      case BlockVariant::Tea:
      case BlockVariant::MtaOnly:
        per_block = 3;  // three chained 3-tap temporal convs in the cascade
        rf.has_mta = true;
        rf.mta_fragments = {0, 1, 2, 3};
        break;
      case BlockVariant::P21dRes2Net:
      case BlockVariant::P21dResNet:
      case BlockVariant::MeOnly:
      case BlockVariant::MeNoResidual:
      case BlockVariant::P21dSeNet:
        per_block = 1;  // one 3-tap temporal conv
        break;
      case BlockVariant::Plain2d:
        per_block = 0;
        break;
    }
    int stage_total = 0;
    for (int k = 0; k < spec.stages[si].blocks; ++k) {
      rf.per_block.push_back(per_block);
      stage_total += per_block;
    }
    rf.per_stage.push_back(stage_total);
    rf.cumulative += stage_total;
  }
  return rf;
}

std::string analyze_report_json(const NetworkSpec& spec, int indent) {
  const CostReport cost = analyze_cost(spec);
  const RFReport rf = analyze_temporal_rf(spec);
  json j;
  j["convention"] = kCostConvention;
  j["spec_name"] = spec.name;
  j["input"] = {{"T", cost.frames}, {"H", cost.height}, {"W", cost.width}};
  j["layers"] = json::array();
  for (const auto& lc : cost.layers)
    j["layers"].push_back({{"name", lc.name},
                           {"kind", lc.kind},
                           {"out_shape", lc.out_shape},
                           {"macs", lc.macs},
                           {"params", lc.params},
                           {"aux_ops", lc.aux_ops}});
  j["totals"] = {{"macs", cost.total_macs},
                 {"params", cost.total_params},
                 {"aux_ops", cost.total_aux}};
  json rfj;
  rfj["per_block"] = rf.per_block;
  rfj["per_stage"] = rf.per_stage;
  rfj["cumulative"] = rf.cumulative;
  if (rf.has_mta)
    rfj["mta_fragments"] = std::vector<int>(rf.mta_fragments.begin(), rf.mta_fragments.end());
  j["temporal_rf"] = rfj;
  return indent < 0 ? j.dump() : j.dump(indent);
}

}  // namespace tea
