#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "tea/network_spec.hpp"

namespace tea {

// Cost model convention: one multiply-accumulate = one FLOP. The headline
// totals count convolution / linear MACs only; everything elementwise
// (bias adds, batch norm, activations, attention arithmetic, pooling) is
// tallied per layer under aux_ops instead. Counting is purely shape
// driven; no weights are ever allocated.
inline const char* kCostConvention =
    "1 MAC = 1 FLOP; totals.macs counts conv/linear MACs; elementwise, "
    "normalization and pooling work is reported separately as aux_ops";

struct LayerCost {
  std::string name;
  std::string kind;  // conv | temporal_conv | bn | act | pool | gap | elemwise | attention
  std::vector<int> out_shape;  // [T, C, H, W]
  std::int64_t macs = 0;
  std::int64_t params = 0;
  std::int64_t aux_ops = 0;
};

struct CostReport {
  int frames = 0, height = 0, width = 0;
  std::vector<LayerCost> layers;
  std::int64_t total_macs = 0;
  std::int64_t total_params = 0;
  std::int64_t total_aux = 0;
};

// Temporal reach of each block's mixing pathway: the largest |dt| from
// which a frame's features can flow into frame t. The motion-excitation
// gate's one-frame look-ahead is not counted — it scales channels but
// moves no features between frames. probe_block_temporal_radii() measures
// the same quantity empirically.
struct RFReport {
  std::vector<int> per_block;
  std::vector<int> per_stage;
  int cumulative = 0;
  // Per-fragment radii of the aggregation cascade, where present.
  std::array<int, 4> mta_fragments{0, 0, 0, 0};
  bool has_mta = false;
};

CostReport analyze_cost(const NetworkSpec& spec);
RFReport analyze_temporal_rf(const NetworkSpec& spec);

// Full JSON report (cost + receptive field) matching the shipped
// cost_report schema.
std::string analyze_report_json(const NetworkSpec& spec, int indent = 2);

}  // namespace tea
