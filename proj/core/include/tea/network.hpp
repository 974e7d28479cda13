#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "tea/block.hpp"
#include "tea/network_spec.hpp"

namespace tea {

// A materialized network: stem conv, flattened block list, 1x1 classifier
// head. Forward path: stem -> blocks -> spatial mean -> dropout ->
// classifier per frame -> temporal mean of per-frame logits.
struct Network {
  NetworkSpec spec;
  ConvKernel stem_conv;
  BatchNorm stem_bn;
  std::vector<TeaBlock> blocks;
  ConvKernel classifier;

  // Features after the block stack and spatial pooling: [N,T,C,1,1].
  Tensor forward_features(Tape* tape, const Tensor& x, bool training);
  // Consensus logits [N, classes]. rng is only consumed when training with
  // dropout > 0.
  Tensor forward_logits(Tape* tape, const Tensor& x, bool training,
                        std::mt19937* rng = nullptr);
  // Softmax class scores for a single clip [1,T,C,H,W] or [T,C,H,W], eval mode.
  std::vector<float> predict_video(const Tensor& clip);

  std::vector<std::pair<std::string, Tensor*>> named_params();
  // Batch norm running statistics, checkpointed alongside the parameters.
  std::vector<std::pair<std::string, std::vector<float>*>> named_buffers();
  std::vector<Tensor*> params();
  std::int64_t param_count();
  // Swap every shift-initialized temporal conv for the shift op (and back).
  void set_use_shift_op(bool on);
};

Network build_network(const NetworkSpec& spec, std::uint64_t seed);

// Empirical temporal radius of each block's temporal pathway, probed with
// randomly drawn temporal taps (architecture support, independent of the
// shipped initialization). Order matches the analyzer's per_block list.
std::vector<int> probe_block_temporal_radii(const NetworkSpec& spec, std::uint64_t seed);

}  // namespace tea
