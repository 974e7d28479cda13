#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "tea/data.hpp"
#include "tea/network.hpp"

namespace tea {

// Training run on the synthetic motion task. Dataset size defaults match
// the study setup: 500 train / 200 val clips, 4 classes.
struct ToyTrainConfig {
  BlockVariant variant = BlockVariant::Tea;
  TemporalFlavor flavor = TemporalFlavor::ShiftInit;
  std::uint64_t seed = 0;
  int epochs = 30;
  int batch = 32;
  int frames = 8;
  double lr = 0.02;  // cosine-decayed per epoch
  double momentum = 0.9;
  double weight_decay = 5e-4;
  double dropout = 0.5;
  int train_per_class = 125;
  int val_per_class = 50;
  SyntheticDataSpec data;

  NetworkSpec network_spec() const;
  std::string to_json_string(int indent = 2) const;
};

struct EpochStats {
  int epoch = 0;
  double lr = 0.0;
  double loss = 0.0;
  double train_acc = 0.0;
};

struct ToyTrainResult {
  std::vector<EpochStats> epochs;
  double val_accuracy = 0.0;
  double seconds = 0.0;
  std::uint64_t seed = 0;
  std::string metrics_json(const ToyTrainConfig& cfg, int indent = 2) const;
};

// Runs the whole pipeline: generate data, train, evaluate. If out_net is
// given the trained network is moved there. `log` gets one line per epoch.
ToyTrainResult train_toy(const ToyTrainConfig& cfg, Network* out_net = nullptr,
                         std::ostream* log = nullptr);

// Eval-mode accuracy of `net` on clips, using centre-sampled frames.
double evaluate_accuracy(Network& net, const std::vector<ClipRecord>& clips, int frames,
                         int batch = 32);

}  // namespace tea
