#include "tea/train.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>
#include <ostream>

#include "json.hpp"
#include "tea/ops.hpp"
#include "tea/optim.hpp"
#include "tea/rng.hpp"
#include "tea/tape.hpp"

namespace tea {

using nlohmann::json;

NetworkSpec ToyTrainConfig::network_spec() const {
  NetworkSpec s = NetworkSpec::preset("toy");
  s.name = std::string("toy-") + to_string(variant);
  s.variant = variant;
  s.flavor = flavor;
  s.frames = frames;
  s.dropout = dropout;
  s.height = data.height;
  s.width = data.width;
  s.in_channels = data.channels;
  s.classes = data.classes;
  s.validate();
  return s;
}

std::string ToyTrainConfig::to_json_string(int indent) const {
  json j{{"variant", to_string(variant)},
         {"flavor", to_string(flavor)},
         {"seed", seed},
         {"epochs", epochs},
         {"batch", batch},
         {"frames", frames},
         {"lr", lr},
         {"momentum", momentum},
         {"weight_decay", weight_decay},
         {"dropout", dropout},
         {"train_per_class", train_per_class},
         {"val_per_class", val_per_class},
         {"data",
          {{"classes", data.classes},
           {"frames_raw", data.frames_raw},
           {"height", data.height},
           {"width", data.width},
           {"channels", data.channels},
           {"sprite", data.sprite},
           {"speed", data.speed},
           {"noise", data.noise}}}};
  return j.dump(indent);
}

std::string ToyTrainResult::metrics_json(const ToyTrainConfig& cfg, int indent) const {
  json ep = json::array();
  for (const auto& e : epochs)
    ep.push_back({{"epoch", e.epoch}, {"lr", e.lr}, {"loss", e.loss},
                  {"train_acc", e.train_acc}});
  json j{{"config", json::parse(cfg.to_json_string())},
         {"epochs", ep},
         {"val_accuracy", val_accuracy},
         {"seconds", seconds},
         {"seed", seed}};
  return j.dump(indent);
}

namespace {

Tensor batch_inputs(const std::vector<ClipRecord>& clips, const std::vector<std::size_t>& ids,
                    std::size_t lo, std::size_t hi, int frames, SampleMode mode,
                    std::mt19937* rng, std::vector<int>* labels) {
  std::vector<Tensor> sampled;
  sampled.reserve(hi - lo);
  labels->clear();
  for (std::size_t i = lo; i < hi; ++i) {
    const ClipRecord& r = clips[ids[i]];
    sampled.push_back(sparse_sample(r.frames, frames, mode, rng));
    labels->push_back(r.label);
  }
  return stack_clips(sampled);
}

int correct_count(const Tensor& logits, const std::vector<int>& labels) {
  const int N = logits.shape[0], K = logits.shape[1];
  int hits = 0;
  for (int n = 0; n < N; ++n) {
    const float* row = logits.ptr() + static_cast<std::int64_t>(n) * K;
    int best = 0;
    for (int k = 1; k < K; ++k)
      if (row[k] > row[best]) best = k;
    if (best == labels[static_cast<std::size_t>(n)]) ++hits;
  }
  return hits;
}

}  // namespace

double evaluate_accuracy(Network& net, const std::vector<ClipRecord>& clips, int frames,
                         int batch) {
  if (clips.empty()) throw ValueError("evaluate_accuracy: empty clip list");
  std::vector<std::size_t> ids(clips.size());
  std::iota(ids.begin(), ids.end(), std::size_t{0});
  int hits = 0;
  std::vector<int> labels;
  for (std::size_t lo = 0; lo < ids.size(); lo += static_cast<std::size_t>(batch)) {
    const std::size_t hi = std::min(ids.size(), lo + static_cast<std::size_t>(batch));
    Tensor x = batch_inputs(clips, ids, lo, hi, frames, SampleMode::Test, nullptr, &labels);
    Tensor logits = net.forward_logits(nullptr, x, /*training=*/false);
    hits += correct_count(logits, labels);
  }
  return static_cast<double>(hits) / static_cast<double>(clips.size());
}

ToyTrainResult train_toy(const ToyTrainConfig& cfg, Network* out_net, std::ostream* log) {
  if (cfg.epochs <= 0 || cfg.batch <= 0) throw ValueError("train: epochs/batch must be positive");
  if (cfg.train_per_class <= 0 || cfg.val_per_class <= 0)
    throw ValueError("train: split sizes must be positive");
  const NetworkSpec net_spec = cfg.network_spec();  // validates geometry up front
  const auto t0 = std::chrono::steady_clock::now();

  // Train and val splits get different generator seeds so no clip (and no
  // appearance draw) is shared between them.
  SyntheticDataSpec train_spec = cfg.data;
  train_spec.seed = mix_seed(cfg.seed, train_spec.seed ^ 0x7261696eULL);
  SyntheticDataSpec val_spec = cfg.data;
  val_spec.seed = mix_seed(cfg.seed, val_spec.seed ^ 0x76616cULL);
  const std::vector<ClipRecord> train_clips = generate_dataset(train_spec, cfg.train_per_class);
  const std::vector<ClipRecord> val_clips = generate_dataset(val_spec, cfg.val_per_class);

  Network net = build_network(net_spec, mix_seed(cfg.seed, 0x11e7ULL));
  std::vector<Tensor*> params = net.params();
  SgdState sgd;
  sgd.momentum = cfg.momentum;
  sgd.weight_decay = cfg.weight_decay;

  std::mt19937 rng = make_rng(mix_seed(cfg.seed, 0x5a3cULL));
  std::vector<std::size_t> order(train_clips.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  ToyTrainResult result;
  result.seed = cfg.seed;
  std::vector<int> labels;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    sgd.lr = cosine_lr(cfg.lr, epoch, cfg.epochs);
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    int hits = 0, seen = 0;
    for (std::size_t lo = 0; lo < order.size(); lo += static_cast<std::size_t>(cfg.batch)) {
      const std::size_t hi = std::min(order.size(), lo + static_cast<std::size_t>(cfg.batch));
      Tensor x =
          batch_inputs(train_clips, order, lo, hi, cfg.frames, SampleMode::Train, &rng, &labels);
      Tape tape;
      Tensor logits = net.forward_logits(&tape, x, /*training=*/true, &rng);
      Tensor loss = softmax_cross_entropy(&tape, logits, labels);
      zero_grads(params);
      backward(tape, loss);
      sgd.step(params);
      loss_sum += static_cast<double>(loss.ptr()[0]) * static_cast<double>(hi - lo);
      hits += correct_count(logits, labels);
      seen += static_cast<int>(hi - lo);
    }
    EpochStats st;
    st.epoch = epoch;
    st.lr = sgd.lr;
    st.loss = loss_sum / std::max(1, seen);
    st.train_acc = static_cast<double>(hits) / std::max(1, seen);
    result.epochs.push_back(st);
    if (log)
      (*log) << "epoch " << epoch << "  lr " << st.lr << "  loss " << st.loss
             << "  train_acc " << st.train_acc << "\n";
  }

  result.val_accuracy = evaluate_accuracy(net, val_clips, cfg.frames, cfg.batch);
  result.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (log) (*log) << "val_accuracy " << result.val_accuracy << "\n";
  if (out_net) *out_net = std::move(net);
  return result;
}

}  // namespace tea
