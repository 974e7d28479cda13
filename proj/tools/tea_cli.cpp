// Command-line front end: cost/receptive-field analysis, the built-in
// property suite, synthetic-data generation, toy training and evaluation.
//
// Exit codes: 0 success; 1 bad input (arguments, files, specs); 2 a checked
// property failed (equivalence sweep or selfcheck).

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "tea/analyzer.hpp"
#include "tea/checkpoint.hpp"
#include "tea/data.hpp"
#include "tea/fault.hpp"
#include "tea/network.hpp"
#include "tea/ops.hpp"
#include "tea/reference_ops.hpp"
#include "tea/rng.hpp"
#include "tea/selfcheck.hpp"
#include "tea/shift.hpp"
#include "tea/train.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitBadInput = 1;
constexpr int kExitPropertyFailed = 2;

// --seed defaults to the TEA_SEED environment variable (then 0) so batch
// runs can vary seeds without editing every invocation.
std::uint64_t env_seed() {
  if (const char* s = std::getenv("TEA_SEED")) {
    try {
      return std::stoull(s);
    } catch (const std::exception&) {
      throw tea::ValueError("TEA_SEED is not an unsigned integer: '" + std::string(s) + "'");
    }
  }
  return 0;
}

tea::NetworkSpec load_spec(const std::string& preset, const std::string& spec_file) {
  if (!spec_file.empty()) {
    std::ifstream f(spec_file);
    if (!f) throw tea::IoError("cannot open spec file '" + spec_file + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    return tea::NetworkSpec::from_json_string(ss.str());
  }
  return tea::NetworkSpec::preset(preset);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw tea::IoError("cannot write '" + path + "'");
  f << text << "\n";
}

int cmd_analyze(const std::string& preset, const std::string& spec_file, bool as_json,
                const std::string& out_file) {
  const tea::NetworkSpec spec = load_spec(preset, spec_file);
  if (as_json || !out_file.empty()) {
    const std::string text = tea::analyze_report_json(spec);
    if (out_file.empty())
      std::cout << text << "\n";
    else
      write_text(out_file, text);
    if (as_json && !out_file.empty()) std::cout << text << "\n";
    return kExitOk;
  }
  const tea::CostReport cost = tea::analyze_cost(spec);
  const tea::RFReport rf = tea::analyze_temporal_rf(spec);
  std::cout << "network: " << spec.name << " (" << tea::to_string(spec.variant) << ", "
            << spec.frames << "x" << spec.in_channels << "x" << spec.height << "x"
            << spec.width << ")\n";
  std::cout << "convention: " << tea::kCostConvention << "\n\n";
  std::printf("%-34s %-14s %14s %12s %14s\n", "layer", "kind", "macs", "params", "aux_ops");
  for (const auto& l : cost.layers)
    std::printf("%-34s %-14s %14lld %12lld %14lld\n", l.name.c_str(), l.kind.c_str(),
                static_cast<long long>(l.macs), static_cast<long long>(l.params),
                static_cast<long long>(l.aux_ops));
  std::printf("\n%-34s %-14s %14lld %12lld %14lld\n", "total", "",
              static_cast<long long>(cost.total_macs),
              static_cast<long long>(cost.total_params),
              static_cast<long long>(cost.total_aux));
  std::printf("total conv/linear GMACs: %.3f   params: %.2fM   aux GOps: %.3f\n",
              cost.total_macs / 1e9, cost.total_params / 1e6, cost.total_aux / 1e9);
  std::cout << "\ntemporal receptive field per block:";
  for (int v : rf.per_block) std::cout << " " << v;
  std::cout << "\nper stage:";
  for (int v : rf.per_stage) std::cout << " " << v;
  std::cout << "\ncumulative reach: " << rf.cumulative << " frames each side\n";
  if (rf.has_mta) {
    std::cout << "aggregation fragment radii: ";
    for (int i = 0; i < 4; ++i) std::cout << rf.mta_fragments[i] << (i < 3 ? "," : "\n");
  }
  return kExitOk;
}

int cmd_equivalence(std::uint64_t seed, int cases) {
  std::mt19937 rng = tea::make_rng(tea::mix_seed(seed, 0xe9ULL));
  std::uniform_int_distribution<int> pick_c(0, 2), pick_t(1, 8), pick_hw(1, 12), pick_n(1, 3);
  const int channels[3] = {8, 16, 64};
  double worst = 0;
  for (int i = 0; i < cases; ++i) {
    const int C = channels[pick_c(rng)];
    tea::Tensor x =
        tea::Tensor::zeros({pick_n(rng), pick_t(rng), C, pick_hw(rng), pick_hw(rng)});
    tea::fill_uniform(x, rng, -2.0f, 2.0f);
    tea::ConvKernel k = tea::shift_init_kernel<float>(C);
    tea::Tensor a = tea::temporal_conv<float>(nullptr, x, k);
    tea::Tensor b = tea::temporal_shift<float>(nullptr, x);
    for (std::int64_t j = 0; j < a.numel(); ++j)
      worst = std::max(worst,
                       std::abs(static_cast<double>(a.ptr()[j]) - b.ptr()[j]));
  }
  std::cout << "checked " << cases << " random shapes, max |conv - shift| = " << worst
            << "\n";
  if (worst != 0.0) {
    std::cerr << "equivalence violated: forms differ\n";
    return kExitPropertyFailed;
  }
  return kExitOk;
}

int cmd_selfcheck(std::uint64_t seed, bool quick, const std::string& json_file) {
  tea::SelfcheckOptions opts;
  opts.seed = seed;
  opts.quick = quick;
  const tea::SelfcheckReport report = tea::run_selfcheck(opts);
  for (const auto& c : report.results)
    std::printf("[%s] %-18s %-52s %s\n", c.passed ? "pass" : "FAIL", c.group.c_str(),
                c.name.c_str(), c.detail.c_str());
  std::printf("%d/%d passed (%d/%d core claims)\n", report.passed, report.total,
              report.core_passed, report.core_total);
  if (!json_file.empty()) write_text(json_file, report.to_json_string());
  return report.all_passed() ? kExitOk : kExitPropertyFailed;
}

int cmd_gen_data(const std::string& out_dir, int per_class, std::uint64_t seed,
                 double speed, double noise, int frames_raw) {
  tea::SyntheticDataSpec spec;
  spec.seed = seed;
  spec.speed = speed;
  spec.noise = noise;
  spec.frames_raw = frames_raw;
  const auto clips = tea::generate_dataset(spec, per_class);
  const auto entries = tea::write_dataset(out_dir, clips);
  std::cout << "wrote " << entries.size() << " clips + manifest.json to " << out_dir << "\n";
  return kExitOk;
}

int cmd_train_toy(tea::ToyTrainConfig cfg, const std::string& variant,
                  const std::string& flavor, const std::string& ckpt_file,
                  const std::string& metrics_file, bool quiet) {
  cfg.variant = tea::block_variant_from_string(variant);
  cfg.flavor = tea::temporal_flavor_from_string(flavor);
  std::cout << "resolved config:\n" << cfg.to_json_string() << "\n";
  tea::Network net;
  const tea::ToyTrainResult result =
      tea::train_toy(cfg, ckpt_file.empty() ? nullptr : &net, quiet ? nullptr : &std::cout);
  std::printf("val accuracy %.4f after %d epochs (%.1fs)\n", result.val_accuracy,
              cfg.epochs, result.seconds);
  if (!metrics_file.empty()) write_text(metrics_file, result.metrics_json(cfg));
  if (!ckpt_file.empty()) {
    tea::save_checkpoint(ckpt_file, net);
    std::cout << "checkpoint written to " << ckpt_file << "\n";
  }
  return kExitOk;
}

int cmd_eval(const std::string& ckpt_file, const std::string& data_dir, int frames,
             int batch) {
  tea::Network net = tea::load_checkpoint(ckpt_file);
  namespace fs = std::filesystem;
  const auto entries = tea::read_manifest((fs::path(data_dir) / "manifest.json").string());
  std::vector<tea::ClipRecord> clips;
  clips.reserve(entries.size());
  for (const auto& e : entries) {
    tea::ClipRecord rec = tea::read_clip((fs::path(data_dir) / e.path).string());
    if (rec.label != e.label)
      throw tea::ValueError("manifest label disagrees with clip '" + e.path + "'");
    rec.clip_id = e.clip_id;
    clips.push_back(std::move(rec));
  }
  const double acc = tea::evaluate_accuracy(net, clips, frames, batch);
  std::printf("accuracy %.4f on %zu clips\n", acc, clips.size());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"temporal excitation/aggregation video blocks: analysis and training"};
  app.require_subcommand(1);

  std::uint64_t seed = 0;
  bool seed_given = false;

  // analyze
  auto* analyze = app.add_subcommand("analyze", "static cost and temporal-reach report");
  std::string preset = "resnet50-tea", spec_file, out_file;
  bool as_json = false;
  analyze->add_option("--preset", preset,
                      "built-in network preset (see --list-presets)");
  analyze->add_option("--spec", spec_file, "network spec JSON file (overrides --preset)");
  analyze->add_flag("--json", as_json, "emit the JSON report instead of the table");
  analyze->add_option("--out", out_file, "write the JSON report to this file");
  bool list_presets = false;
  analyze->add_flag("--list-presets", list_presets, "print preset names and exit");

  // equivalence
  auto* equiv = app.add_subcommand(
      "equivalence", "verify the partial temporal shift equals its 3-tap conv form");
  int cases = 120;
  equiv->add_option("--cases", cases, "number of random shapes")->check(CLI::PositiveNumber);
  equiv->add_option("--seed", seed, "rng seed (default: TEA_SEED or 0)")
      ->each([&](const std::string&) { seed_given = true; });

  // selfcheck
  auto* selfcheck = app.add_subcommand("selfcheck", "run the built-in property suite");
  bool quick = false;
  std::string report_json;
  selfcheck->add_flag("--quick", quick, "skip the slower sweeps");
  selfcheck->add_option("--json", report_json, "also write the JSON report here");
  selfcheck->add_option("--seed", seed, "rng seed (default: TEA_SEED or 0)")
      ->each([&](const std::string&) { seed_given = true; });
  bool inject_fault = false;
  selfcheck
      ->add_flag("--inject-grad-fault", inject_fault,
                 "negative control: corrupt conv weight gradients")
      ->group("");  // hidden

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "write a synthetic motion dataset");
  std::string out_dir;
  int per_class = 25, frames_raw = 32;
  double speed = 1.0, noise = 0.05;
  gen->add_option("--out", out_dir, "output directory")->required();
  gen->add_option("--per-class", per_class, "clips per class")->check(CLI::PositiveNumber);
  gen->add_option("--speed", speed, "sprite speed, pixels per raw frame");
  gen->add_option("--noise", noise, "uniform noise amplitude");
  gen->add_option("--frames-raw", frames_raw, "raw frames per clip")
      ->check(CLI::PositiveNumber);
  gen->add_option("--seed", seed, "rng seed (default: TEA_SEED or 0)")
      ->each([&](const std::string&) { seed_given = true; });

  // train-toy
  auto* train = app.add_subcommand("train-toy", "train a small net on the motion task");
  tea::ToyTrainConfig cfg;
  std::string variant = "tea", flavor = "shift_init", ckpt_file, metrics_file;
  bool quiet = false;
  train->add_option("--variant", variant, "block variant (tea, plain_2d, p21d_resnet, ...)");
  train->add_option("--flavor", flavor, "temporal conv flavor (shift_init, channel_wise, dense)");
  train->add_option("--epochs", cfg.epochs, "training epochs")->check(CLI::PositiveNumber);
  train->add_option("--batch", cfg.batch, "batch size")->check(CLI::PositiveNumber);
  train->add_option("--frames", cfg.frames, "sampled frames per clip")
      ->check(CLI::PositiveNumber);
  train->add_option("--lr", cfg.lr, "base learning rate");
  train->add_option("--dropout", cfg.dropout, "classifier dropout");
  train->add_option("--train-per-class", cfg.train_per_class, "training clips per class")
      ->check(CLI::PositiveNumber);
  train->add_option("--val-per-class", cfg.val_per_class, "validation clips per class")
      ->check(CLI::PositiveNumber);
  train->add_option("--checkpoint", ckpt_file, "write the trained net here");
  train->add_option("--metrics", metrics_file, "write the metrics JSON here");
  train->add_flag("--quiet", quiet, "suppress the per-epoch log");
  train->add_option("--seed", seed, "rng seed (default: TEA_SEED or 0)")
      ->each([&](const std::string&) { seed_given = true; });

  // eval
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a written dataset");
  std::string eval_ckpt, eval_data;
  int eval_frames = 8, eval_batch = 32;
  eval->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
  eval->add_option("--data", eval_data, "dataset directory (with manifest.json)")->required();
  eval->add_option("--frames", eval_frames, "sampled frames per clip")
      ->check(CLI::PositiveNumber);
  eval->add_option("--batch", eval_batch, "batch size")->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);

  try {
    if (!seed_given) seed = env_seed();
    if (analyze->parsed()) {
      if (list_presets) {
        for (const auto& name : tea::NetworkSpec::preset_names()) std::cout << name << "\n";
        return kExitOk;
      }
      return cmd_analyze(preset, spec_file, as_json, out_file);
    }
    if (equiv->parsed()) return cmd_equivalence(seed, cases);
    if (selfcheck->parsed()) {
      tea::g_inject_grad_fault = inject_fault;
      return cmd_selfcheck(seed, quick, report_json);
    }
    if (gen->parsed()) return cmd_gen_data(out_dir, per_class, seed, speed, noise, frames_raw);
    if (train->parsed()) {
      cfg.seed = seed;
      return cmd_train_toy(cfg, variant, flavor, ckpt_file, metrics_file, quiet);
    }
    if (eval->parsed()) return cmd_eval(eval_ckpt, eval_data, eval_frames, eval_batch);
  } catch (const tea::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitBadInput;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitBadInput;
  }
  return kExitOk;
}
