#include "tea/selfcheck.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "tea/analyzer.hpp"
#include "tea/checkpoint.hpp"
#include "tea/data.hpp"
#include "tea/gradcheck.hpp"
#include "tea/me.hpp"
#include "tea/mta.hpp"
#include "tea/network.hpp"
#include "tea/ops.hpp"
#include "tea/reference_ops.hpp"
#include "tea/rng.hpp"
#include "tea/schema.hpp"
#include "tea/shift.hpp"

namespace tea {

using nlohmann::json;

namespace {

struct Runner {
  SelfcheckReport& report;

  template <typename Fn>
  void run(const std::string& group, const std::string& name, bool core, Fn&& fn) {
    CheckResult r;
    r.group = group;
    r.name = name;
    r.core_claim = core;
    try {
      fn(r);  // sets r.passed / r.detail
    } catch (const std::exception& e) {
      r.passed = false;
      r.detail = std::string("threw: ") + e.what();
    }
    report.results.push_back(std::move(r));
  }
};

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.shape != b.shape) return 1e30;
  double m = 0;
  for (std::int64_t i = 0; i < a.numel(); ++i)
    m = std::max(m, std::abs(static_cast<double>(a.ptr()[i]) - b.ptr()[i]));
  return m;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

std::filesystem::path scratch_file(const char* tag, std::uint64_t seed) {
  return std::filesystem::temp_directory_path() /
         ("tea_selfcheck_" + std::string(tag) + "_" + std::to_string(seed) + ".bin");
}

}  // namespace

SelfcheckReport run_selfcheck(const SelfcheckOptions& opts) {
  SelfcheckReport report;
  Runner r{report};
  std::mt19937 rng = make_rng(mix_seed(opts.seed, 0x5e1fULL));

  // -- shift / conv equivalence ------------------------------------------
  r.run("equivalence", "partial shift equals its 3-tap conv form", true, [&](CheckResult& c) {
    const std::vector<int> channels = opts.quick ? std::vector<int>{8, 16}
                                                 : std::vector<int>{8, 16, 64};
    const int t_max = opts.quick ? 4 : 8;
    double worst = 0;
    int cases = 0;
    for (int C : channels)
      for (int T = 1; T <= t_max; ++T) {
        Tensor x = Tensor::zeros({2, T, C, 5, 4});
        fill_uniform(x, rng, -1.0f, 1.0f);
        ConvKernel k = shift_init_kernel<float>(C);
        Tensor via_conv = temporal_conv<float>(nullptr, x, k);
        Tensor via_shift = temporal_shift<float>(nullptr, x);
        worst = std::max(worst, max_abs_diff(via_conv, via_shift));
        ++cases;
      }
    c.passed = worst == 0.0;
    c.detail = std::to_string(cases) + " shapes, max |diff| = " + fmt(worst);
  });

  // -- forward operators against naive direct summation -------------------
  r.run("operators", "grouped strided conv2d matches direct summation", true,
        [&](CheckResult& c) {
          Tensor x = Tensor::zeros({2, 3, 8, 9, 7});
          fill_uniform(x, rng, -1.0f, 1.0f);
          ConvKernel k = make_conv2d<float>(8, 6, 3, 2, 1, rng, true, /*groups=*/2);
          const double d = max_abs_diff(conv2d<float>(nullptr, x, k), ref::conv2d(x, k));
          c.passed = d < 1e-5;
          c.detail = "max |diff| = " + fmt(d);
        });
  r.run("operators", "temporal conv matches direct summation", true, [&](CheckResult& c) {
    Tensor x = Tensor::zeros({2, 5, 6, 3, 4});
    fill_uniform(x, rng, -1.0f, 1.0f);
    ConvKernel k = make_temporal_cw<float>(6, 3, rng, true);
    const double d = max_abs_diff(temporal_conv<float>(nullptr, x, k), ref::temporal_conv(x, k));
    c.passed = d < 1e-5;
    c.detail = "max |diff| = " + fmt(d);
  });
  r.run("operators", "training batch norm matches direct summation", false,
        [&](CheckResult& c) {
          Tensor x = Tensor::zeros({2, 3, 5, 4, 4});
          fill_uniform(x, rng, -2.0f, 2.0f);
          BatchNorm bn = BatchNorm::make(5);
          fill_uniform(bn.scale, rng, 0.5f, 1.5f);
          fill_uniform(bn.shift, rng, -0.5f, 0.5f);
          Tensor got = batch_norm<float>(nullptr, x, bn, true);
          Tensor want = ref::batch_norm(x, *bn.scale.data, *bn.shift.data, bn.running_mean,
                                        bn.running_var, bn.eps, true);
          const double d = max_abs_diff(got, want);
          c.passed = d < 1e-5;
          c.detail = "max |diff| = " + fmt(d);
        });

  // -- gradients -----------------------------------------------------------
  r.run("gradients", "conv2d gradients match finite differences", true, [&](CheckResult& c) {
    TensorT<double> x = TensorT<double>::zeros({1, 2, 3, 4, 4}, true);
    std::mt19937 g = make_rng(mix_seed(opts.seed, 0xc0ULL));
    fill_uniform(x, g, -1.0, 1.0);
    ConvKernelT<double> k = make_conv2d<double>(3, 4, 3, 1, 1, g, true);
    auto loss = [&](TapeT<double>* tape) {
      return sum_all(tape, relu(tape, conv2d(tape, x, k)));
    };
    auto res = grad_check<double>(loss, {{"x", &x}, {"w", &k.weights}, {"b", &k.bias}}, 1e-5);
    c.passed = res.max_rel_err < 1e-4;
    c.detail = "max rel err = " + fmt(res.max_rel_err) + " at " + res.worst_param;
  });
  r.run("gradients", "motion-excitation gradients match finite differences", true,
        [&](CheckResult& c) {
          std::mt19937 g = make_rng(mix_seed(opts.seed, 0xc1ULL));
          TensorT<double> x = TensorT<double>::zeros({1, 3, 8, 3, 3}, true);
          fill_uniform(x, g, -1.0, 1.0);
          MEModuleT<double> me = MEModuleT<double>::make(8, 4, g);
          fill_uniform(me.conv_trans.weights, g, -0.5, 0.5);
          auto loss = [&](TapeT<double>* tape) {
            return sum_all(tape, me_forward(tape, me, x, true));
          };
          auto res = grad_check<double>(loss, {{"x", &x}, {"w_red", &me.conv_red.weights}},
                                        1e-3);
          c.passed = res.max_rel_err < 1e-4;
          c.detail = "max rel err = " + fmt(res.max_rel_err) + " at " + res.worst_param;
        });

  // -- motion excitation ----------------------------------------------------
  r.run("motion-excitation", "zeroed expansion leaves the input untouched", true,
        [&](CheckResult& c) {
          MEModule me = MEModule::make(16, 4, rng);
          std::fill(me.conv_exp.weights.data->begin(), me.conv_exp.weights.data->end(), 0.0f);
          if (me.conv_exp.has_bias())
            std::fill(me.conv_exp.bias.data->begin(), me.conv_exp.bias.data->end(), 0.0f);
          Tensor x = Tensor::zeros({2, 4, 16, 5, 5});
          fill_uniform(x, rng, -1.0f, 1.0f);
          Tensor y = me_forward<float>(nullptr, me, x, false);
          c.passed = max_abs_diff(x, y) == 0.0;
          c.detail = "max |y - x| = " + fmt(max_abs_diff(x, y));
        });
  r.run("motion-excitation", "attention stays strictly inside (-1, 1)", true,
        [&](CheckResult& c) {
          const int evals = opts.quick ? 50 : 300;
          float lo = 1e9f, hi = -1e9f;
          for (int i = 0; i < evals; ++i) {
            MEModule me = MEModule::make(8, 4, rng);
            fill_uniform(me.conv_exp.weights, rng, -3.0f, 3.0f);
            Tensor x = Tensor::zeros({1, 3, 8, 4, 4});
            fill_uniform(x, rng, -2.0f, 2.0f);
            Tensor a = me_attention<float>(nullptr, me, x, false);
            for (std::int64_t j = 0; j < a.numel(); ++j) {
              lo = std::min(lo, a.ptr()[j]);
              hi = std::max(hi, a.ptr()[j]);
            }
          }
          c.passed = lo > -1.0f && hi < 1.0f;
          c.detail = "range [" + fmt(lo) + ", " + fmt(hi) + "] over " +
                     std::to_string(evals) + " modules";
        });

  // -- temporal aggregation --------------------------------------------------
  r.run("aggregation", "fragment temporal radii are 0,1,2,3", true, [&](CheckResult& c) {
    const std::array<int, 4> want{0, 1, 2, 3};
    bool ok = true;
    std::array<int, 4> got{};
    for (int rep = 0; rep < 3 && ok; ++rep) {
      got = mta_probe_temporal_radii<float>(16, 1, rng);
      ok = got == want;
    }
    c.passed = ok;
    c.detail = "radii = (" + std::to_string(got[0]) + "," + std::to_string(got[1]) + "," +
               std::to_string(got[2]) + "," + std::to_string(got[3]) + ")";
  });
  r.run("aggregation", "fragment spatial radii are 0,1,2,3", false, [&](CheckResult& c) {
    const std::array<int, 4> got = mta_probe_spatial_radii<float>(16, rng);
    c.passed = got == std::array<int, 4>{0, 1, 2, 3};
    c.detail = "radii = (" + std::to_string(got[0]) + "," + std::to_string(got[1]) + "," +
               std::to_string(got[2]) + "," + std::to_string(got[3]) + ")";
  });
  r.run("aggregation", "cascade is cheaper than one dense 3x3 conv", true,
        [&](CheckResult& c) {
          bool ok = true;
          for (int C = 4; C <= 512; C *= 2)
            ok = ok && mta_param_count(C) < static_cast<std::int64_t>(9) * C * C;
          c.passed = ok;
          c.detail = "checked C = 4..512; e.g. C=256: " +
                     std::to_string(mta_param_count(256)) + " vs " +
                     std::to_string(9LL * 256 * 256);
        });

  // -- analyzer ----------------------------------------------------------------
  r.run("analyzer", "full-size cost totals land in the published windows", true,
        [&](CheckResult& c) {
          const double plain = static_cast<double>(
              analyze_cost(NetworkSpec::preset("resnet50-2d")).total_macs);
          const double tea =
              static_cast<double>(analyze_cost(NetworkSpec::preset("resnet50-tea")).total_macs);
          const double ratio = tea / plain;
          c.passed = std::abs(plain - 33e9) <= 3.3e9 && std::abs(tea - 35e9) <= 3.5e9 &&
                     ratio >= 1.03 && ratio <= 1.10;
          c.detail = "plain " + fmt(plain / 1e9) + "G, cascade " + fmt(tea / 1e9) +
                     "G, ratio " + fmt(ratio);
        });
  r.run("analyzer", "analytic temporal reach matches impulse probes", true,
        [&](CheckResult& c) {
          const NetworkSpec spec = NetworkSpec::preset("toy");
          const RFReport rf = analyze_temporal_rf(spec);
          const std::vector<int> probes =
              probe_block_temporal_radii(spec, mix_seed(opts.seed, 0xafULL));
          c.passed = rf.per_block == probes;
          std::ostringstream ss;
          ss << "per block:";
          for (std::size_t i = 0; i < probes.size(); ++i)
            ss << " " << rf.per_block[i] << "/" << probes[i];
          c.detail = ss.str();
        });

  // -- data ------------------------------------------------------------------
  r.run("data", "zero speed makes all four classes bit-identical", true,
        [&](CheckResult& c) {
          SyntheticDataSpec s;
          s.speed = 0.0;
          s.seed = mix_seed(opts.seed, 0xd0ULL);
          auto clips = generate_dataset(s, 2);
          double d = 0;
          for (int label = 1; label < 4; ++label)
            for (int idx = 0; idx < 2; ++idx)
              d = std::max(d, max_abs_diff(clips[static_cast<std::size_t>(idx)].frames,
                                           clips[static_cast<std::size_t>(label * 2 + idx)]
                                               .frames));
          c.passed = d == 0.0;
          c.detail = "max cross-class |diff| = " + fmt(d);
        });
  r.run("data", "segment sampling picks one frame per segment", false, [&](CheckResult& c) {
    const std::vector<int> idx = sparse_sample_indices(32, 8, SampleMode::Test, nullptr);
    bool ok = idx == std::vector<int>{2, 6, 10, 14, 18, 22, 26, 30};
    std::mt19937 g = make_rng(mix_seed(opts.seed, 0xd1ULL));
    for (int rep = 0; rep < 20 && ok; ++rep) {
      const std::vector<int> tr = sparse_sample_indices(30, 7, SampleMode::Train, &g);
      for (int i = 0; i < 7 && ok; ++i)
        ok = tr[static_cast<std::size_t>(i)] >= i * 30 / 7 &&
             tr[static_cast<std::size_t>(i)] < (i + 1) * 30 / 7;
    }
    c.passed = ok;
    c.detail = ok ? "centres and in-segment draws as specified" : "index outside its segment";
  });
  if (!opts.quick)
    r.run("data", "single frames carry no class signal", true, [&](CheckResult& c) {
      SyntheticDataSpec s;
      s.seed = mix_seed(opts.seed, 0xd2ULL);
      auto train = generate_dataset(s, 30);
      SyntheticDataSpec sv = s;
      sv.seed = mix_seed(opts.seed, 0xd3ULL);
      auto val = generate_dataset(sv, 15);
      const double acc = linear_probe_accuracy(train, val, s.classes, opts.seed);
      c.passed = acc <= 0.45;  // chance is 0.25
      c.detail = "centre-frame linear probe accuracy = " + fmt(acc);
    });

  // -- io ----------------------------------------------------------------------
  r.run("io", "clip files round-trip bit-exactly", true, [&](CheckResult& c) {
    SyntheticDataSpec s;
    s.frames_raw = 4;
    s.seed = mix_seed(opts.seed, 0xe0ULL);
    ClipRecord rec = generate_dataset(s, 1)[2];
    const auto path = scratch_file("clip", opts.seed);
    write_clip(path.string(), rec);
    ClipRecord back = read_clip(path.string());
    std::filesystem::remove(path);
    c.passed = back.label == rec.label && max_abs_diff(back.frames, rec.frames) == 0.0;
    c.detail = "label and every float preserved";
  });
  r.run("io", "corrupted clip header is rejected, not crashed on", true, [&](CheckResult& c) {
    const auto path = scratch_file("badclip", opts.seed);
    {
      std::ofstream f(path, std::ios::binary);
      f << "NOPE";
    }
    bool ok = false;
    try {
      read_clip(path.string());
    } catch (const BadMagicError&) {
      ok = true;
    }
    std::filesystem::remove(path);
    c.passed = ok;
    c.detail = ok ? "BadMagicError raised" : "wrong or missing error";
  });
  r.run("io", "checkpoint round-trip reproduces logits bit-exactly", true,
        [&](CheckResult& c) {
          NetworkSpec spec = NetworkSpec::preset("toy-plain_2d");
          spec.frames = 2;
          Network net = build_network(spec, mix_seed(opts.seed, 0xe1ULL));
          Tensor x = Tensor::zeros({1, 2, 3, 16, 16});
          fill_uniform(x, rng, 0.0f, 1.0f);
          Tensor before = net.forward_logits(nullptr, x, false);
          const auto path = scratch_file("ckpt", opts.seed);
          save_checkpoint(path.string(), net);
          Network back = load_checkpoint(path.string());
          std::filesystem::remove(path);
          Tensor after = back.forward_logits(nullptr, x, false);
          c.passed = max_abs_diff(before, after) == 0.0;
          c.detail = "max |logit diff| = " + fmt(max_abs_diff(before, after));
        });

  // -- schema --------------------------------------------------------------------
  r.run("schema", "manifest schema accepts and rejects as designed", false,
        [&](CheckResult& c) {
          const char* schema = R"({
            "type": "array",
            "items": {"type": "object",
                      "required": ["path", "label", "clip_id"],
                      "properties": {"label": {"type": "integer", "minimum": 0}}}
          })";
          auto good = schema_validate_text(
              R"([{"path":"a.teac","label":1,"clip_id":0}])", schema);
          auto bad = schema_validate_text(R"([{"path":"a.teac","label":-1}])", schema);
          c.passed = good.empty() && bad.size() == 2;
          c.detail = "violations: good=" + std::to_string(good.size()) +
                     " bad=" + std::to_string(bad.size());
        });

  for (const auto& res : report.results) {
    ++report.total;
    res.passed ? ++report.passed : ++report.failed;
    if (res.core_claim) {
      ++report.core_total;
      if (res.passed) ++report.core_passed;
    }
  }
  return report;
}

std::string SelfcheckReport::to_json_string(int indent) const {
  json checks = json::array();
  for (const auto& r : results)
    checks.push_back({{"group", r.group},
                      {"name", r.name},
                      {"passed", r.passed},
                      {"core_claim", r.core_claim},
                      {"detail", r.detail}});
  json j{{"checks", checks},
         {"total", total},
         {"passed", passed},
         {"failed", failed},
         {"core_total", core_total},
         {"core_passed", core_passed},
         {"all_passed", all_passed()}};
  return j.dump(indent);
}

}  // namespace tea
