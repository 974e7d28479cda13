#include <benchmark/benchmark.h>

#include "tea/block.hpp"
#include "tea/me.hpp"
#include "tea/mta.hpp"
#include "tea/network.hpp"
#include "tea/ops.hpp"
#include "tea/optim.hpp"
#include "tea/rng.hpp"
#include "tea/shift.hpp"

namespace {

tea::Tensor random_input(int n, int t, int c, int h, int w, std::uint64_t seed) {
  std::mt19937 rng = tea::make_rng(seed);
  tea::Tensor x = tea::Tensor::zeros({n, t, c, h, w});
  tea::fill_uniform(x, rng, -1.0f, 1.0f);
  return x;
}

void bm_conv2d_forward(benchmark::State& state) {
  std::mt19937 rng = tea::make_rng(1);
  tea::Tensor x = random_input(2, 4, 32, 28, 28, 2);
  tea::ConvKernel k = tea::make_conv2d<float>(32, 32, 3, 1, 1, rng, false);
  for ([[maybe_unused]] auto _ : state) {
    tea::Tensor y = tea::conv2d<float>(nullptr, x, k);
    benchmark::DoNotOptimize(y.ptr());
  }
}

void bm_conv2d_backward(benchmark::State& state) {
  std::mt19937 rng = tea::make_rng(1);
  tea::Tensor x = random_input(2, 4, 32, 28, 28, 2);
  x.requires_grad = true;
  tea::ConvKernel k = tea::make_conv2d<float>(32, 32, 3, 1, 1, rng, false);
  for ([[maybe_unused]] auto _ : state) {
    tea::Tape tape;
    tea::Tensor loss = tea::sum_all(&tape, tea::conv2d(&tape, x, k));
    tea::backward(tape, loss);
    benchmark::DoNotOptimize(x.grad_ptr());
  }
}

void bm_temporal_conv(benchmark::State& state) {
  std::mt19937 rng = tea::make_rng(3);
  tea::Tensor x = random_input(2, 8, 64, 14, 14, 4);
  tea::ConvKernel k = tea::make_temporal_cw<float>(64, 3, rng, true);
  for ([[maybe_unused]] auto _ : state) {
    tea::Tensor y = tea::temporal_conv<float>(nullptr, x, k);
    benchmark::DoNotOptimize(y.ptr());
  }
}

void bm_temporal_shift(benchmark::State& state) {
  tea::Tensor x = random_input(2, 8, 64, 14, 14, 5);
  for ([[maybe_unused]] auto _ : state) {
    tea::Tensor y = tea::temporal_shift<float>(nullptr, x);
    benchmark::DoNotOptimize(y.ptr());
  }
}

void bm_motion_excitation(benchmark::State& state) {
  std::mt19937 rng = tea::make_rng(6);
  tea::MEModule me = tea::MEModule::make(64, 8, rng);
  tea::Tensor x = random_input(2, 8, 64, 14, 14, 7);
  for ([[maybe_unused]] auto _ : state) {
    tea::Tensor y = tea::me_forward<float>(nullptr, me, x, false);
    benchmark::DoNotOptimize(y.ptr());
  }
}

void bm_temporal_aggregation(benchmark::State& state) {
  std::mt19937 rng = tea::make_rng(8);
  tea::MTAModule mta = tea::MTAModule::make(64, 1, rng, true);
  tea::Tensor x = random_input(2, 8, 64, 14, 14, 9);
  for ([[maybe_unused]] auto _ : state) {
    tea::Tensor y = tea::mta_forward<float>(nullptr, mta, x, false);
    benchmark::DoNotOptimize(y.ptr());
  }
}

void bm_block_forward(benchmark::State& state) {
  std::mt19937 rng = tea::make_rng(10);
  tea::TeaBlock block =
      tea::TeaBlock::make(tea::BlockVariant::Tea, tea::TemporalFlavor::ShiftInit, 64, 16, 64,
                          1, 8, rng);
  tea::Tensor x = random_input(2, 8, 64, 14, 14, 11);
  for ([[maybe_unused]] auto _ : state) {
    tea::Tensor y = block.forward(nullptr, x, false);
    benchmark::DoNotOptimize(y.ptr());
  }
}

void bm_toy_train_step(benchmark::State& state) {
  tea::Network net = tea::build_network(tea::NetworkSpec::preset("toy"), 12);
  std::vector<tea::Tensor*> params = net.params();
  tea::SgdState sgd;
  sgd.lr = 0.01;
  std::mt19937 rng = tea::make_rng(13);
  tea::Tensor x = random_input(8, 8, 3, 16, 16, 14);
  for (std::int64_t i = 0; i < x.numel(); ++i) x.ptr()[i] = std::abs(x.ptr()[i]);
  std::vector<int> labels(8);
  for (int i = 0; i < 8; ++i) labels[static_cast<std::size_t>(i)] = i % 4;
  for ([[maybe_unused]] auto _ : state) {
    tea::Tape tape;
    tea::Tensor logits = net.forward_logits(&tape, x, true, &rng);
    tea::Tensor loss = tea::softmax_cross_entropy(&tape, logits, labels);
    tea::zero_grads(params);
    tea::backward(tape, loss);
    sgd.step(params);
    benchmark::DoNotOptimize(loss.ptr());
  }
}

}  // namespace

BENCHMARK(bm_conv2d_forward);
BENCHMARK(bm_conv2d_backward);
BENCHMARK(bm_temporal_conv);
BENCHMARK(bm_temporal_shift);
BENCHMARK(bm_motion_excitation);
BENCHMARK(bm_temporal_aggregation);
BENCHMARK(bm_block_forward);
BENCHMARK(bm_toy_train_step);

BENCHMARK_MAIN();
