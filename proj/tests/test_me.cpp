#include <cmath>
#include <random>

#include "doctest.h"
#include "tea/me.hpp"
#include "tea/ops.hpp"
#include "tea/reference_ops.hpp"
#include "tea/rng.hpp"
#include "test_utils.hpp"

using namespace tea;

TEST_SUITE_BEGIN("motion-excitation");

TEST_CASE("attention map matches the independent oracle") {
  std::mt19937 rng = make_rng(401);
  for (int rep = 0; rep < 5; ++rep) {
    MEModule me = MEModule::make(16, 4, rng);
    fill_uniform(me.conv_trans.weights, rng, -0.5f, 0.5f);  // break the identity init
    Tensor x = tt::rand_tensor<float>(rng, {2, 4, 16, 5, 5});
    Tensor got = me_attention<float>(nullptr, me, x, false);
    Tensor want = ref::me_attention(x, me.conv_red, me.conv_trans, me.conv_exp);
    CHECK(got.shape == Shape{2, 4, 16, 1, 1});
    CHECK(tt::max_abs_diff(got, want) < 1e-5);
  }
}

TEST_CASE("module output is input plus gated input") {
  std::mt19937 rng = make_rng(402);
  MEModule me = MEModule::make(8, 2, rng);
  Tensor x = tt::rand_tensor<float>(rng, {1, 3, 8, 4, 4});
  Tensor a = me_attention<float>(nullptr, me, x, false);
  Tensor y = me_forward<float>(nullptr, me, x, false);
  Tensor y_bare = me_forward_no_residual<float>(nullptr, me, x, false);
  for (int t = 0; t < 3; ++t)
    for (int c = 0; c < 8; ++c)
      for (int h = 0; h < 4; ++h)
        for (int w = 0; w < 4; ++w) {
          const float xi = x.at5(0, t, c, h, w), ai = a.at5(0, t, c, 0, 0);
          CHECK(y.at5(0, t, c, h, w) == xi + xi * ai);
          CHECK(y_bare.at5(0, t, c, h, w) == xi * ai);
        }
}

TEST_CASE("zeroed expansion makes the residual form an exact identity") {
  std::mt19937 rng = make_rng(403);
  MEModule me = MEModule::make(16, 8, rng);
  std::fill(me.conv_exp.weights.data->begin(), me.conv_exp.weights.data->end(), 0.0f);
  std::fill(me.conv_exp.bias.data->begin(), me.conv_exp.bias.data->end(), 0.0f);
  Tensor x = tt::rand_tensor<float>(rng, {2, 5, 16, 6, 6}, -3.0f, 3.0f);
  CHECK(tt::max_abs_diff(me_forward<float>(nullptr, me, x, false), x) == 0.0);
}

TEST_CASE("expansion bias alone sets a constant gate") {
  std::mt19937 rng = make_rng(404);
  MEModule me = MEModule::make(8, 4, rng);
  std::fill(me.conv_exp.weights.data->begin(), me.conv_exp.weights.data->end(), 0.0f);
  std::fill(me.conv_exp.bias.data->begin(), me.conv_exp.bias.data->end(), 1.0f);
  Tensor x = tt::rand_tensor<float>(rng, {1, 3, 8, 4, 4});
  Tensor a = me_attention<float>(nullptr, me, x, false);
  const float expected = static_cast<float>(2.0 / (1.0 + std::exp(-1.0)) - 1.0);
  for (std::int64_t i = 0; i < a.numel(); ++i)
    CHECK(a.ptr()[i] == doctest::Approx(expected).epsilon(1e-6));
}

TEST_CASE("attention stays strictly inside (-1,1) at natural scales") {
  std::mt19937 rng = make_rng(405);
  float lo = 1e9f, hi = -1e9f;
  for (int rep = 0; rep < 200; ++rep) {
    MEModule me = MEModule::make(8, 4, rng);
    fill_uniform(me.conv_exp.bias, rng, -2.0f, 2.0f);  // nonzero but sane offsets
    Tensor x = tt::rand_tensor<float>(rng, {1, 3, 8, 3, 3}, -3.0f, 3.0f);
    Tensor a = me_attention<float>(nullptr, me, x, false);
    for (std::int64_t i = 0; i < a.numel(); ++i) {
      lo = std::min(lo, a.ptr()[i]);
      hi = std::max(hi, a.ptr()[i]);
    }
  }
  CHECK(lo > -1.0f);
  CHECK(hi < 1.0f);
}

TEST_CASE("attention never escapes [-1,1] even when saturated") {
  // with huge weights the float32 sigmoid rounds to exactly 0 or 1, so the
  // closed interval (and finiteness) is the honest hard guarantee
  std::mt19937 rng = make_rng(415);
  for (int rep = 0; rep < 50; ++rep) {
    MEModule me = MEModule::make(8, 4, rng);
    fill_uniform(me.conv_exp.weights, rng, -40.0f, 40.0f);
    fill_uniform(me.conv_exp.bias, rng, -40.0f, 40.0f);
    Tensor x = tt::rand_tensor<float>(rng, {1, 3, 8, 3, 3}, -3.0f, 3.0f);
    Tensor a = me_attention<float>(nullptr, me, x, false);
    for (std::int64_t i = 0; i < a.numel(); ++i) {
      CHECK(std::isfinite(a.ptr()[i]));
      CHECK(a.ptr()[i] >= -1.0f);
      CHECK(a.ptr()[i] <= 1.0f);
    }
  }
}

TEST_CASE("single-frame clips still produce a bias-driven gate") {
  std::mt19937 rng = make_rng(406);
  MEModule me = MEModule::make(8, 4, rng);
  Tensor x = tt::rand_tensor<float>(rng, {2, 1, 8, 4, 4});
  Tensor a = me_attention<float>(nullptr, me, x, false);
  CHECK(a.shape == Shape{2, 1, 8, 1, 1});
  // motion is identically zero, so the gate is 2*sigmoid(bias) - 1
  for (int n = 0; n < 2; ++n)
    for (int c = 0; c < 8; ++c) {
      const float b = me.conv_exp.bias[c];
      const float expected = static_cast<float>(2.0 / (1.0 + std::exp(-b)) - 1.0);
      CHECK(a.at5(n, 0, c, 0, 0) == doctest::Approx(expected).epsilon(1e-6));
    }
}

TEST_CASE("last frame's motion is defined as zero") {
  std::mt19937 rng = make_rng(407);
  MEModule me = MEModule::make(8, 4, rng);
  std::fill(me.conv_exp.bias.data->begin(), me.conv_exp.bias.data->end(), 0.0f);
  // constant-in-time input: every frame difference vanishes, so with zero
  // bias every gate is exactly 2*sigmoid(0)-1 = 0 at every t including T-1
  Tensor frame = tt::rand_tensor<float>(rng, {1, 1, 8, 4, 4});
  Tensor x = Tensor::zeros({1, 4, 8, 4, 4});
  for (int t = 0; t < 4; ++t)
    for (int c = 0; c < 8; ++c)
      for (int h = 0; h < 4; ++h)
        for (int w = 0; w < 4; ++w) x.at5(0, t, c, h, w) = frame.at5(0, 0, c, h, w);
  Tensor a = me_attention<float>(nullptr, me, x, false);
  for (std::int64_t i = 0; i < a.numel(); ++i) CHECK(a.ptr()[i] == 0.0f);
}

TEST_CASE("construction validates the reduction") {
  std::mt19937 rng = make_rng(408);
  CHECK_THROWS_AS(MEModule::make(10, 4, rng), ValueError);
  CHECK_THROWS_AS(MEModule::make(8, 0, rng), ValueError);
  MEModule me = MEModule::make(8, 4, rng);
  Tensor bad = Tensor::zeros({1, 2, 4, 3, 3});
  CHECK_THROWS_AS(me_attention<float>(nullptr, me, bad, false), ShapeError);
}

TEST_CASE("squeeze-excitation gates per channel with pooled statistics") {
  std::mt19937 rng = make_rng(409);
  SEModule se = SEModule::make(8, 4, rng);
  Tensor x = tt::rand_tensor<float>(rng, {2, 3, 8, 4, 4});
  Tensor y = se_forward<float>(nullptr, se, x);
  CHECK(y.shape == x.shape);
  // the gate is sigmoid(..) in (0,1): |y| < |x| elementwise wherever x != 0
  for (std::int64_t i = 0; i < x.numel(); ++i)
    if (x.ptr()[i] != 0.0f) CHECK(std::abs(y.ptr()[i]) < std::abs(x.ptr()[i]));
}

TEST_SUITE_END();
