#include <random>

#include "doctest.h"
#include "tea/fault.hpp"
#include "tea/gradcheck.hpp"
#include "tea/me.hpp"
#include "tea/ops.hpp"
#include "tea/rng.hpp"
#include "tea/shift.hpp"
#include "test_utils.hpp"

using namespace tea;

namespace {

// random values pushed away from 0 so ReLU kinks cannot sit inside the
// finite-difference window
TensorT<double> rand_offzero(std::mt19937& rng, Shape s, bool with_grad = false) {
  TensorT<double> t = tt::rand_tensor<double>(rng, std::move(s), -1.0, 1.0, with_grad);
  for (std::int64_t i = 0; i < t.numel(); ++i) {
    double& v = (*t.data)[static_cast<std::size_t>(i)];
    v += v >= 0 ? 0.1 : -0.1;
  }
  return t;
}

}  // namespace

TEST_SUITE_BEGIN("autodiff");

TEST_CASE("conv2d gradients match finite differences") {
  std::mt19937 rng = make_rng(201);
  TensorT<double> x = rand_offzero(rng, {2, 2, 4, 5, 5}, true);
  ConvKernelT<double> k = make_conv2d<double>(4, 3, 3, 2, 1, rng, true, /*groups=*/1);
  auto loss = [&](TapeT<double>* t) { return sum_all(t, conv2d(t, x, k)); };
  auto res =
      grad_check<double>(loss, {{"x", &x}, {"w", &k.weights}, {"b", &k.bias}}, 1e-5);
  CHECK(res.max_rel_err < 1e-4);
}

TEST_CASE("grouped conv2d gradients match finite differences") {
  std::mt19937 rng = make_rng(202);
  TensorT<double> x = rand_offzero(rng, {1, 2, 6, 4, 4}, true);
  ConvKernelT<double> k = make_conv2d<double>(6, 6, 3, 1, 1, rng, false, /*groups=*/3);
  auto loss = [&](TapeT<double>* t) {
    // square the output so dL/dy depends on y and exercises accumulation
    TensorT<double> y = conv2d(t, x, k);
    return sum_all(t, mul(t, y, y));
  };
  auto res = grad_check<double>(loss, {{"x", &x}, {"w", &k.weights}}, 1e-5);
  CHECK(res.max_rel_err < 1e-4);
}

TEST_CASE("temporal conv gradients match finite differences") {
  std::mt19937 rng = make_rng(203);
  TensorT<double> x = rand_offzero(rng, {1, 5, 4, 3, 3}, true);
  for (const bool dense : {false, true}) {
    ConvKernelT<double> k = dense ? make_temporal_dense<double>(4, 3, rng)
                                  : make_temporal_cw<double>(4, 3, rng, true);
    auto loss = [&](TapeT<double>* t) {
      TensorT<double> y = temporal_conv(t, x, k);
      return sum_all(t, mul(t, y, y));
    };
    auto res = grad_check<double>(loss, {{"x", &x}, {"w", &k.weights}}, 1e-5);
    CHECK(res.max_rel_err < 1e-4);
  }
}

TEST_CASE("temporal shift gradients match finite differences") {
  std::mt19937 rng = make_rng(204);
  TensorT<double> x = rand_offzero(rng, {1, 4, 8, 3, 3}, true);
  TensorT<double> w = tt::rand_tensor<double>(rng, {1, 4, 8, 3, 3});
  auto loss = [&](TapeT<double>* t) {
    return sum_all(t, mul(t, temporal_shift(t, x), w));
  };
  auto res = grad_check<double>(loss, {{"x", &x}}, 1e-5);
  CHECK(res.max_rel_err < 1e-4);
}

TEST_CASE("pooling gradients match finite differences") {
  std::mt19937 rng = make_rng(205);
  TensorT<double> x = tt::rand_tensor<double>(rng, {1, 2, 3, 6, 6}, -1.0, 1.0, true);
  auto gap_loss = [&](TapeT<double>* t) {
    TensorT<double> y = global_avg_pool_spatial(t, x);
    return sum_all(t, mul(t, y, y));
  };
  CHECK(grad_check<double>(gap_loss, {{"x", &x}}, 1e-5).max_rel_err < 1e-4);
  auto avg_loss = [&](TapeT<double>* t) {
    TensorT<double> y = avg_pool2d(t, x, 2, 2);
    return sum_all(t, mul(t, y, y));
  };
  CHECK(grad_check<double>(avg_loss, {{"x", &x}}, 1e-5).max_rel_err < 1e-4);
  auto max_loss = [&](TapeT<double>* t) {
    TensorT<double> y = max_pool2d(t, x, 3, 2, 1);
    return sum_all(t, mul(t, y, y));
  };
  CHECK(grad_check<double>(max_loss, {{"x", &x}}, 1e-6).max_rel_err < 1e-4);
}

TEST_CASE("batch norm training gradients match finite differences") {
  std::mt19937 rng = make_rng(206);
  TensorT<double> x = tt::rand_tensor<double>(rng, {2, 2, 3, 4, 4}, -2.0, 2.0, true);
  BatchNormT<double> bn = BatchNormT<double>::make(3);
  fill_uniform(bn.scale, rng, 0.5, 1.5);
  fill_uniform(bn.shift, rng, -0.5, 0.5);
  // a plain sum of squares would be invariant to x here (normalization pins
  // the batch moments), so weight each element to give x a real gradient
  TensorT<double> wts = TensorT<double>::zeros(x.shape);
  for (std::int64_t i = 0; i < wts.numel(); ++i)
    wts[i] = 0.25 + 0.5 * static_cast<double>(i % 7) / 7.0;
  auto loss = [&](TapeT<double>* t) {
    // reset running stats so repeated forwards see identical state
    std::fill(bn.running_mean.begin(), bn.running_mean.end(), 0.0);
    std::fill(bn.running_var.begin(), bn.running_var.end(), 1.0);
    TensorT<double> y = batch_norm(t, x, bn, true);
    return sum_all(t, mul(t, mul(t, y, y), wts));
  };
  auto res = grad_check<double>(
      loss, {{"x", &x}, {"scale", &bn.scale}, {"shift", &bn.shift}}, 1e-5);
  CHECK(res.max_rel_err < 1e-4);
}

TEST_CASE("activation and elementwise gradients match finite differences") {
  std::mt19937 rng = make_rng(207);
  TensorT<double> x = rand_offzero(rng, {1, 2, 3, 3, 3}, true);
  TensorT<double> y = rand_offzero(rng, {1, 2, 3, 3, 3}, true);
  auto loss = [&](TapeT<double>* t) {
    TensorT<double> h = relu(t, x);
    h = add(t, h, sigmoid(t, y));
    h = affine(t, h, 1.5, -0.25);
    h = mul(t, h, sub(t, x, y));
    return sum_all(t, h);
  };
  auto res = grad_check<double>(loss, {{"x", &x}, {"y", &y}}, 1e-5);
  CHECK(res.max_rel_err < 1e-4);
}

TEST_CASE("slice, concat, pad and reduction gradients match finite differences") {
  std::mt19937 rng = make_rng(208);
  TensorT<double> x = tt::rand_tensor<double>(rng, {1, 3, 8, 2, 2}, -1.0, 1.0, true);
  auto loss = [&](TapeT<double>* t) {
    std::vector<TensorT<double>> parts;
    parts.push_back(channel_slice(t, x, 0, 4));
    parts.push_back(channel_slice(t, x, 4, 8));
    TensorT<double> whole = channel_concat(t, parts);
    TensorT<double> tail = pad_temporal_end(t, temporal_slice(t, whole, 1, 3), 1);
    TensorT<double> g = global_avg_pool_spatial(t, tail);
    TensorT<double> m = temporal_mean(t, g);
    return sum_all(t, mul(t, m, m));
  };
  CHECK(grad_check<double>(loss, {{"x", &x}}, 1e-5).max_rel_err < 1e-4);
}

TEST_CASE("broadcast multiply gradients match finite differences") {
  std::mt19937 rng = make_rng(209);
  TensorT<double> x = tt::rand_tensor<double>(rng, {2, 2, 3, 3, 3}, -1.0, 1.0, true);
  TensorT<double> a = tt::rand_tensor<double>(rng, {2, 2, 3, 1, 1}, -1.0, 1.0, true);
  auto loss = [&](TapeT<double>* t) {
    TensorT<double> y = mul_broadcast_channel(t, x, a);
    return sum_all(t, mul(t, y, y));
  };
  CHECK(grad_check<double>(loss, {{"x", &x}, {"a", &a}}, 1e-5).max_rel_err < 1e-4);
}

TEST_CASE("softmax cross entropy gradients match finite differences") {
  std::mt19937 rng = make_rng(210);
  TensorT<double> logits = tt::rand_tensor<double>(rng, {4, 5}, -2.0, 2.0, true);
  const std::vector<int> labels = {1, 0, 4, 2};
  auto loss = [&](TapeT<double>* t) { return softmax_cross_entropy(t, logits, labels); };
  CHECK(grad_check<double>(loss, {{"logits", &logits}}, 1e-6).max_rel_err < 1e-4);
}

TEST_CASE("dropout backward reuses the forward mask exactly") {
  std::mt19937 rng = make_rng(211);
  Tensor x = Tensor::full({1, 1, 1, 20, 20}, 1.0f);
  x.requires_grad = true;
  x.ensure_grad();
  Tape tape;
  Tensor y = dropout(&tape, x, 0.25, rng, true);
  Tensor loss = sum_all(&tape, y);
  backward(tape, loss);
  for (std::int64_t i = 0; i < x.numel(); ++i)
    CHECK(x.grad_ptr()[i] == y.ptr()[i]);  // dy/dx = mask/(1-p) = y/x with x==1
}

TEST_CASE("tape misuse is rejected") {
  std::mt19937 rng = make_rng(212);
  Tensor x = tt::rand_tensor<float>(rng, {1, 1, 2, 2, 2}, -1.0f, 1.0f, true);

  Tape tape;
  Tensor loss = sum_all(&tape, relu(&tape, x));
  backward(tape, loss);
  CHECK_THROWS_AS(backward(tape, loss), TapeError);  // single use

  Tape other;
  Tensor y = relu(&other, x);
  CHECK_THROWS_AS(backward(other, y), TapeError);  // not a scalar

  Tape third;
  Tensor z = sum_all(&third, relu(&third, x));
  Tape wrong;
  CHECK_THROWS_AS(wrong.backward(z), TapeError);  // recorded elsewhere
}

TEST_CASE("backward is deterministic across identical replays") {
  auto run = [](std::vector<double>* gx, std::vector<double>* gw) {
    std::mt19937 rng = make_rng(213);
    TensorT<double> x = tt::rand_tensor<double>(rng, {2, 3, 4, 5, 5}, -1.0, 1.0, true);
    ConvKernelT<double> k = make_conv2d<double>(4, 4, 3, 1, 1, rng, true);
    BatchNormT<double> bn = BatchNormT<double>::make(4);
    TapeT<double> tape;
    TensorT<double> h = relu(&tape, batch_norm(&tape, conv2d(&tape, x, k), bn, true));
    TensorT<double> loss = sum_all(&tape, mul(&tape, h, h));
    backward(tape, loss);
    *gx = *x.grad;
    *gw = *k.weights.grad;
  };
  std::vector<double> gx1, gw1, gx2, gw2;
  run(&gx1, &gw1);
  run(&gx2, &gw2);
  CHECK(gx1 == gx2);  // bitwise
  CHECK(gw1 == gw2);
}

TEST_CASE("injected gradient fault is caught by the finite-difference check") {
  std::mt19937 rng = make_rng(214);
  TensorT<double> x = rand_offzero(rng, {1, 1, 2, 3, 3}, true);
  ConvKernelT<double> k = make_conv2d<double>(2, 2, 3, 1, 1, rng, false);
  auto loss = [&](TapeT<double>* t) { return sum_all(t, conv2d(t, x, k)); };

  g_inject_grad_fault = true;
  const double bad = grad_check<double>(loss, {{"w", &k.weights}}, 1e-5).max_rel_err;
  g_inject_grad_fault = false;
  const double good = grad_check<double>(loss, {{"w", &k.weights}}, 1e-5).max_rel_err;
  CHECK(bad > 1e-2);
  CHECK(good < 1e-4);
}

TEST_SUITE_END();
