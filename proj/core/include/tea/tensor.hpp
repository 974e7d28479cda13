#pragma once

#include <cstdint>
#include <memory>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "tea/errors.hpp"

namespace tea {

using Shape = std::vector<int>;

inline std::int64_t shape_numel(const Shape& s) {
  std::int64_t n = 1;
  for (int d : s) {
    if (d < 0) throw ShapeError("negative dimension in shape");
    n *= d;
  }
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << 'x';
    os << s[i];
  }
  os << ']';
  return os.str();
}

// Dense row-major tensor of rank <= 5. Activations use the fixed axis
// order [N, T, C, H, W]; lower-rank tensors (bias vectors, logits) just
// use fewer axes. Data and gradient buffers are shared_ptrs so tensors
// can be captured by value in backward closures without copying.
template <typename S>
struct TensorT {
  Shape shape;
  std::shared_ptr<std::vector<S>> data;
  bool requires_grad = false;
  std::shared_ptr<std::vector<S>> grad;
  // Identity of the tape that produced this tensor, if any. Used to catch
  // backward() on a tensor from a different tape.
  const void* tape_tag = nullptr;

  TensorT() = default;

  static TensorT zeros(Shape s, bool with_grad = false) {
    TensorT t;
    t.shape = std::move(s);
    t.data = std::make_shared<std::vector<S>>(shape_numel(t.shape), S(0));
    t.requires_grad = with_grad;
    if (with_grad) t.ensure_grad();
    return t;
  }

  static TensorT full(Shape s, S value) {
    TensorT t = zeros(std::move(s));
    std::fill(t.data->begin(), t.data->end(), value);
    return t;
  }

  static TensorT from(Shape s, std::vector<S> values) {
    if (shape_numel(s) != static_cast<std::int64_t>(values.size()))
      throw ShapeError("value count does not match shape " + shape_str(s));
    TensorT t;
    t.shape = std::move(s);
    t.data = std::make_shared<std::vector<S>>(std::move(values));
    return t;
  }

  std::int64_t numel() const { return data ? static_cast<std::int64_t>(data->size()) : 0; }
  bool defined() const { return static_cast<bool>(data); }
  int ndim() const { return static_cast<int>(shape.size()); }

  S* ptr() { return data->data(); }
  const S* ptr() const { return data->data(); }
  S* grad_ptr() { return grad->data(); }
  const S* grad_ptr() const { return grad->data(); }

  S& operator[](std::int64_t i) { return (*data)[static_cast<std::size_t>(i)]; }
  const S& operator[](std::int64_t i) const { return (*data)[static_cast<std::size_t>(i)]; }

  // Convenience accessor for rank-5 tensors in tests and probes.
  S& at5(int n, int t, int c, int h, int w) {
    return (*data)[idx5(n, t, c, h, w)];
  }
  const S& at5(int n, int t, int c, int h, int w) const {
    return (*data)[idx5(n, t, c, h, w)];
  }
  std::size_t idx5(int n, int t, int c, int h, int w) const {
    if (shape.size() != 5) throw ShapeError("at5 on tensor of shape " + shape_str(shape));
    return static_cast<std::size_t>(
        ((((static_cast<std::int64_t>(n) * shape[1] + t) * shape[2] + c) * shape[3] + h) *
             shape[4] +
         w));
  }

  void ensure_grad() {
    if (!grad) grad = std::make_shared<std::vector<S>>(data->size(), S(0));
  }
  void zero_grad() {
    if (grad) std::fill(grad->begin(), grad->end(), S(0));
  }

  // Copy of values only; no grad, no tape association.
  TensorT detached() const {
    TensorT t;
    t.shape = shape;
    t.data = std::make_shared<std::vector<S>>(*data);
    return t;
  }

  template <typename U>
  TensorT<U> cast() const {
    TensorT<U> t;
    t.shape = shape;
    t.data = std::make_shared<std::vector<U>>(data->size());
    for (std::size_t i = 0; i < data->size(); ++i)
      (*t.data)[i] = static_cast<U>((*data)[i]);
    t.requires_grad = requires_grad;
    if (requires_grad) t.ensure_grad();
    return t;
  }
};

using Tensor = TensorT<float>;

template <typename S>
void fill_uniform(TensorT<S>& t, std::mt19937& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  for (auto& v : *t.data) v = static_cast<S>(d(rng));
}

template <typename S>
void fill_normal(TensorT<S>& t, std::mt19937& rng, double stddev = 1.0, double mean = 0.0) {
  std::normal_distribution<double> d(mean, stddev);
  for (auto& v : *t.data) v = static_cast<S>(d(rng));
}

// Unpacks a rank-5 activation shape, throwing a descriptive error otherwise.
template <typename S>
void expect5(const TensorT<S>& x, int& N, int& T, int& C, int& H, int& W,
             const char* who) {
  if (x.ndim() != 5)
    throw ShapeError(std::string(who) + ": expected rank-5 [N,T,C,H,W] input, got " +
                     shape_str(x.shape));
  N = x.shape[0];
  T = x.shape[1];
  C = x.shape[2];
  H = x.shape[3];
  W = x.shape[4];
  if (shape_numel(x.shape) == 0)
    throw ShapeError(std::string(who) + ": empty input " + shape_str(x.shape));
}

}  // namespace tea
