#pragma once

#include <cmath>
#include <vector>

#include "tea/tensor.hpp"

namespace tea {

// Classic SGD with momentum and decoupled-from-nothing L2 weight decay,
// i.e. decay is added to the gradient before the velocity update:
//   v <- m*v - lr*(g + wd*p);  p <- p + v
template <typename S>
struct SgdStateT {
  double lr = 0.01;
  double momentum = 0.9;
  double weight_decay = 0.0;
  std::vector<std::vector<S>> velocity;

  void step(std::vector<TensorT<S>*>& params) {
    if (velocity.empty()) {
      velocity.resize(params.size());
      for (std::size_t i = 0; i < params.size(); ++i)
        velocity[i].assign(static_cast<std::size_t>(params[i]->numel()), S(0));
    }
    if (velocity.size() != params.size())
      throw ValueError("sgd: parameter list changed size between steps");
    for (std::size_t i = 0; i < params.size(); ++i) {
      TensorT<S>& p = *params[i];
      if (!p.grad) continue;
      S* w = p.ptr();
      const S* g = p.grad_ptr();
      std::vector<S>& v = velocity[i];
      if (v.size() != p.data->size())
        throw ValueError("sgd: parameter shape changed between steps");
      for (std::size_t j = 0; j < v.size(); ++j) {
        const S gj = g[j] + static_cast<S>(weight_decay) * w[j];
        v[j] = static_cast<S>(momentum) * v[j] - static_cast<S>(lr) * gj;
        w[j] += v[j];
      }
    }
  }
};

using SgdState = SgdStateT<float>;

// Half-cosine decay from base_lr to ~0 across total_epochs, constant
// within an epoch.
inline double cosine_lr(double base_lr, int epoch, int total_epochs) {
  if (total_epochs <= 0) return base_lr;
  const double t = static_cast<double>(epoch) / static_cast<double>(total_epochs);
  return base_lr * 0.5 * (1.0 + std::cos(3.14159265358979323846 * t));
}

template <typename S>
void zero_grads(std::vector<TensorT<S>*>& params) {
  for (auto* p : params) p->zero_grad();
}

}  // namespace tea
