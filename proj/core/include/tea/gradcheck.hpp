#pragma once

#include <algorithm>
#include <functional>
#include <string>
#include <vector>

#include "tea/tape.hpp"
#include "tea/tensor.hpp"

namespace tea {

struct GradCheckResult {
  double max_rel_err = 0.0;
  double max_abs_err = 0.0;
  std::string worst_param;  // "<name>[flat_index]"
  std::int64_t checked = 0;
};

// Central-difference gradient check. `loss_fn` must rebuild the graph from
// scratch on the given tape (or with nullptr for the plain forward) each
// time it is called; parameters are perturbed in place between calls.
//
// rel = |g_ad - g_fd| / max(1e-5, |g_ad| + |g_fd|)
//
// The denominator floor sets the absolute tolerance for (near-)zero
// gradients: below it, a bound of B on rel means |g_ad - g_fd| < 1e-5 * B.
// Some gradients here are structurally zero (e.g. a bias that cancels in a
// temporal difference), and for those the finite-difference quotient is pure
// rounding noise, |loss| * 2^-52 / (2 * eps); the floor must sit above that
// noise divided by the bound, or zero-gradient elements fail spuriously.
//
// Meant to be instantiated with S = double so the finite-difference
// quotient itself is trustworthy.
template <typename S>
GradCheckResult grad_check(
    const std::function<TensorT<S>(TapeT<S>*)>& loss_fn,
    const std::vector<std::pair<std::string, TensorT<S>*>>& params, double eps = 1e-3) {
  for (auto& [name, p] : params) {
    p->requires_grad = true;
    p->ensure_grad();
    p->zero_grad();
  }
  TapeT<S> tape;
  TensorT<S> loss = loss_fn(&tape);
  tape.backward(loss);

  GradCheckResult res;
  for (auto& [name, p] : params) {
    std::vector<S>& w = *p->data;
    const std::vector<S>& g = *p->grad;
    for (std::size_t j = 0; j < w.size(); ++j) {
      const S keep = w[j];
      w[j] = keep + static_cast<S>(eps);
      const S up = (*loss_fn(nullptr).data)[0];
      w[j] = keep - static_cast<S>(eps);
      const S dn = (*loss_fn(nullptr).data)[0];
      w[j] = keep;
      const double fd = (static_cast<double>(up) - static_cast<double>(dn)) / (2.0 * eps);
      const double ad = static_cast<double>(g[j]);
      const double abs_err = std::abs(ad - fd);
      const double rel = abs_err / std::max(1e-5, std::abs(ad) + std::abs(fd));
      if (rel > res.max_rel_err) {
        res.max_rel_err = rel;
        res.worst_param = name + "[" + std::to_string(j) + "]";
      }
      res.max_abs_err = std::max(res.max_abs_err, abs_err);
      ++res.checked;
    }
  }
  return res;
}

}  // namespace tea
