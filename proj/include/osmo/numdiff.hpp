#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>

#include "osmo/mat.hpp"

namespace osmo {

// Central-difference gradient estimate, (f(x+eps e_k) - f(x-eps e_k)) / 2eps
// per coordinate. The independent oracle every analytic backward pass in this
// library is checked against.
inline Vec finite_difference_grad(
    const std::function<double(std::span<const double>)>& f, Vec x,
    double eps = 1e-5) {
  Vec grad(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double saved = x[k];
    x[k] = saved + eps;
    const double plus = f(x);
    x[k] = saved - eps;
    const double minus = f(x);
    x[k] = saved;
    grad[k] = (plus - minus) / (2.0 * eps);
  }
  return grad;
}

// Largest relative error between an analytic gradient and its finite
// difference estimate, max_k |a_k - n_k| / max(1, |a_k|, |n_k|).
inline double max_relative_error(std::span<const double> analytic,
                                 std::span<const double> numeric) {
  double worst = 0.0;
  for (std::size_t k = 0; k < analytic.size(); ++k) {
    const double scale =
        std::max({1.0, std::abs(analytic[k]), std::abs(numeric[k])});
    worst = std::max(worst, std::abs(analytic[k] - numeric[k]) / scale);
  }
  return worst;
}

}  // namespace osmo
