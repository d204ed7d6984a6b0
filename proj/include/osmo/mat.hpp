#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "osmo/errors.hpp"

namespace osmo {

using Vec = std::vector<double>;

// Dense row-major matrix of doubles. Small and value-semantic; every model
// weight block and every embedding batch in this library is one of these.
struct Mat {
  std::size_t rows = 0;
  std::size_t cols = 0;
  Vec data;

  Mat() = default;
  Mat(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t i, std::size_t j) {
    assert(i < rows && j < cols);
    return data[i * cols + j];
  }
  double operator()(std::size_t i, std::size_t j) const {
    assert(i < rows && j < cols);
    return data[i * cols + j];
  }

  std::span<double> row(std::size_t i) {
    assert(i < rows);
    return {data.data() + i * cols, cols};
  }
  std::span<const double> row(std::size_t i) const {
    assert(i < rows);
    return {data.data() + i * cols, cols};
  }

  std::size_t size() const { return data.size(); }

  bool operator==(const Mat& other) const = default;
};

inline bool all_finite(std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

inline bool all_finite(const Mat& m) { return all_finite(std::span(m.data)); }

inline void require_finite(std::span<const double> v, const std::string& what) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) {
      throw NumericError("non-finite value in " + what + " at index " +
                         std::to_string(i));
    }
  }
}

// y = W x. Shapes are checked by callers who know operand names; here we
// only assert in debug builds.
inline void matvec(const Mat& w, std::span<const double> x,
                   std::span<double> y) {
  assert(w.cols == x.size() && w.rows == y.size());
  const double* wd = w.data.data();
  for (std::size_t i = 0; i < w.rows; ++i) {
    double acc = 0.0;
    const double* wrow = wd + i * w.cols;
    for (std::size_t j = 0; j < w.cols; ++j) acc += wrow[j] * x[j];
    y[i] = acc;
  }
}

// y = W^T x (x has w.rows entries, y has w.cols).
inline void matvec_transposed(const Mat& w, std::span<const double> x,
                              std::span<double> y) {
  assert(w.rows == x.size() && w.cols == y.size());
  for (std::size_t j = 0; j < w.cols; ++j) y[j] = 0.0;
  const double* wd = w.data.data();
  for (std::size_t i = 0; i < w.rows; ++i) {
    const double* wrow = wd + i * w.cols;
    const double xi = x[i];
    for (std::size_t j = 0; j < w.cols; ++j) y[j] += wrow[j] * xi;
  }
}

// W += a b^T (outer-product accumulate, the weight-gradient kernel).
inline void add_outer(Mat& w, std::span<const double> a,
                      std::span<const double> b) {
  assert(w.rows == a.size() && w.cols == b.size());
  double* wd = w.data.data();
  for (std::size_t i = 0; i < w.rows; ++i) {
    double* wrow = wd + i * w.cols;
    const double ai = a[i];
    for (std::size_t j = 0; j < w.cols; ++j) wrow[j] += ai * b[j];
  }
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

inline double norm2(std::span<const double> v) { return std::sqrt(dot(v, v)); }

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  assert(x.size() == y.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

}  // namespace osmo
