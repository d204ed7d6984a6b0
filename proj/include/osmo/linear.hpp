#pragma once

#include <cstddef>
#include <span>
#include <string>

#include "osmo/errors.hpp"
#include "osmo/mat.hpp"
#include "osmo/rng.hpp"

namespace osmo {

// Fully connected layer y = W x + b.
struct LinearParams {
  Mat weight;  // out x in
  Vec bias;    // out

  LinearParams() = default;
  LinearParams(std::size_t in, std::size_t out)
      : weight(out, in), bias(out, 0.0) {}

  std::size_t input_size() const { return weight.cols; }
  std::size_t output_size() const { return weight.rows; }
  std::size_t param_count() const { return weight.size() + bias.size(); }
};

template <class Params, class F>
void visit_linear_blocks(Params& p, F&& f) {
  f("weight", std::span(p.weight.data));
  f("bias", std::span(p.bias));
}

inline void init_uniform(LinearParams& p, double bound, RngStream& rng) {
  visit_linear_blocks(p, [&](const char*, std::span<double> block) {
    for (double& w : block) w = rng.uniform(-bound, bound);
  });
}

struct LinearCache {
  const LinearParams* params = nullptr;
  Vec input;
};

struct LinearGrads {
  LinearParams d_params;
  Vec d_input;
};

inline LinearCache linear_forward(std::span<const double> x,
                                  const LinearParams& params,
                                  std::span<double> y) {
  if (x.size() != params.input_size()) {
    throw ShapeError("linear_forward: input has width " +
                     std::to_string(x.size()) + ", weight expects " +
                     std::to_string(params.input_size()));
  }
  if (y.size() != params.output_size()) {
    throw ShapeError("linear_forward: output has width " +
                     std::to_string(y.size()) + ", weight produces " +
                     std::to_string(params.output_size()));
  }
  matvec(params.weight, x, y);
  axpy(1.0, params.bias, y);
  LinearCache cache;
  cache.params = &params;
  cache.input.assign(x.begin(), x.end());
  return cache;
}

inline LinearGrads linear_backward(const LinearCache& cache,
                                   std::span<const double> d_out) {
  if (cache.params == nullptr) {
    throw ContractError(
        "linear_backward: cache does not come from linear_forward");
  }
  const LinearParams& p = *cache.params;
  if (d_out.size() != p.output_size()) {
    throw ShapeError("linear_backward: d_out has width " +
                     std::to_string(d_out.size()) + ", weight produces " +
                     std::to_string(p.output_size()));
  }
  LinearGrads g;
  g.d_params = LinearParams(p.input_size(), p.output_size());
  g.d_input.assign(p.input_size(), 0.0);
  add_outer(g.d_params.weight, d_out, cache.input);
  axpy(1.0, d_out, g.d_params.bias);
  matvec_transposed(p.weight, d_out, g.d_input);
  return g;
}

}  // namespace osmo
