#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "osmo/errors.hpp"
#include "osmo/mat.hpp"
#include "osmo/rng.hpp"

namespace osmo {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Single-layer GRU weights, dual-bias formulation:
//   r_t = sigma(W_ir x_t + b_ir + W_hr h_{t-1} + b_hr)
//   z_t = sigma(W_iz x_t + b_iz + W_hz h_{t-1} + b_hz)
//   n_t = tanh (W_in x_t + b_in + r_t * (W_hn h_{t-1} + b_hn))
//   h_t = (1 - z_t) * n_t + z_t * h_{t-1}
struct GruParams {
  Mat w_ir, w_iz, w_in;  // hidden x in
  Mat w_hr, w_hz, w_hn;  // hidden x hidden
  Vec b_ir, b_iz, b_in;  // hidden
  Vec b_hr, b_hz, b_hn;  // hidden

  GruParams() = default;
  GruParams(std::size_t in, std::size_t hidden)
      : w_ir(hidden, in),
        w_iz(hidden, in),
        w_in(hidden, in),
        w_hr(hidden, hidden),
        w_hz(hidden, hidden),
        w_hn(hidden, hidden),
        b_ir(hidden, 0.0),
        b_iz(hidden, 0.0),
        b_in(hidden, 0.0),
        b_hr(hidden, 0.0),
        b_hz(hidden, 0.0),
        b_hn(hidden, 0.0) {}

  std::size_t input_size() const { return w_ir.cols; }
  std::size_t hidden_size() const { return w_ir.rows; }

  std::size_t param_count() const {
    return 3 * w_ir.size() + 3 * w_hr.size() + 6 * b_ir.size();
  }
};

// Visits every weight block in a fixed order shared by the optimizer, the
// checkpoint format, and the gradient tests.
template <class Params, class F>
void visit_gru_blocks(Params& p, F&& f) {
  f("w_ir", std::span(p.w_ir.data));
  f("w_iz", std::span(p.w_iz.data));
  f("w_in", std::span(p.w_in.data));
  f("w_hr", std::span(p.w_hr.data));
  f("w_hz", std::span(p.w_hz.data));
  f("w_hn", std::span(p.w_hn.data));
  f("b_ir", std::span(p.b_ir));
  f("b_iz", std::span(p.b_iz));
  f("b_in", std::span(p.b_in));
  f("b_hr", std::span(p.b_hr));
  f("b_hz", std::span(p.b_hz));
  f("b_hn", std::span(p.b_hn));
}

inline void init_uniform(GruParams& p, double bound, RngStream& rng) {
  visit_gru_blocks(p, [&](const char*, std::span<double> block) {
    for (double& w : block) w = rng.uniform(-bound, bound);
  });
}

inline void accumulate(GruParams& acc, const GruParams& src) {
  axpy(1.0, src.w_ir.data, std::span(acc.w_ir.data));
  axpy(1.0, src.w_iz.data, std::span(acc.w_iz.data));
  axpy(1.0, src.w_in.data, std::span(acc.w_in.data));
  axpy(1.0, src.w_hr.data, std::span(acc.w_hr.data));
  axpy(1.0, src.w_hz.data, std::span(acc.w_hz.data));
  axpy(1.0, src.w_hn.data, std::span(acc.w_hn.data));
  axpy(1.0, src.b_ir, acc.b_ir);
  axpy(1.0, src.b_iz, acc.b_iz);
  axpy(1.0, src.b_in, acc.b_in);
  axpy(1.0, src.b_hr, acc.b_hr);
  axpy(1.0, src.b_hz, acc.b_hz);
  axpy(1.0, src.b_hn, acc.b_hn);
}

// Activations recorded by gru_forward for the reverse pass.
struct GruCache {
  const GruParams* params = nullptr;
  std::vector<Vec> inputs;     // L x in
  std::vector<Vec> h;          // L+1 x hidden, h[0] = h0
  std::vector<Vec> r, z, n;    // L x hidden
  std::vector<Vec> hn_affine;  // L x hidden: W_hn h_{t-1} + b_hn

  std::size_t steps() const { return inputs.size(); }
};

struct GruGrads {
  GruParams d_params;            // same shapes as the weights
  std::vector<Vec> d_inputs;     // L x in
};

// Runs the GRU over a sequence from initial state h0 and returns all hidden
// states; h.back() is the sequence summary.
inline GruCache gru_forward(std::span<const Vec> inputs,
                            std::span<const double> h0,
                            const GruParams& params) {
  const std::size_t hidden = params.hidden_size();
  const std::size_t in = params.input_size();
  if (inputs.empty()) {
    throw ContractError("gru_forward: empty input sequence");
  }
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    if (inputs[t].size() != in) {
      throw ShapeError("gru_forward: input step " + std::to_string(t) +
                       " has width " + std::to_string(inputs[t].size()) +
                       ", W_ir expects " + std::to_string(in));
    }
  }
  if (h0.size() != hidden) {
    throw ShapeError("gru_forward: h0 has width " + std::to_string(h0.size()) +
                     ", W_hr expects " + std::to_string(hidden));
  }

  const std::size_t L = inputs.size();
  GruCache cache;
  cache.params = &params;
  cache.inputs.assign(inputs.begin(), inputs.end());
  cache.h.assign(L + 1, Vec(hidden));
  cache.r.assign(L, Vec(hidden));
  cache.z.assign(L, Vec(hidden));
  cache.n.assign(L, Vec(hidden));
  cache.hn_affine.assign(L, Vec(hidden));
  cache.h[0].assign(h0.begin(), h0.end());

  Vec gate_i(hidden), gate_h(hidden);
  for (std::size_t t = 0; t < L; ++t) {
    const Vec& x = cache.inputs[t];
    const Vec& h_prev = cache.h[t];
    Vec& r = cache.r[t];
    Vec& z = cache.z[t];
    Vec& n = cache.n[t];
    Vec& a = cache.hn_affine[t];

    matvec(params.w_ir, x, gate_i);
    matvec(params.w_hr, h_prev, gate_h);
    for (std::size_t k = 0; k < hidden; ++k) {
      r[k] = sigmoid(gate_i[k] + params.b_ir[k] + gate_h[k] + params.b_hr[k]);
    }

    matvec(params.w_iz, x, gate_i);
    matvec(params.w_hz, h_prev, gate_h);
    for (std::size_t k = 0; k < hidden; ++k) {
      z[k] = sigmoid(gate_i[k] + params.b_iz[k] + gate_h[k] + params.b_hz[k]);
    }

    matvec(params.w_in, x, gate_i);
    matvec(params.w_hn, h_prev, gate_h);
    for (std::size_t k = 0; k < hidden; ++k) {
      a[k] = gate_h[k] + params.b_hn[k];
      n[k] = std::tanh(gate_i[k] + params.b_in[k] + r[k] * a[k]);
      cache.h[t + 1][k] = (1.0 - z[k]) * n[k] + z[k] * h_prev[k];
    }
#ifndef NDEBUG
    assert(all_finite(cache.h[t + 1]));
#endif
  }
  return cache;
}

// Reverse-mode pass. d_hL is the cotangent of the final hidden state; the
// returned gradients are exact for the scalar it represents.
inline GruGrads gru_backward(const GruCache& cache,
                             std::span<const double> d_hL) {
  if (cache.params == nullptr || cache.steps() == 0) {
    throw ContractError("gru_backward: cache does not come from gru_forward");
  }
  const GruParams& p = *cache.params;
  const std::size_t hidden = p.hidden_size();
  const std::size_t in = p.input_size();
  const std::size_t L = cache.steps();
  if (d_hL.size() != hidden) {
    throw ShapeError("gru_backward: d_hL has width " +
                     std::to_string(d_hL.size()) + ", hidden state is " +
                     std::to_string(hidden));
  }

  GruGrads g;
  g.d_params = GruParams(in, hidden);
  g.d_inputs.assign(L, Vec(in));

  Vec d_h(d_hL.begin(), d_hL.end());
  Vec d_h_prev(hidden), d_r_pre(hidden), d_z_pre(hidden), d_n_pre(hidden);
  Vec d_a(hidden), tmp(hidden), d_x_part(in);

  for (std::size_t step = L; step-- > 0;) {
    const Vec& h_prev = cache.h[step];
    const Vec& r = cache.r[step];
    const Vec& z = cache.z[step];
    const Vec& n = cache.n[step];
    const Vec& a = cache.hn_affine[step];
    const Vec& x = cache.inputs[step];

    for (std::size_t k = 0; k < hidden; ++k) {
      const double d_z = d_h[k] * (h_prev[k] - n[k]);
      const double d_n = d_h[k] * (1.0 - z[k]);
      d_h_prev[k] = d_h[k] * z[k];
      d_n_pre[k] = d_n * (1.0 - n[k] * n[k]);
      d_a[k] = d_n_pre[k] * r[k];
      const double d_r = d_n_pre[k] * a[k];
      d_r_pre[k] = d_r * r[k] * (1.0 - r[k]);
      d_z_pre[k] = d_z * z[k] * (1.0 - z[k]);
    }

    add_outer(g.d_params.w_in, d_n_pre, x);
    add_outer(g.d_params.w_hn, d_a, h_prev);
    add_outer(g.d_params.w_ir, d_r_pre, x);
    add_outer(g.d_params.w_hr, d_r_pre, h_prev);
    add_outer(g.d_params.w_iz, d_z_pre, x);
    add_outer(g.d_params.w_hz, d_z_pre, h_prev);
    axpy(1.0, d_n_pre, g.d_params.b_in);
    axpy(1.0, d_a, g.d_params.b_hn);
    axpy(1.0, d_r_pre, g.d_params.b_ir);
    axpy(1.0, d_r_pre, g.d_params.b_hr);
    axpy(1.0, d_z_pre, g.d_params.b_iz);
    axpy(1.0, d_z_pre, g.d_params.b_hz);

    matvec_transposed(p.w_hn, d_a, tmp);
    axpy(1.0, tmp, d_h_prev);
    matvec_transposed(p.w_hr, d_r_pre, tmp);
    axpy(1.0, tmp, d_h_prev);
    matvec_transposed(p.w_hz, d_z_pre, tmp);
    axpy(1.0, tmp, d_h_prev);

    Vec& d_x = g.d_inputs[step];
    matvec_transposed(p.w_in, d_n_pre, d_x);
    matvec_transposed(p.w_ir, d_r_pre, d_x_part);
    axpy(1.0, d_x_part, d_x);
    matvec_transposed(p.w_iz, d_z_pre, d_x_part);
    axpy(1.0, d_x_part, d_x);

    d_h = d_h_prev;
  }
  return g;
}

}  // namespace osmo
