#pragma once

#include <cstdint>

#include "readmit/rng.hpp"
#include "readmit/tensor.hpp"

namespace readmit {

// Adam moment estimates for one parameter tensor. Shapes of m and v always
// match the parameter; t counts completed steps.
struct AdamState {
  Tensor m;
  Tensor v;
  std::int64_t t = 0;

  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;

  explicit AdamState(int rows = 0, int cols = 1) : m(rows, cols), v(rows, cols) {}
  static AdamState like(const Tensor& p) { return AdamState(p.rows, p.cols); }
};

// One Adam update with bias correction; increments state.t.
void adam_step(Tensor& param, const Tensor& grad, AdamState& state, double lr);

// Inverted dropout on a raw array: zero with probability p, scale survivors
// by 1/(1-p) in training mode; identity in eval mode.
Tensor dropout(const Tensor& x, double p, bool training, RngStream& rng);

// -[w_pos * y * ln(p) + (1-y) * ln(1-p)] with p clamped to [1e-7, 1-1e-7].
double weighted_bce(double pred, double label, double w_pos);

}  // namespace readmit
