#include "readmit/optim.hpp"

#include <algorithm>
#include <cmath>

namespace readmit {

void adam_step(Tensor& param, const Tensor& grad, AdamState& state, double lr) {
  if (!param.same_shape(grad) || !param.same_shape(state.m) || !param.same_shape(state.v))
    throw ConfigError("adam_step: shape mismatch");
  if (lr <= 0.0 && lr != 0.0) throw ConfigError("adam_step: lr must be >= 0");

  state.t += 1;
  const double b1 = AdamState::kBeta1;
  const double b2 = AdamState::kBeta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.t));
  for (int i = 0; i < param.size(); ++i) {
    const double g = grad[i];
    state.m[i] = b1 * state.m[i] + (1.0 - b1) * g;
    state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g;
    const double mhat = state.m[i] / c1;
    const double vhat = state.v[i] / c2;
    param[i] -= lr * mhat / (std::sqrt(vhat) + AdamState::kEps);
  }
}

Tensor dropout(const Tensor& x, double p, bool training, RngStream& rng) {
  if (p >= 1.0 || p < 0.0) throw ConfigError("dropout: probability must be in [0, 1)");
  if (!training || p == 0.0) return x;
  Tensor out(x.rows, x.cols);
  const double keep_scale = 1.0 / (1.0 - p);
  for (int i = 0; i < x.size(); ++i)
    out[i] = rng.uniform01() < p ? 0.0 : x[i] * keep_scale;
  return out;
}

double weighted_bce(double pred, double label, double w_pos) {
  const double p = std::clamp(pred, 1e-7, 1.0 - 1e-7);
  return -(w_pos * label * std::log(p) + (1.0 - label) * std::log1p(-p));
}

}  // namespace readmit
