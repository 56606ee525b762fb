#pragma once

#include <functional>
#include <string>
#include <vector>

#include "readmit/tape.hpp"
#include "readmit/tensor.hpp"

namespace readmit {

// Named parameter pack for gradient checking and model storage.
struct NamedTensor {
  std::string name;
  Tensor value;
};

struct GradCheckEntry {
  std::string name;
  double max_rel_err = 0.0;
  int worst_index = -1;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> per_param;
  double max_rel_err = 0.0;
  std::string worst_param;
  bool finite = true;
  std::string failure;  // set when a non-finite value was hit

  bool ok(double tol) const { return finite && max_rel_err < tol; }
};

// Builds the scalar forward once per evaluation. `forward` receives a tape and
// one leaf Var per parameter (bound to the current parameter values, same
// order) and returns the scalar output. The forward must be deterministic.
//
// Gradients from the reverse pass are compared against central finite
// differences with perturbation eps; the reported relative error per entry is
// |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
GradCheckReport grad_check(
    std::vector<NamedTensor>& params,
    const std::function<ad::Var(ad::Tape&, const std::vector<ad::Var>&)>& forward,
    double eps = 1e-5);

}  // namespace readmit
