#include "readmit/kernels.hpp"

// Reference kernels. Plain loops, no manual unrolling: these define the
// semantics the SIMD lane is tested against.

namespace readmit::kernels::scalar_impl {

double dot(std::size_t n, const double* x, const double* y) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
  return s;
}

void axpy(std::size_t n, double a, const double* x, double* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void vadd(std::size_t n, const double* x, const double* y, double* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] + y[i];
}

void vmul(std::size_t n, const double* x, const double* y, double* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] * y[i];
}

void vfma(std::size_t n, const double* x, const double* y, double* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] += x[i] * y[i];
}

void gemv(std::size_t m, std::size_t n, const double* a, const double* x, double* y) {
  for (std::size_t r = 0; r < m; ++r) {
    const double* row = a + r * n;
    double s = 0.0;
    for (std::size_t c = 0; c < n; ++c) s += row[c] * x[c];
    y[r] += s;
  }
}

void gemv_t(std::size_t m, std::size_t n, const double* a, const double* x, double* y) {
  for (std::size_t r = 0; r < m; ++r) {
    const double* row = a + r * n;
    const double xr = x[r];
    for (std::size_t c = 0; c < n; ++c) y[c] += xr * row[c];
  }
}

void ger(std::size_t m, std::size_t n, double alpha, const double* x, const double* y, double* a) {
  for (std::size_t r = 0; r < m; ++r) {
    double* row = a + r * n;
    const double ax = alpha * x[r];
    for (std::size_t c = 0; c < n; ++c) row[c] += ax * y[c];
  }
}

}  // namespace readmit::kernels::scalar_impl
