#include "readmit/kernels.hpp"

#if defined(READMIT_HAVE_AVX2_TU)

#include <immintrin.h>

// AVX2/FMA lane, 4 doubles per vector. Tails fall back to scalar code.
// Reductions keep four independent accumulators, so the summation order
// differs from the reference lane (tolerance-tested, not bit-exact).

namespace readmit::kernels::avx2_impl {

namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d swap = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, swap));
}

}  // namespace

double dot(std::size_t n, const double* x, const double* y) {
  std::size_t i = 0;
  __m256d s0 = _mm256_setzero_pd();
  __m256d s1 = _mm256_setzero_pd();
  __m256d s2 = _mm256_setzero_pd();
  __m256d s3 = _mm256_setzero_pd();
  for (; i + 16 <= n; i += 16) {
    s0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), s0);
    s1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), s1);
    s2 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 8), _mm256_loadu_pd(y + i + 8), s2);
    s3 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 12), _mm256_loadu_pd(y + i + 12), s3);
  }
  for (; i + 4 <= n; i += 4)
    s0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), s0);
  double s = hsum(_mm256_add_pd(_mm256_add_pd(s0, s1), _mm256_add_pd(s2, s3)));
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

void axpy(std::size_t n, double a, const double* x, double* y) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d vy = _mm256_loadu_pd(y + i);
    vy = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), vy);
    _mm256_storeu_pd(y + i, vy);
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

void vadd(std::size_t n, const double* x, const double* y, double* out) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  for (; i < n; ++i) out[i] = x[i] + y[i];
}

void vmul(std::size_t n, const double* x, const double* y, double* out) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  for (; i < n; ++i) out[i] = x[i] * y[i];
}

void vfma(std::size_t n, const double* x, const double* y, double* out) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d vo = _mm256_loadu_pd(out + i);
    vo = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), vo);
    _mm256_storeu_pd(out + i, vo);
  }
  for (; i < n; ++i) out[i] += x[i] * y[i];
}

void gemv(std::size_t m, std::size_t n, const double* a, const double* x, double* y) {
  for (std::size_t r = 0; r < m; ++r) {
    y[r] += dot(n, a + r * n, x);
  }
}

void gemv_t(std::size_t m, std::size_t n, const double* a, const double* x, double* y) {
  for (std::size_t r = 0; r < m; ++r) {
    axpy(n, x[r], a + r * n, y);
  }
}

void ger(std::size_t m, std::size_t n, double alpha, const double* x, const double* y, double* a) {
  for (std::size_t r = 0; r < m; ++r) {
    axpy(n, alpha * x[r], y, a + r * n);
  }
}

}  // namespace readmit::kernels::avx2_impl

#endif  // READMIT_HAVE_AVX2_TU
