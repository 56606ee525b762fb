#pragma once

#include <cstddef>

// Double-precision inner loops shared by the autodiff tape and the layer
// implementations. A scalar reference version of every kernel always exists;
// on x86 an AVX2/FMA variant is selected at runtime when the CPU supports it.
// The environment variable READMIT_KERNELS=scalar|avx2 (or set_backend())
// overrides the automatic choice. Reductions in the AVX2 lane reassociate, so
// results may differ from the scalar lane in the last few ulps; within one
// process the selected lane is fixed, keeping runs reproducible.

namespace readmit::kernels {

enum class Backend { scalar, avx2 };

Backend active_backend();
void set_backend(Backend b);
bool avx2_supported();
const char* backend_name(Backend b);

// x·y
double dot(std::size_t n, const double* x, const double* y);
// y += a*x
void axpy(std::size_t n, double a, const double* x, double* y);
// out = x + y
void vadd(std::size_t n, const double* x, const double* y, double* out);
// out = x ⊙ y
void vmul(std::size_t n, const double* x, const double* y, double* out);
// out += x ⊙ y
void vfma(std::size_t n, const double* x, const double* y, double* out);
// y += A·x with A row-major m×n (y has m entries, x has n)
void gemv(std::size_t m, std::size_t n, const double* a, const double* x, double* y);
// y += Aᵀ·x with A row-major m×n (x has m entries, y has n)
void gemv_t(std::size_t m, std::size_t n, const double* a, const double* x, double* y);
// A += alpha · x·yᵀ with A row-major m×n
void ger(std::size_t m, std::size_t n, double alpha, const double* x, const double* y, double* a);

namespace scalar_impl {
double dot(std::size_t n, const double* x, const double* y);
void axpy(std::size_t n, double a, const double* x, double* y);
void vadd(std::size_t n, const double* x, const double* y, double* out);
void vmul(std::size_t n, const double* x, const double* y, double* out);
void vfma(std::size_t n, const double* x, const double* y, double* out);
void gemv(std::size_t m, std::size_t n, const double* a, const double* x, double* y);
void gemv_t(std::size_t m, std::size_t n, const double* a, const double* x, double* y);
void ger(std::size_t m, std::size_t n, double alpha, const double* x, const double* y, double* a);
}  // namespace scalar_impl

#if defined(READMIT_HAVE_AVX2_TU)
namespace avx2_impl {
double dot(std::size_t n, const double* x, const double* y);
void axpy(std::size_t n, double a, const double* x, double* y);
void vadd(std::size_t n, const double* x, const double* y, double* out);
void vmul(std::size_t n, const double* x, const double* y, double* out);
void vfma(std::size_t n, const double* x, const double* y, double* out);
void gemv(std::size_t m, std::size_t n, const double* a, const double* x, double* y);
void gemv_t(std::size_t m, std::size_t n, const double* a, const double* x, double* y);
void ger(std::size_t m, std::size_t n, double alpha, const double* x, const double* y, double* a);
}  // namespace avx2_impl
#endif

}  // namespace readmit::kernels
