#include "readmit/kernels.hpp"

#include <cstdlib>
#include <cstring>

namespace readmit::kernels {

namespace {

struct Table {
  double (*dot)(std::size_t, const double*, const double*);
  void (*axpy)(std::size_t, double, const double*, double*);
  void (*vadd)(std::size_t, const double*, const double*, double*);
  void (*vmul)(std::size_t, const double*, const double*, double*);
  void (*vfma)(std::size_t, const double*, const double*, double*);
  void (*gemv)(std::size_t, std::size_t, const double*, const double*, double*);
  void (*gemv_t)(std::size_t, std::size_t, const double*, const double*, double*);
  void (*ger)(std::size_t, std::size_t, double, const double*, const double*, double*);
};

constexpr Table kScalar = {
    scalar_impl::dot,  scalar_impl::axpy,   scalar_impl::vadd, scalar_impl::vmul,
    scalar_impl::vfma, scalar_impl::gemv,   scalar_impl::gemv_t, scalar_impl::ger,
};

#if defined(READMIT_HAVE_AVX2_TU)
constexpr Table kAvx2 = {
    avx2_impl::dot,  avx2_impl::axpy,   avx2_impl::vadd, avx2_impl::vmul,
    avx2_impl::vfma, avx2_impl::gemv,   avx2_impl::gemv_t, avx2_impl::ger,
};
#endif

Backend detect_backend() {
  if (const char* env = std::getenv("READMIT_KERNELS")) {
    if (std::strcmp(env, "scalar") == 0) return Backend::scalar;
    if (std::strcmp(env, "avx2") == 0 && avx2_supported()) return Backend::avx2;
    return Backend::scalar;
  }
  return avx2_supported() ? Backend::avx2 : Backend::scalar;
}

Backend g_backend = detect_backend();
const Table* g_table = nullptr;

const Table* table_for(Backend b) {
#if defined(READMIT_HAVE_AVX2_TU)
  if (b == Backend::avx2) return &kAvx2;
#endif
  (void)b;
  return &kScalar;
}

const Table& tab() {
  if (!g_table) g_table = table_for(g_backend);
  return *g_table;
}

}  // namespace

bool avx2_supported() {
#if defined(READMIT_HAVE_AVX2_TU) && defined(__GNUC__)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Backend active_backend() {
  tab();
  return g_backend;
}

void set_backend(Backend b) {
  if (b == Backend::avx2 && !avx2_supported()) b = Backend::scalar;
  g_backend = b;
  g_table = table_for(b);
}

const char* backend_name(Backend b) {
  return b == Backend::avx2 ? "avx2" : "scalar";
}

double dot(std::size_t n, const double* x, const double* y) { return tab().dot(n, x, y); }
void axpy(std::size_t n, double a, const double* x, double* y) { tab().axpy(n, a, x, y); }
void vadd(std::size_t n, const double* x, const double* y, double* out) { tab().vadd(n, x, y, out); }
void vmul(std::size_t n, const double* x, const double* y, double* out) { tab().vmul(n, x, y, out); }
void vfma(std::size_t n, const double* x, const double* y, double* out) { tab().vfma(n, x, y, out); }
void gemv(std::size_t m, std::size_t n, const double* a, const double* x, double* y) {
  tab().gemv(m, n, a, x, y);
}
void gemv_t(std::size_t m, std::size_t n, const double* a, const double* x, double* y) {
  tab().gemv_t(m, n, a, x, y);
}
void ger(std::size_t m, std::size_t n, double alpha, const double* x, const double* y, double* a) {
  tab().ger(m, n, alpha, x, y, a);
}

}  // namespace readmit::kernels
