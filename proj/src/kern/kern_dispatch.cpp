#include "binsight/kern.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>
#include <string>

#include "binsight/error.hpp"
#include "kern_impl.hpp"

namespace binsight::kern {
namespace {

bool cpu_has_avx2_fma() {
#if BINSIGHT_HAVE_X86_KERNELS && defined(__GNUC__)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Isa detect_isa() {
  if (const char* env = std::getenv("BINSIGHT_ISA")) {
    if (std::strcmp(env, "scalar") == 0) return Isa::scalar;
    if (std::strcmp(env, "avx2") == 0 && cpu_has_avx2_fma()) return Isa::avx2;
    // Unknown or unsupported request falls through to detection.
  }
  return cpu_has_avx2_fma() ? Isa::avx2 : Isa::scalar;
}

std::atomic<Isa>& isa_slot() {
  static std::atomic<Isa> isa{detect_isa()};
  return isa;
}

}  // namespace

const char* isa_name(Isa isa) {
  switch (isa) {
    case Isa::scalar: return "scalar";
    case Isa::avx2: return "avx2";
  }
  return "?";
}

bool isa_supported(Isa isa) {
  return isa == Isa::scalar || (isa == Isa::avx2 && cpu_has_avx2_fma());
}

Isa active_isa() { return isa_slot().load(std::memory_order_relaxed); }

void force_isa(Isa isa) {
  if (!isa_supported(isa)) {
    throw ConfigError(std::string("isa not supported on this cpu: ") +
                      isa_name(isa));
  }
  isa_slot().store(isa, std::memory_order_relaxed);
}

#if BINSIGHT_HAVE_X86_KERNELS
#define BINSIGHT_PICK(fn_scalar, fn_avx2, ...)            \
  do {                                                    \
    if (active_isa() == Isa::avx2) return fn_avx2(__VA_ARGS__); \
    return fn_scalar(__VA_ARGS__);                        \
  } while (0)
#else
#define BINSIGHT_PICK(fn_scalar, fn_avx2, ...) return fn_scalar(__VA_ARGS__)
#endif

void gemm(int m, int n, int k, const float* a, int lda, const float* b,
          int ldb, float* c, int ldc, bool accumulate) {
  BINSIGHT_PICK(scalar::gemm<float>, avx2::gemm_f32, m, n, k, a, lda, b, ldb,
                c, ldc, accumulate);
}

void gemm(int m, int n, int k, const double* a, int lda, const double* b,
          int ldb, double* c, int ldc, bool accumulate) {
  BINSIGHT_PICK(scalar::gemm<double>, avx2::gemm_f64, m, n, k, a, lda, b, ldb,
                c, ldc, accumulate);
}

float dot(const float* a, const float* b, std::size_t n) {
  BINSIGHT_PICK(scalar::dot<float>, avx2::dot_f32, a, b, n);
}

double dot(const double* a, const double* b, std::size_t n) {
  BINSIGHT_PICK(scalar::dot<double>, avx2::dot_f64, a, b, n);
}

void axpy(float alpha, const float* x, float* y, std::size_t n) {
  BINSIGHT_PICK(scalar::axpy<float>, avx2::axpy_f32, alpha, x, y, n);
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  BINSIGHT_PICK(scalar::axpy<double>, avx2::axpy_f64, alpha, x, y, n);
}

void add(const float* a, const float* b, float* out, std::size_t n) {
  BINSIGHT_PICK(scalar::add<float>, avx2::add_f32, a, b, out, n);
}

void add(const double* a, const double* b, double* out, std::size_t n) {
  scalar::add<double>(a, b, out, n);
}

void sub(const float* a, const float* b, float* out, std::size_t n) {
  BINSIGHT_PICK(scalar::sub<float>, avx2::sub_f32, a, b, out, n);
}

void sub(const double* a, const double* b, double* out, std::size_t n) {
  scalar::sub<double>(a, b, out, n);
}

void mul(const float* a, const float* b, float* out, std::size_t n) {
  BINSIGHT_PICK(scalar::mul<float>, avx2::mul_f32, a, b, out, n);
}

void mul(const double* a, const double* b, double* out, std::size_t n) {
  scalar::mul<double>(a, b, out, n);
}

void scale(float alpha, const float* x, float* out, std::size_t n) {
  BINSIGHT_PICK(scalar::scale<float>, avx2::scale_f32, alpha, x, out, n);
}

void scale(double alpha, const double* x, double* out, std::size_t n) {
  scalar::scale<double>(alpha, x, out, n);
}

float sum(const float* x, std::size_t n) {
  BINSIGHT_PICK(scalar::sum<float>, avx2::sum_f32, x, n);
}

double sum(const double* x, std::size_t n) { return scalar::sum<double>(x, n); }

float sumsq(const float* x, std::size_t n) {
  BINSIGHT_PICK(scalar::sumsq<float>, avx2::sumsq_f32, x, n);
}

double sumsq(const double* x, std::size_t n) {
  return scalar::sumsq<double>(x, n);
}

void relu(const float* x, float* out, std::size_t n) {
  BINSIGHT_PICK(scalar::relu<float>, avx2::relu_f32, x, out, n);
}

void relu(const double* x, double* out, std::size_t n) {
  scalar::relu<double>(x, out, n);
}

void relu_backward_accum(const float* x, const float* g, float* gin,
                         std::size_t n) {
  BINSIGHT_PICK(scalar::relu_backward_accum<float>,
                avx2::relu_backward_accum_f32, x, g, gin, n);
}

void relu_backward_accum(const double* x, const double* g, double* gin,
                         std::size_t n) {
  scalar::relu_backward_accum<double>(x, g, gin, n);
}

void cmul(const float* a, const float* b, float* out, std::size_t n) {
  BINSIGHT_PICK(scalar::cmul<float>, avx2::cmul_f32, a, b, out, n);
}

void cmul(const double* a, const double* b, double* out, std::size_t n) {
  scalar::cmul<double>(a, b, out, n);
}

#undef BINSIGHT_PICK

}  // namespace binsight::kern
