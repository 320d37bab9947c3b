#pragma once

#include <cstddef>

// Internal: per-ISA kernel entry points. The public dispatch layer in
// kern_dispatch.cpp selects one namespace per call site.

#if defined(__x86_64__) || defined(_M_X64)
#define BINSIGHT_HAVE_X86_KERNELS 1
#else
#define BINSIGHT_HAVE_X86_KERNELS 0
#endif

namespace binsight::kern::scalar {

template <typename T>
void gemm(int m, int n, int k, const T* a, int lda, const T* b, int ldb, T* c,
          int ldc, bool accumulate);
template <typename T>
T dot(const T* a, const T* b, std::size_t n);
template <typename T>
void axpy(T alpha, const T* x, T* y, std::size_t n);
template <typename T>
void add(const T* a, const T* b, T* out, std::size_t n);
template <typename T>
void sub(const T* a, const T* b, T* out, std::size_t n);
template <typename T>
void mul(const T* a, const T* b, T* out, std::size_t n);
template <typename T>
void scale(T alpha, const T* x, T* out, std::size_t n);
template <typename T>
T sum(const T* x, std::size_t n);
template <typename T>
T sumsq(const T* x, std::size_t n);
template <typename T>
void relu(const T* x, T* out, std::size_t n);
template <typename T>
void relu_backward_accum(const T* x, const T* g, T* gin, std::size_t n);
template <typename T>
void cmul(const T* a, const T* b, T* out, std::size_t n);

}  // namespace binsight::kern::scalar

#if BINSIGHT_HAVE_X86_KERNELS
namespace binsight::kern::avx2 {

void gemm_f32(int m, int n, int k, const float* a, int lda, const float* b,
              int ldb, float* c, int ldc, bool accumulate);
void gemm_f64(int m, int n, int k, const double* a, int lda, const double* b,
              int ldb, double* c, int ldc, bool accumulate);
float dot_f32(const float* a, const float* b, std::size_t n);
double dot_f64(const double* a, const double* b, std::size_t n);
void axpy_f32(float alpha, const float* x, float* y, std::size_t n);
void axpy_f64(double alpha, const double* x, double* y, std::size_t n);
void add_f32(const float* a, const float* b, float* out, std::size_t n);
void sub_f32(const float* a, const float* b, float* out, std::size_t n);
void mul_f32(const float* a, const float* b, float* out, std::size_t n);
void scale_f32(float alpha, const float* x, float* out, std::size_t n);
float sum_f32(const float* x, std::size_t n);
float sumsq_f32(const float* x, std::size_t n);
void relu_f32(const float* x, float* out, std::size_t n);
void relu_backward_accum_f32(const float* x, const float* g, float* gin,
                             std::size_t n);
void cmul_f32(const float* a, const float* b, float* out, std::size_t n);

}  // namespace binsight::kern::avx2
#endif
