#pragma once

#include <cstddef>

// Data-parallel inner loops used by the tensor engine and the DSP code.
// Every kernel has a scalar reference implementation and, on x86-64, an
// AVX2/FMA variant. The variant is picked once at startup from CPUID and
// can be overridden with force_isa() or the BINSIGHT_ISA environment
// variable ("scalar" or "avx2"). Scalar and SIMD paths are equivalence-
// tested against each other; they may differ by rounding only.

namespace binsight::kern {

enum class Isa { scalar, avx2 };

const char* isa_name(Isa isa);
bool isa_supported(Isa isa);
Isa active_isa();
// Throws ConfigError if the requested ISA is not supported on this CPU.
void force_isa(Isa isa);

// C (MxN) = A (MxK) * B (KxN), all row-major. accumulate=true adds into C.
void gemm(int m, int n, int k, const float* a, int lda, const float* b,
          int ldb, float* c, int ldc, bool accumulate);
void gemm(int m, int n, int k, const double* a, int lda, const double* b,
          int ldb, double* c, int ldc, bool accumulate);

float dot(const float* a, const float* b, std::size_t n);
double dot(const double* a, const double* b, std::size_t n);

// y += alpha * x
void axpy(float alpha, const float* x, float* y, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);

void add(const float* a, const float* b, float* out, std::size_t n);
void add(const double* a, const double* b, double* out, std::size_t n);
void sub(const float* a, const float* b, float* out, std::size_t n);
void sub(const double* a, const double* b, double* out, std::size_t n);
void mul(const float* a, const float* b, float* out, std::size_t n);
void mul(const double* a, const double* b, double* out, std::size_t n);

// out = alpha * x
void scale(float alpha, const float* x, float* out, std::size_t n);
void scale(double alpha, const double* x, double* out, std::size_t n);

float sum(const float* x, std::size_t n);
double sum(const double* x, std::size_t n);
float sumsq(const float* x, std::size_t n);
double sumsq(const double* x, std::size_t n);

void relu(const float* x, float* out, std::size_t n);
void relu(const double* x, double* out, std::size_t n);
// gin += g where x > 0
void relu_backward_accum(const float* x, const float* g, float* gin,
                         std::size_t n);
void relu_backward_accum(const double* x, const double* g, double* gin,
                         std::size_t n);

// Interleaved complex product, n (re,im) pairs: out = a * b.
void cmul(const float* a, const float* b, float* out, std::size_t n);
void cmul(const double* a, const double* b, double* out, std::size_t n);

}  // namespace binsight::kern
