#include "kern_impl.hpp"

#if BINSIGHT_HAVE_X86_KERNELS

#include <immintrin.h>

#include <cstddef>

// AVX2 + FMA variants. This translation unit is compiled with
// -mavx2 -mfma; nothing here may run unless CPUID reports both.

namespace binsight::kern::avx2 {
namespace {

inline float hsum256(__m256 v) {
  __m128 lo = _mm256_castps256_ps128(v);
  __m128 hi = _mm256_extractf128_ps(v, 1);
  lo = _mm_add_ps(lo, hi);
  lo = _mm_add_ps(lo, _mm_movehl_ps(lo, lo));
  lo = _mm_add_ss(lo, _mm_shuffle_ps(lo, lo, 1));
  return _mm_cvtss_f32(lo);
}

inline double hsum256d(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(lo) + _mm_cvtsd_f64(_mm_unpackhi_pd(lo, lo));
}

}  // namespace

void gemm_f32(int m, int n, int k, const float* a, int lda, const float* b,
              int ldb, float* c, int ldc, bool accumulate) {
  // Row-outer-product order: for each (i,p) broadcast A(i,p) and FMA along
  // the contiguous rows of B and C. Unrolled two deep in p to cut the
  // C-row traffic.
  for (int i = 0; i < m; ++i) {
    float* crow = c + static_cast<std::size_t>(i) * ldc;
    if (!accumulate) {
      int j = 0;
      const __m256 z = _mm256_setzero_ps();
      for (; j + 8 <= n; j += 8) _mm256_storeu_ps(crow + j, z);
      for (; j < n; ++j) crow[j] = 0.0f;
    }
    const float* arow = a + static_cast<std::size_t>(i) * lda;
    int p = 0;
    for (; p + 2 <= k; p += 2) {
      const __m256 a0 = _mm256_set1_ps(arow[p]);
      const __m256 a1 = _mm256_set1_ps(arow[p + 1]);
      const float* b0 = b + static_cast<std::size_t>(p) * ldb;
      const float* b1 = b0 + ldb;
      int j = 0;
      for (; j + 8 <= n; j += 8) {
        __m256 acc = _mm256_loadu_ps(crow + j);
        acc = _mm256_fmadd_ps(a0, _mm256_loadu_ps(b0 + j), acc);
        acc = _mm256_fmadd_ps(a1, _mm256_loadu_ps(b1 + j), acc);
        _mm256_storeu_ps(crow + j, acc);
      }
      for (; j < n; ++j) crow[j] += arow[p] * b0[j] + arow[p + 1] * b1[j];
    }
    for (; p < k; ++p) {
      const __m256 a0 = _mm256_set1_ps(arow[p]);
      const float* b0 = b + static_cast<std::size_t>(p) * ldb;
      int j = 0;
      for (; j + 8 <= n; j += 8) {
        __m256 acc = _mm256_loadu_ps(crow + j);
        acc = _mm256_fmadd_ps(a0, _mm256_loadu_ps(b0 + j), acc);
        _mm256_storeu_ps(crow + j, acc);
      }
      for (; j < n; ++j) crow[j] += arow[p] * b0[j];
    }
  }
}

void gemm_f64(int m, int n, int k, const double* a, int lda, const double* b,
              int ldb, double* c, int ldc, bool accumulate) {
  for (int i = 0; i < m; ++i) {
    double* crow = c + static_cast<std::size_t>(i) * ldc;
    if (!accumulate) {
      for (int j = 0; j < n; ++j) crow[j] = 0.0;
    }
    const double* arow = a + static_cast<std::size_t>(i) * lda;
    for (int p = 0; p < k; ++p) {
      const __m256d a0 = _mm256_set1_pd(arow[p]);
      const double* b0 = b + static_cast<std::size_t>(p) * ldb;
      int j = 0;
      for (; j + 4 <= n; j += 4) {
        __m256d acc = _mm256_loadu_pd(crow + j);
        acc = _mm256_fmadd_pd(a0, _mm256_loadu_pd(b0 + j), acc);
        _mm256_storeu_pd(crow + j, acc);
      }
      for (; j < n; ++j) crow[j] += arow[p] * b0[j];
    }
  }
}

float dot_f32(const float* a, const float* b, std::size_t n) {
  __m256 acc0 = _mm256_setzero_ps();
  __m256 acc1 = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i),
                           acc0);
    acc1 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i + 8),
                           _mm256_loadu_ps(b + i + 8), acc1);
  }
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i),
                           acc0);
  }
  float tail = 0.0f;
  for (; i < n; ++i) tail += a[i] * b[i];
  return hsum256(_mm256_add_ps(acc0, acc1)) + tail;
}

double dot_f64(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc);
  }
  double tail = 0.0;
  for (; i < n; ++i) tail += a[i] * b[i];
  return hsum256d(acc) + tail;
}

void axpy_f32(float alpha, const float* x, float* y, std::size_t n) {
  const __m256 va = _mm256_set1_ps(alpha);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256 vy = _mm256_loadu_ps(y + i);
    vy = _mm256_fmadd_ps(va, _mm256_loadu_ps(x + i), vy);
    _mm256_storeu_ps(y + i, vy);
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void axpy_f64(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d vy = _mm256_loadu_pd(y + i);
    vy = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), vy);
    _mm256_storeu_pd(y + i, vy);
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void add_f32(const float* a, const float* b, float* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_ps(out + i, _mm256_add_ps(_mm256_loadu_ps(a + i),
                                            _mm256_loadu_ps(b + i)));
  }
  for (; i < n; ++i) out[i] = a[i] + b[i];
}

void sub_f32(const float* a, const float* b, float* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_ps(out + i, _mm256_sub_ps(_mm256_loadu_ps(a + i),
                                            _mm256_loadu_ps(b + i)));
  }
  for (; i < n; ++i) out[i] = a[i] - b[i];
}

void mul_f32(const float* a, const float* b, float* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_ps(out + i, _mm256_mul_ps(_mm256_loadu_ps(a + i),
                                            _mm256_loadu_ps(b + i)));
  }
  for (; i < n; ++i) out[i] = a[i] * b[i];
}

void scale_f32(float alpha, const float* x, float* out, std::size_t n) {
  const __m256 va = _mm256_set1_ps(alpha);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_ps(out + i, _mm256_mul_ps(va, _mm256_loadu_ps(x + i)));
  }
  for (; i < n; ++i) out[i] = alpha * x[i];
}

float sum_f32(const float* x, std::size_t n) {
  __m256 acc = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) acc = _mm256_add_ps(acc, _mm256_loadu_ps(x + i));
  float tail = 0.0f;
  for (; i < n; ++i) tail += x[i];
  return hsum256(acc) + tail;
}

float sumsq_f32(const float* x, std::size_t n) {
  __m256 acc = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 v = _mm256_loadu_ps(x + i);
    acc = _mm256_fmadd_ps(v, v, acc);
  }
  float tail = 0.0f;
  for (; i < n; ++i) tail += x[i] * x[i];
  return hsum256(acc) + tail;
}

void relu_f32(const float* x, float* out, std::size_t n) {
  const __m256 z = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_ps(out + i, _mm256_max_ps(z, _mm256_loadu_ps(x + i)));
  }
  for (; i < n; ++i) out[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

void relu_backward_accum_f32(const float* x, const float* g, float* gin,
                             std::size_t n) {
  const __m256 z = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 mask = _mm256_cmp_ps(_mm256_loadu_ps(x + i), z, _CMP_GT_OQ);
    const __m256 gated = _mm256_and_ps(mask, _mm256_loadu_ps(g + i));
    _mm256_storeu_ps(gin + i, _mm256_add_ps(_mm256_loadu_ps(gin + i), gated));
  }
  for (; i < n; ++i) {
    if (x[i] > 0.0f) gin[i] += g[i];
  }
}

void cmul_f32(const float* a, const float* b, float* out, std::size_t n) {
  // (ar + i*ai)(br + i*bi); lanes hold interleaved re,im pairs.
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256 va = _mm256_loadu_ps(a + 2 * i);
    const __m256 vb = _mm256_loadu_ps(b + 2 * i);
    const __m256 b_re = _mm256_moveldup_ps(vb);   // br br ...
    const __m256 b_im = _mm256_movehdup_ps(vb);   // bi bi ...
    const __m256 a_sw = _mm256_permute_ps(va, 0xB1);  // ai ar ...
    // re: ar*br - ai*bi ; im: ar*bi + ai*br  via addsub
    const __m256 prod = _mm256_mul_ps(a_sw, b_im);
    _mm256_storeu_ps(out + 2 * i,
                     _mm256_fmaddsub_ps(va, b_re, prod));
  }
  for (; i < n; ++i) {
    const float ar = a[2 * i], ai = a[2 * i + 1];
    const float br = b[2 * i], bi = b[2 * i + 1];
    out[2 * i] = ar * br - ai * bi;
    out[2 * i + 1] = ar * bi + ai * br;
  }
}

}  // namespace binsight::kern::avx2

#endif  // BINSIGHT_HAVE_X86_KERNELS
