#include <cstring>

#include "kern_impl.hpp"

// Reference kernels. Plain loops, no pragmas: these define the semantics
// the SIMD variants are tested against.

namespace binsight::kern::scalar {

template <typename T>
void gemm(int m, int n, int k, const T* a, int lda, const T* b, int ldb, T* c,
          int ldc, bool accumulate) {
  for (int i = 0; i < m; ++i) {
    T* crow = c + static_cast<std::size_t>(i) * ldc;
    if (!accumulate) {
      for (int j = 0; j < n; ++j) crow[j] = T(0);
    }
    const T* arow = a + static_cast<std::size_t>(i) * lda;
    for (int p = 0; p < k; ++p) {
      const T apk = arow[p];
      const T* brow = b + static_cast<std::size_t>(p) * ldb;
      for (int j = 0; j < n; ++j) crow[j] += apk * brow[j];
    }
  }
}

template <typename T>
T dot(const T* a, const T* b, std::size_t n) {
  T acc = T(0);
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

template <typename T>
void axpy(T alpha, const T* x, T* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <typename T>
void add(const T* a, const T* b, T* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

template <typename T>
void sub(const T* a, const T* b, T* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
}

template <typename T>
void mul(const T* a, const T* b, T* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

template <typename T>
void scale(T alpha, const T* x, T* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = alpha * x[i];
}

template <typename T>
T sum(const T* x, std::size_t n) {
  T acc = T(0);
  for (std::size_t i = 0; i < n; ++i) acc += x[i];
  return acc;
}

template <typename T>
T sumsq(const T* x, std::size_t n) {
  T acc = T(0);
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * x[i];
  return acc;
}

template <typename T>
void relu(const T* x, T* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] > T(0) ? x[i] : T(0);
}

template <typename T>
void relu_backward_accum(const T* x, const T* g, T* gin, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    if (x[i] > T(0)) gin[i] += g[i];
  }
}

template <typename T>
void cmul(const T* a, const T* b, T* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const T ar = a[2 * i], ai = a[2 * i + 1];
    const T br = b[2 * i], bi = b[2 * i + 1];
    out[2 * i] = ar * br - ai * bi;
    out[2 * i + 1] = ar * bi + ai * br;
  }
}

#define BINSIGHT_INSTANTIATE_SCALAR(T)                                        \
  template void gemm<T>(int, int, int, const T*, int, const T*, int, T*, int, \
                        bool);                                                \
  template T dot<T>(const T*, const T*, std::size_t);                         \
  template void axpy<T>(T, const T*, T*, std::size_t);                        \
  template void add<T>(const T*, const T*, T*, std::size_t);                  \
  template void sub<T>(const T*, const T*, T*, std::size_t);                  \
  template void mul<T>(const T*, const T*, T*, std::size_t);                  \
  template void scale<T>(T, const T*, T*, std::size_t);                       \
  template T sum<T>(const T*, std::size_t);                                   \
  template T sumsq<T>(const T*, std::size_t);                                 \
  template void relu<T>(const T*, T*, std::size_t);                           \
  template void relu_backward_accum<T>(const T*, const T*, T*, std::size_t);  \
  template void cmul<T>(const T*, const T*, T*, std::size_t);

BINSIGHT_INSTANTIATE_SCALAR(float)
BINSIGHT_INSTANTIATE_SCALAR(double)

#undef BINSIGHT_INSTANTIATE_SCALAR

}  // namespace binsight::kern::scalar
