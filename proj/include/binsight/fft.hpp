#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace binsight::dsp {

// Unnormalized forward DFT  X[k] = sum_n x[n] exp(-2*pi*i*k*n/N); the
// inverse applies the conjugate transform and divides by N. Power-of-two
// sizes run radix-2 Cooley-Tukey, everything else goes through Bluestein's
// chirp-z reduction, so any length is accepted.
template <typename T>
void fft(std::vector<std::complex<T>>& data, bool inverse);

// Real-input DFT, length n (even) -> n/2+1 bins.
template <typename T>
std::vector<std::complex<T>> rfft(std::span<const T> x);

// Inverse of rfft back to n real samples (n even, bins = n/2+1).
template <typename T>
std::vector<T> irfft(std::span<const std::complex<T>> spec, std::size_t n);

inline bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

}  // namespace binsight::dsp
