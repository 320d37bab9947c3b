#include "binsight/fft.hpp"

#include <cmath>
#include <map>
#include <memory>
#include <mutex>

#include "binsight/error.hpp"

namespace binsight::dsp {
namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

// Twiddle tables are shared across calls; the mutex only matters on the
// first call for a given size.
struct TwiddleTable {
  std::vector<std::complex<double>> w;  // exp(-2*pi*i*j/n), j < n/2
};

const TwiddleTable& twiddles(std::size_t n) {
  static std::mutex mu;
  static std::map<std::size_t, std::unique_ptr<TwiddleTable>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto& slot = cache[n];
  if (!slot) {
    slot = std::make_unique<TwiddleTable>();
    slot->w.resize(n / 2);
    for (std::size_t j = 0; j < n / 2; ++j) {
      const double ang = -2.0 * kPi * static_cast<double>(j) / static_cast<double>(n);
      slot->w[j] = {std::cos(ang), std::sin(ang)};
    }
  }
  return *slot;
}

template <typename T>
void fft_pow2(std::complex<T>* a, std::size_t n, bool inverse) {
  if (n <= 1) return;
  // bit reversal
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  const TwiddleTable& tw = twiddles(n);
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t step = n / len;
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t j = 0; j < len / 2; ++j) {
        const std::complex<double>& wd = tw.w[j * step];
        const std::complex<T> w(static_cast<T>(wd.real()),
                                static_cast<T>(inverse ? -wd.imag() : wd.imag()));
        const std::complex<T> u = a[i + j];
        const std::complex<T> v = a[i + j + len / 2] * w;
        a[i + j] = u + v;
        a[i + j + len / 2] = u - v;
      }
    }
  }
  if (inverse) {
    const T inv = T(1) / static_cast<T>(n);
    for (std::size_t i = 0; i < n; ++i) a[i] *= inv;
  }
}

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

// Bluestein: length-n DFT as a circular convolution of size m = 2^k >= 2n-1.
template <typename T>
void fft_bluestein(std::vector<std::complex<T>>& data, bool inverse) {
  const std::size_t n = data.size();
  const std::size_t m = next_pow2(2 * n - 1);
  std::vector<std::complex<T>> chirp(n);
  for (std::size_t k = 0; k < n; ++k) {
    // k^2 mod 2n keeps the angle argument small.
    const std::size_t k2 = static_cast<std::size_t>(
        (static_cast<unsigned long long>(k) * k) % (2 * n));
    const double ang = (inverse ? 1.0 : -1.0) * kPi * static_cast<double>(k2) /
                       static_cast<double>(n);
    chirp[k] = {static_cast<T>(std::cos(ang)), static_cast<T>(std::sin(ang))};
  }
  std::vector<std::complex<T>> a(m), b(m);
  for (std::size_t k = 0; k < n; ++k) a[k] = data[k] * chirp[k];
  b[0] = std::conj(chirp[0]);
  for (std::size_t k = 1; k < n; ++k) {
    b[k] = std::conj(chirp[k]);
    b[m - k] = b[k];
  }
  fft_pow2(a.data(), m, false);
  fft_pow2(b.data(), m, false);
  for (std::size_t k = 0; k < m; ++k) a[k] *= b[k];
  fft_pow2(a.data(), m, true);
  for (std::size_t k = 0; k < n; ++k) data[k] = a[k] * chirp[k];
  if (inverse) {
    const T invn = T(1) / static_cast<T>(n);
    for (auto& v : data) v *= invn;
  }
}

}  // namespace

template <typename T>
void fft(std::vector<std::complex<T>>& data, bool inverse) {
  if (data.empty()) throw InvalidInput("fft: empty input");
  if (is_pow2(data.size())) {
    fft_pow2(data.data(), data.size(), inverse);
  } else {
    fft_bluestein(data, inverse);
  }
}

template <typename T>
std::vector<std::complex<T>> rfft(std::span<const T> x) {
  const std::size_t n = x.size();
  if (n == 0 || n % 2 != 0) throw InvalidInput("rfft: length must be even and > 0");
  std::vector<std::complex<T>> buf(n);
  for (std::size_t i = 0; i < n; ++i) buf[i] = {x[i], T(0)};
  fft(buf, false);
  buf.resize(n / 2 + 1);
  return buf;
}

template <typename T>
std::vector<T> irfft(std::span<const std::complex<T>> spec, std::size_t n) {
  if (n == 0 || n % 2 != 0) throw InvalidInput("irfft: length must be even and > 0");
  if (spec.size() != n / 2 + 1) throw InvalidInput("irfft: bin count mismatch");
  std::vector<std::complex<T>> buf(n);
  for (std::size_t k = 0; k <= n / 2; ++k) buf[k] = spec[k];
  for (std::size_t k = 1; k < n / 2; ++k) buf[n - k] = std::conj(spec[k]);
  fft(buf, true);
  std::vector<T> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = buf[i].real();
  return out;
}

template void fft<float>(std::vector<std::complex<float>>&, bool);
template void fft<double>(std::vector<std::complex<double>>&, bool);
template std::vector<std::complex<float>> rfft<float>(std::span<const float>);
template std::vector<std::complex<double>> rfft<double>(std::span<const double>);
template std::vector<float> irfft<float>(std::span<const std::complex<float>>, std::size_t);
template std::vector<double> irfft<double>(std::span<const std::complex<double>>, std::size_t);

}  // namespace binsight::dsp
