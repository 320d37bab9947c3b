#include <doctest.h>

#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include "binsight/fft.hpp"

// Oracle: quadratic-time DFT straight from the definition.

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

std::vector<std::complex<double>> naive_dft(
    const std::vector<std::complex<double>>& x, bool inverse) {
  const std::size_t n = x.size();
  std::vector<std::complex<double>> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::complex<double> acc{0.0, 0.0};
    for (std::size_t j = 0; j < n; ++j) {
      const double ang = (inverse ? 2.0 : -2.0) * kPi * static_cast<double>(k) *
                         static_cast<double>(j) / static_cast<double>(n);
      acc += x[j] * std::complex<double>(std::cos(ang), std::sin(ang));
    }
    out[k] = inverse ? acc / static_cast<double>(n) : acc;
  }
  return out;
}

std::vector<std::complex<double>> random_signal(std::mt19937& rng,
                                                std::size_t n) {
  std::vector<std::complex<double>> x(n);
  for (auto& v : x) {
    const double re = static_cast<double>(rng()) / 4294967296.0 - 0.5;
    const double im = static_cast<double>(rng()) / 4294967296.0 - 0.5;
    v = {re, im};
  }
  return x;
}

}  // namespace

TEST_CASE("fft matches the naive DFT, power-of-two and Bluestein sizes") {
  std::mt19937 rng(3);
  for (std::size_t n : {1u, 2u, 8u, 64u, 512u, 3u, 12u, 97u, 160u, 250u}) {
    auto x = random_signal(rng, n);
    const auto want = naive_dft(x, false);
    auto got = x;
    binsight::dsp::fft(got, false);
    for (std::size_t k = 0; k < n; ++k) {
      CHECK(got[k].real() == doctest::Approx(want[k].real()).epsilon(1e-9));
      CHECK(got[k].imag() == doctest::Approx(want[k].imag()).epsilon(1e-9));
    }
    binsight::dsp::fft(got, true);
    for (std::size_t k = 0; k < n; ++k) {
      CHECK(got[k].real() == doctest::Approx(x[k].real()).epsilon(1e-9));
      CHECK(got[k].imag() == doctest::Approx(x[k].imag()).epsilon(1e-9));
    }
  }
}

TEST_CASE("rfft/irfft round trip and hermitian structure") {
  std::mt19937 rng(5);
  for (std::size_t n : {8u, 512u, 16000u}) {
    std::vector<double> x(n);
    for (auto& v : x) v = static_cast<double>(rng()) / 4294967296.0 - 0.5;
    const auto spec = binsight::dsp::rfft<double>(x);
    REQUIRE(spec.size() == n / 2 + 1);
    // DC and Nyquist bins of a real signal are real.
    CHECK(spec[0].imag() == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(spec[n / 2].imag() == doctest::Approx(0.0).epsilon(1e-9));
    const auto back = binsight::dsp::irfft<double>(spec, n);
    double err = 0.0, ref = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      err += (back[i] - x[i]) * (back[i] - x[i]);
      ref += x[i] * x[i];
    }
    CHECK(std::sqrt(err / ref) < 1e-10);
  }
}

TEST_CASE("fft of a pure tone concentrates in one bin") {
  const std::size_t n = 64;
  std::vector<std::complex<double>> x(n);
  for (std::size_t i = 0; i < n; ++i)
    x[i] = {std::cos(2.0 * kPi * 5.0 * i / n), 0.0};
  binsight::dsp::fft(x, false);
  CHECK(std::abs(x[5]) == doctest::Approx(n / 2.0).epsilon(1e-9));
  CHECK(std::abs(x[n - 5]) == doctest::Approx(n / 2.0).epsilon(1e-9));
  CHECK(std::abs(x[4]) == doctest::Approx(0.0).epsilon(1e-9));
}
