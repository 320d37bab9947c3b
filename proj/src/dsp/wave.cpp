#include "binsight/wave.hpp"

#include <cmath>
#include <complex>
#include <string>

#include "binsight/error.hpp"
#include "binsight/fft.hpp"

namespace binsight::dsp {

void validate(const Waveform& w, const char* what) {
  if (w.sample_rate <= 0)
    throw InvalidInput(std::string(what) + ": sample_rate must be positive");
  if (w.samples.empty())
    throw InvalidInput(std::string(what) + ": empty waveform");
  for (double v : w.samples) {
    if (!std::isfinite(v))
      throw InvalidInput(std::string(what) + ": non-finite sample");
  }
}

double rms(const Waveform& w) {
  double acc = 0.0;
  for (double v : w.samples) acc += v * v;
  return std::sqrt(acc / static_cast<double>(w.samples.size()));
}

Waveform rms_normalize(const Waveform& w, double dataset_mean_rms,
                       double target_rms) {
  validate(w, "rms_normalize");
  if (!(dataset_mean_rms > 0.0))
    throw NumericError("rms_normalize: dataset mean RMS is degenerate");
  Waveform out = w;
  const double g = target_rms / dataset_mean_rms;
  for (double& v : out.samples) v *= g;
  return out;
}

std::vector<double> envelope(const Waveform& w) {
  validate(w, "envelope");
  const std::size_t n = w.samples.size();
  std::vector<std::complex<double>> spec(n);
  for (std::size_t i = 0; i < n; ++i) spec[i] = {w.samples[i], 0.0};
  fft(spec, false);
  // Analytic signal: keep DC and Nyquist, double the positive bins, zero
  // the negative ones.
  for (std::size_t k = 1; k < (n + 1) / 2; ++k) spec[k] *= 2.0;
  for (std::size_t k = n / 2 + 1; k < n; ++k) spec[k] = 0.0;
  fft(spec, true);
  std::vector<double> env(n);
  for (std::size_t i = 0; i < n; ++i) env[i] = std::abs(spec[i]);
  return env;
}

}  // namespace binsight::dsp
