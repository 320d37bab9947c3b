#include "binsight/stft.hpp"

#include <cmath>

#include "binsight/error.hpp"
#include "binsight/fft.hpp"

namespace binsight::dsp {

namespace {
constexpr double kPi = 3.141592653589793238462643383279502884;
}

void validate(const StftParams& p) {
  if (p.window_size <= 0 || p.window_size % 2 != 0)
    throw ConfigError("stft: window_size must be positive and even");
  if (p.hop_length <= 0 || p.hop_length > p.window_size)
    throw ConfigError("stft: need 0 < hop_length <= window_size");
}

std::vector<double> make_window(WindowKind kind, int size) {
  std::vector<double> w(size, 1.0);
  if (kind == WindowKind::hann_periodic) {
    for (int i = 0; i < size; ++i)
      w[i] = 0.5 - 0.5 * std::cos(2.0 * kPi * i / size);
  }
  return w;
}

std::size_t frame_count(std::size_t len, const StftParams& p) {
  validate(p);
  if (len < static_cast<std::size_t>(p.window_size))
    throw InvalidInput("stft: waveform shorter than one window");
  return 1 + (len - p.window_size) / p.hop_length;
}

ComplexSpectrogram stft(const Waveform& w, const StftParams& p) {
  validate(w, "stft");
  const std::size_t frames = frame_count(w.samples.size(), p);
  const std::size_t n = p.window_size;
  const std::size_t bins = n / 2 + 1;
  const std::vector<double> win = make_window(p.window, p.window_size);

  ComplexSpectrogram out;
  out.bins = bins;
  out.frames = frames;
  out.params = p;
  out.sample_rate = w.sample_rate;
  out.data.resize(bins * frames);

  std::vector<double> frame(n);
  for (std::size_t t = 0; t < frames; ++t) {
    const std::size_t off = t * p.hop_length;
    for (std::size_t i = 0; i < n; ++i) frame[i] = win[i] * w.samples[off + i];
    const auto spec = rfft<double>(frame);
    for (std::size_t k = 0; k < bins; ++k) out.data[k * frames + t] = spec[k];
  }
  return out;
}

Waveform istft(const ComplexSpectrogram& s) {
  validate(s.params);
  if (s.frames == 0 || s.bins == 0) throw InvalidInput("istft: empty spectrogram");
  const std::size_t n = s.params.window_size;
  if (s.bins != n / 2 + 1) throw ConfigError("istft: bin count does not match window");
  const std::size_t hop = s.params.hop_length;
  const std::size_t len = n + (s.frames - 1) * hop;
  const std::vector<double> win = make_window(s.params.window, s.params.window_size);

  std::vector<double> acc(len, 0.0);
  std::vector<double> wsum(len, 0.0);
  std::vector<std::complex<double>> col(s.bins);
  for (std::size_t t = 0; t < s.frames; ++t) {
    for (std::size_t k = 0; k < s.bins; ++k) col[k] = s.data[k * s.frames + t];
    const auto frame = irfft<double>(col, n);
    const std::size_t off = t * hop;
    for (std::size_t i = 0; i < n; ++i) {
      acc[off + i] += win[i] * frame[i];
      wsum[off + i] += win[i] * win[i];
    }
  }
  // The squared-window sum must be positive except at the very edges
  // (periodic Hann is zero at sample 0). Interior zeros mean the hop
  // skips samples and the transform cannot be inverted.
  const double tiny = 1e-12;
  for (std::size_t i = 1; i + 1 < len; ++i) {
    if (wsum[i] <= tiny)
      throw ConfigError("istft: window/hop overlap-add sum has zeros");
  }
  Waveform out;
  out.sample_rate = s.sample_rate;
  out.samples.resize(len);
  for (std::size_t i = 0; i < len; ++i)
    out.samples[i] = wsum[i] > tiny ? acc[i] / wsum[i] : 0.0;
  return out;
}

std::vector<double> log_spectrogram(const ComplexSpectrogram& s,
                                    double floor_eps) {
  if (!(floor_eps > 0.0)) throw ConfigError("log_spectrogram: floor_eps must be positive");
  std::vector<double> out(s.data.size());
  for (std::size_t i = 0; i < s.data.size(); ++i)
    out[i] = std::log(std::abs(s.data[i]) + floor_eps);
  return out;
}

}  // namespace binsight::dsp
