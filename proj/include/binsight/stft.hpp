#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include "binsight/wave.hpp"

namespace binsight::dsp {

enum class WindowKind { hann_periodic, rect };

struct StftParams {
  int window_size = 512;
  int hop_length = 160;
  WindowKind window = WindowKind::hann_periodic;
};

// Throws ConfigError unless 0 < hop <= window and window is even.
void validate(const StftParams& p);

std::vector<double> make_window(WindowKind kind, int size);

// Number of analysis frames for a signal of the given length:
// 1 + floor((len - window) / hop); requires len >= window.
std::size_t frame_count(std::size_t len, const StftParams& p);

// Dense complex time-frequency matrix, bins x frames, bin-major rows.
struct ComplexSpectrogram {
  std::size_t bins = 0;
  std::size_t frames = 0;
  std::vector<std::complex<double>> data;  // data[k * frames + t]
  StftParams params;
  int sample_rate = 0;

  std::complex<double>& at(std::size_t k, std::size_t t) {
    return data[k * frames + t];
  }
  const std::complex<double>& at(std::size_t k, std::size_t t) const {
    return data[k * frames + t];
  }
};

ComplexSpectrogram stft(const Waveform& w, const StftParams& p);

// Weighted overlap-add inverse; output length window + (frames-1)*hop.
// Throws ConfigError when the squared-window overlap sum has interior
// zeros (the frame grid then misses samples entirely).
Waveform istft(const ComplexSpectrogram& s);

// Elementwise log(|s| + floor_eps), bins x frames row-major.
std::vector<double> log_spectrogram(const ComplexSpectrogram& s,
                                    double floor_eps = 1e-7);

}  // namespace binsight::dsp
