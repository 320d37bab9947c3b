#pragma once

#include <optional>
#include <vector>

namespace binsight::dsp {

// Single-channel waveform. Samples are nominally in [-1, 1]; channel_id,
// when set, names the rig microphone (1..8) the channel came from.
struct Waveform {
  std::vector<double> samples;
  int sample_rate = 0;
  std::optional<int> channel_id;

  std::size_t size() const { return samples.size(); }
  double duration() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
};

// Throws InvalidInput unless sample_rate > 0, length > 0 and all samples
// are finite.
void validate(const Waveform& w, const char* what);

double rms(const Waveform& w);

// Scales w by target_rms / dataset_mean_rms. The dataset mean is a
// per-channel statistic computed over the whole corpus, not over w.
Waveform rms_normalize(const Waveform& w, double dataset_mean_rms,
                       double target_rms);

// Magnitude of the analytic signal (quadrature via a full-length DFT).
std::vector<double> envelope(const Waveform& w);

}  // namespace binsight::dsp
