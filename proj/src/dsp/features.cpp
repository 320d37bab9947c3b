#include "binsight/features.hpp"

#include <algorithm>
#include <cmath>

#include "binsight/error.hpp"
#include "binsight/fft.hpp"

namespace binsight::dsp {
namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;
constexpr double kPowerFloor = 1e-7;

double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

}  // namespace

double a_weighting_db(double f) {
  const double f2 = f * f;
  const double c1 = 20.6 * 20.6;
  const double c2 = 107.7 * 107.7;
  const double c3 = 737.9 * 737.9;
  const double c4 = 12194.0 * 12194.0;
  const double num = c4 * f2 * f2;
  const double den =
      (f2 + c1) * std::sqrt((f2 + c2) * (f2 + c3)) * (f2 + c4);
  if (den == 0.0) return -200.0;  // f == 0
  const double ra = num / den;
  if (ra <= 0.0) return -200.0;
  return 20.0 * std::log10(ra) + 2.0;
}

std::vector<double> a_weighted_loudness_db(const Waveform& w,
                                           const StftParams& p) {
  const ComplexSpectrogram s = stft(w, p);
  const std::size_t bins = s.bins;
  std::vector<double> gain(bins);  // linear power gain per bin
  for (std::size_t k = 0; k < bins; ++k) {
    const double f = static_cast<double>(k) * w.sample_rate / p.window_size;
    gain[k] = std::pow(10.0, a_weighting_db(f) / 10.0);
  }
  std::vector<double> out(s.frames);
  for (std::size_t t = 0; t < s.frames; ++t) {
    double acc = 0.0;
    for (std::size_t k = 0; k < bins; ++k) {
      acc += gain[k] * std::norm(s.at(k, t));
    }
    out[t] = 10.0 * std::log10(acc + kPowerFloor);
  }
  return out;
}

std::vector<double> normalize_loudness(const std::vector<double>& db,
                                       double corpus_mean, double corpus_std) {
  if (!(corpus_std > 0.0))
    throw NumericError("normalize_loudness: degenerate corpus std");
  std::vector<double> out(db.size());
  for (std::size_t i = 0; i < db.size(); ++i)
    out[i] = (db[i] - corpus_mean) / corpus_std;
  return out;
}

std::vector<std::vector<double>> mfcc(const Waveform& w, const StftParams& p,
                                      int n_mels, int n_coeffs) {
  if (n_mels <= 0 || n_coeffs <= 0 || n_coeffs > n_mels)
    throw ConfigError("mfcc: need 0 < n_coeffs <= n_mels");
  const ComplexSpectrogram s = stft(w, p);
  const int bins = static_cast<int>(s.bins);
  if (n_mels > bins) throw ConfigError("mfcc: more mel bands than FFT bins");

  // Triangular mel filterbank between 0 and Nyquist.
  const double mel_lo = hz_to_mel(0.0);
  const double mel_hi = hz_to_mel(w.sample_rate / 2.0);
  std::vector<double> centers(n_mels + 2);
  for (int i = 0; i < n_mels + 2; ++i) {
    const double mel = mel_lo + (mel_hi - mel_lo) * i / (n_mels + 1);
    centers[i] = mel_to_hz(mel) * p.window_size / w.sample_rate;  // in bins
  }
  std::vector<std::vector<double>> fb(n_mels, std::vector<double>(bins, 0.0));
  for (int m = 0; m < n_mels; ++m) {
    const double lo = centers[m], mid = centers[m + 1], hi = centers[m + 2];
    for (int k = 0; k < bins; ++k) {
      double v = 0.0;
      if (k > lo && k < hi) {
        v = k <= mid ? (k - lo) / std::max(mid - lo, 1e-9)
                     : (hi - k) / std::max(hi - mid, 1e-9);
      }
      fb[m][k] = v;
    }
  }

  // Orthonormal DCT-II over the log mel energies.
  std::vector<std::vector<double>> out(s.frames,
                                       std::vector<double>(n_coeffs, 0.0));
  std::vector<double> logmel(n_mels);
  for (std::size_t t = 0; t < s.frames; ++t) {
    for (int m = 0; m < n_mels; ++m) {
      double acc = 0.0;
      for (int k = 0; k < bins; ++k) acc += fb[m][k] * std::norm(s.at(k, t));
      logmel[m] = std::log(acc + kPowerFloor);
    }
    for (int c = 0; c < n_coeffs; ++c) {
      double acc = 0.0;
      for (int m = 0; m < n_mels; ++m)
        acc += logmel[m] * std::cos(kPi * c * (2 * m + 1) / (2.0 * n_mels));
      const double scale = c == 0 ? std::sqrt(1.0 / n_mels)
                                  : std::sqrt(2.0 / n_mels);
      out[t][c] = scale * acc;
    }
  }
  return out;
}

std::vector<double> estimate_f0(const Waveform& w, const StftParams& p,
                                double fmin, double fmax) {
  validate(w, "estimate_f0");
  if (!(fmin > 0.0 && fmin < fmax && fmax < w.sample_rate / 2.0))
    throw ConfigError("estimate_f0: need 0 < fmin < fmax < nyquist");
  const std::size_t frames = frame_count(w.samples.size(), p);
  const int n = p.window_size;
  const int lag_min = std::max(1, static_cast<int>(w.sample_rate / fmax));
  const int lag_max =
      std::min(n - 2, static_cast<int>(std::ceil(w.sample_rate / fmin)));
  if (lag_max <= lag_min)
    throw ConfigError("estimate_f0: window too short for fmin");

  constexpr double kVoicingThreshold = 0.5;
  constexpr double kSilenceRms = 1e-5;
  constexpr double kPeakSlack = 0.97;  // prefer the shortest near-best lag

  std::vector<double> out(frames, 0.0);
  std::vector<double> r(lag_max + 2, 0.0);
  for (std::size_t t = 0; t < frames; ++t) {
    const double* x = w.samples.data() + t * p.hop_length;
    double energy = 0.0;
    for (int i = 0; i < n; ++i) energy += x[i] * x[i];
    if (std::sqrt(energy / n) < kSilenceRms) continue;

    for (int lag = 1; lag <= lag_max + 1; ++lag) {
      double acc = 0.0;
      for (int i = 0; i + lag < n; ++i) acc += x[i] * x[i + lag];
      r[lag] = acc / energy;
    }
    double best = 0.0;
    for (int lag = lag_min; lag <= lag_max; ++lag) best = std::max(best, r[lag]);
    if (best < kVoicingThreshold) continue;

    // Earliest local maximum within slack of the global one; r is
    // normalized so a subharmonic cannot sneak in front.
    int pick = 0;
    for (int lag = lag_min; lag <= lag_max; ++lag) {
      if (r[lag] >= kPeakSlack * best && r[lag] >= r[lag - 1] &&
          r[lag] >= r[lag + 1]) {
        pick = lag;
        break;
      }
    }
    if (pick == 0) continue;
    // Parabolic refinement around the integer lag.
    const double y0 = r[pick - 1], y1 = r[pick], y2 = r[pick + 1];
    const double denom = y0 - 2.0 * y1 + y2;
    double lag_ref = pick;
    if (std::abs(denom) > 1e-12) {
      const double delta = 0.5 * (y0 - y2) / denom;
      if (std::abs(delta) <= 1.0) lag_ref += delta;
    }
    out[t] = std::clamp(w.sample_rate / lag_ref, fmin, fmax);
  }
  return out;
}

}  // namespace binsight::dsp
