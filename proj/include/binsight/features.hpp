#pragma once

#include <vector>

#include "binsight/stft.hpp"
#include "binsight/wave.hpp"

namespace binsight::dsp {

// A-curve gain in dB at frequency f (0 dB at 1 kHz).
double a_weighting_db(double freq_hz);

// Per-frame A-weighted power in dB, before any normalization. Frames
// follow the STFT grid of p. Silent frames bottom out at the dB floor.
std::vector<double> a_weighted_loudness_db(const Waveform& w,
                                           const StftParams& p);

// Affine normalization with corpus statistics: (db - mean) / std.
std::vector<double> normalize_loudness(const std::vector<double>& db,
                                       double corpus_mean, double corpus_std);

// Frame-major MFCC matrix (frames x n_coeffs): mel filterbank on the
// power spectrum, log with floor, then orthonormal DCT-II.
std::vector<std::vector<double>> mfcc(const Waveform& w, const StftParams& p,
                                      int n_mels, int n_coeffs);

// Autocorrelation pitch tracker with parabolic peak refinement; one value
// per STFT frame, 0 for unvoiced/silent frames, otherwise clamped to
// [fmin, fmax].
std::vector<double> estimate_f0(const Waveform& w, const StftParams& p,
                                double fmin, double fmax);

// Per-frame descriptors feeding the signal-processing encoder branch.
struct DdspFeatures {
  std::vector<double> f0;                      // Hz, >= 0
  std::vector<double> loudness;                // normalized dB
  std::vector<std::vector<double>> mfcc;       // frames x n_coeffs

  std::size_t frames() const { return f0.size(); }
};

}  // namespace binsight::dsp
