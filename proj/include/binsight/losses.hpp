#pragma once

#include <vector>

#include "binsight/ops.hpp"
#include "binsight/ops_spectral.hpp"

namespace binsight::metrics {

// Balancing weights for the joint objective and the spectral-loss setup.
struct LossWeights {
  double lambda1 = 0.2;  // depth
  double lambda2 = 0.2;  // motion
  double lambda3 = 0.2;  // spatial-sound head (0.02 preset for ddsp/combined)
  double alpha_spec = 1.0;
  std::vector<int> fft_sizes = {256, 128, 64};
};

// Sum over FFT sizes of mean|.|_1 distance between magnitudes plus
// alpha * the same distance between log magnitudes. Windows are periodic
// Hann with hop = size / 4; the log floor is 1e-7.
template <typename T>
nn::Tensor<T> multiscale_spectral_loss(const nn::Tensor<T>& pred_wave,
                                       const nn::Tensor<T>& target_wave,
                                       const LossWeights& w) {
  if (pred_wave.shape() != target_wave.shape())
    throw ConfigError("multiscale_spectral_loss: length mismatch");
  const T log_floor = static_cast<T>(1e-7);
  nn::Tensor<T> total = nn::Tensor<T>::scalar(T(0));
  for (int size : w.fft_sizes) {
    dsp::StftParams p;
    p.window_size = size;
    p.hop_length = std::max(1, size / 4);
    auto pred_mag = nn::complex_magnitude(nn::stft_op(pred_wave, p));
    auto tgt_mag = nn::complex_magnitude(nn::stft_op(target_wave, p));
    auto lin = nn::l1_mean(pred_mag, tgt_mag);
    auto lg = nn::l1_mean(nn::log_eps(pred_mag, log_floor),
                          nn::log_eps(tgt_mag, log_floor));
    total = nn::add(total, nn::add(lin, nn::scale(lg, static_cast<T>(w.alpha_spec))));
  }
  return total;
}

// L = L_semantic + l1 * L_depth + l2 * L_motion + l3 * L_s3r; absent heads
// contribute zero.
template <typename T>
nn::Tensor<T> total_loss(const nn::Tensor<T>& semantic,
                         const nn::Tensor<T>& depth,
                         const nn::Tensor<T>& motion,
                         const nn::Tensor<T>& s3r, const LossWeights& w) {
  nn::Tensor<T> total = nn::Tensor<T>::scalar(T(0));
  if (semantic.defined()) total = nn::add(total, semantic);
  if (depth.defined())
    total = nn::add(total, nn::scale(depth, static_cast<T>(w.lambda1)));
  if (motion.defined())
    total = nn::add(total, nn::scale(motion, static_cast<T>(w.lambda2)));
  if (s3r.defined())
    total = nn::add(total, nn::scale(s3r, static_cast<T>(w.lambda3)));
  return total;
}

}  // namespace binsight::metrics
