#pragma once

#include <map>
#include <optional>
#include <set>
#include <vector>

#include "binsight/stft.hpp"
#include "binsight/wave.hpp"

namespace binsight::metrics {

// Per-class intersection-over-union; classes absent from both prediction
// and ground truth have no defined IoU and are excluded from the mean.
struct IouReport {
  std::map<int, std::optional<double>> per_class;
  double mean = 0.0;  // over defined classes only; 0 when none defined
};

IouReport miou(const std::vector<int>& pred, const std::vector<int>& gt,
               const std::set<int>& foreground_classes);

struct DepthReport {
  double abs_rel = 0.0;
  double sq_rel = 0.0;
  double rmse = 0.0;
  double mse = 0.0;
  std::size_t excluded = 0;  // pixels skipped for non-positive ground truth
};

// All four depth errors in meters; pixels with gt <= 0 are excluded.
DepthReport depth_metrics(const std::vector<float>& pred,
                          const std::vector<float>& gt);

// Mean endpoint error between flow fields stored as (2, H, W) planes.
double epe(const std::vector<float>& pred, const std::vector<float>& gt);

struct S3rReport {
  double mse[2] = {0.0, 0.0};  // complex-spectrogram mean squared error
  double env[2] = {0.0, 0.0};  // envelope mean squared error
};

// Per-ear spectrogram and envelope errors between predicted and reference
// binaural waveforms.
S3rReport s3r_metrics(const dsp::Waveform& pred_left,
                      const dsp::Waveform& pred_right,
                      const dsp::Waveform& gt_left,
                      const dsp::Waveform& gt_right, const dsp::StftParams& p);

}  // namespace binsight::metrics
