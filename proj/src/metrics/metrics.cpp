#include "binsight/metrics.hpp"

#include <cmath>

#include "binsight/error.hpp"

namespace binsight::metrics {

IouReport miou(const std::vector<int>& pred, const std::vector<int>& gt,
               const std::set<int>& foreground_classes) {
  if (pred.size() != gt.size())
    throw InvalidInput("miou: grid shape mismatch");
  IouReport report;
  double acc = 0.0;
  int defined = 0;
  for (int cls : foreground_classes) {
    std::size_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      const bool p = pred[i] == cls;
      const bool g = gt[i] == cls;
      inter += p && g;
      uni += p || g;
    }
    if (uni == 0) {
      report.per_class[cls] = std::nullopt;  // absent from both: no IoU
      continue;
    }
    const double iou = static_cast<double>(inter) / static_cast<double>(uni);
    report.per_class[cls] = iou;
    acc += iou;
    ++defined;
  }
  report.mean = defined > 0 ? acc / defined : 0.0;
  return report;
}

DepthReport depth_metrics(const std::vector<float>& pred,
                          const std::vector<float>& gt) {
  if (pred.size() != gt.size())
    throw InvalidInput("depth_metrics: grid shape mismatch");
  DepthReport r;
  double abs_rel = 0.0, sq_rel = 0.0, sq = 0.0;
  std::size_t used = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double g = gt[i];
    if (!(g > 0.0)) {
      ++r.excluded;
      continue;
    }
    const double d = pred[i] - g;
    abs_rel += std::abs(d) / g;
    sq_rel += d * d / g;
    sq += d * d;
    ++used;
  }
  if (used == 0) throw InvalidInput("depth_metrics: no valid pixels");
  r.abs_rel = abs_rel / used;
  r.sq_rel = sq_rel / used;
  r.mse = sq / used;
  r.rmse = std::sqrt(r.mse);
  return r;
}

double epe(const std::vector<float>& pred, const std::vector<float>& gt) {
  if (pred.size() != gt.size() || pred.size() % 2 != 0)
    throw InvalidInput("epe: flow shape mismatch");
  const std::size_t pixels = pred.size() / 2;
  double acc = 0.0;
  for (std::size_t i = 0; i < pixels; ++i) {
    const double dx = pred[i] - gt[i];
    const double dy = pred[pixels + i] - gt[pixels + i];
    acc += std::sqrt(dx * dx + dy * dy);
  }
  return acc / static_cast<double>(pixels);
}

namespace {

double spectrogram_mse(const dsp::Waveform& a, const dsp::Waveform& b,
                       const dsp::StftParams& p) {
  const auto sa = dsp::stft(a, p);
  const auto sb = dsp::stft(b, p);
  double acc = 0.0;
  for (std::size_t i = 0; i < sa.data.size(); ++i)
    acc += std::norm(sa.data[i] - sb.data[i]);
  return acc / static_cast<double>(sa.data.size());
}

double envelope_mse(const dsp::Waveform& a, const dsp::Waveform& b) {
  const auto ea = dsp::envelope(a);
  const auto eb = dsp::envelope(b);
  double acc = 0.0;
  for (std::size_t i = 0; i < ea.size(); ++i) {
    const double d = ea[i] - eb[i];
    acc += d * d;
  }
  return acc / static_cast<double>(ea.size());
}

}  // namespace

S3rReport s3r_metrics(const dsp::Waveform& pred_left,
                      const dsp::Waveform& pred_right,
                      const dsp::Waveform& gt_left,
                      const dsp::Waveform& gt_right,
                      const dsp::StftParams& p) {
  if (pred_left.samples.size() != gt_left.samples.size() ||
      pred_right.samples.size() != gt_right.samples.size())
    throw InvalidInput("s3r_metrics: length mismatch");
  S3rReport r;
  r.mse[0] = spectrogram_mse(pred_left, gt_left, p);
  r.mse[1] = spectrogram_mse(pred_right, gt_right, p);
  r.env[0] = envelope_mse(pred_left, gt_left);
  r.env[1] = envelope_mse(pred_right, gt_right);
  return r;
}

}  // namespace binsight::metrics
