#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "binsight/io.hpp"
#include "binsight/layers.hpp"
#include "binsight/losses.hpp"
#include "binsight/ops_spectral.hpp"
#include "binsight/stft.hpp"

namespace binsight::model {

enum class EncoderKind { spectrogram, ddsp, combined };

EncoderKind encoder_kind_from(const std::string& name);
const char* encoder_kind_name(EncoderKind k);

// Task letters follow the run naming: S(emantic), D(epth), M(otion),
// R = spatial-sound super-resolution head.
struct TaskSet {
  bool semantic = true;
  bool depth = false;
  bool motion = false;
  bool s3r = false;

  static TaskSet from_string(const std::string& letters);
  std::string to_string() const;
};

struct ModelConfig {
  EncoderKind encoder = EncoderKind::spectrogram;
  TaskSet tasks;
  std::vector<int> input_channels = {3, 8};  // rig mic ids, 1..8
  int output_pairs = 1;                      // P in 1..3

  // encoder widths; the conv stack is shared across input channels
  std::vector<int> conv_plan = {16, 32, 64, 64};
  int aspp_filters = 64;
  int decoder_hidden = 64;
  std::vector<int> s3r_plan = {32, 16, 8, 8, 8};

  // input geometry
  dsp::StftParams stft;  // 512 / 160
  int sample_rate = 16000;
  int clip_samples = 16000;
  int out_h = 32;
  int out_w = 64;
  int num_classes = 4;  // background + car + tram + motorcycle

  // signal-descriptor branch
  int mfcc_mels = 40;
  int mfcc_coeffs = 20;
  int gru_hidden = 64;
  int z_dim = 64;
  int mlp_hidden = 256;
  int ddsp_channels = 64;
  double f0_min = 65.0;
  double f0_max = 2000.0;

  // depth normalization for training targets
  double depth_min = 1.0;
  double depth_max = 50.0;

  std::uint32_t init_seed = 1;

  int spec_bins() const { return stft.window_size / 2 + 1; }
  int spec_frames() const {
    return 1 + (clip_samples - stft.window_size) / stft.hop_length;
  }
  // conv-stack output grid for the configured spectrogram shape
  int feat_h() const;
  int feat_w() const;

  static ModelConfig from_config(const io::Config& cfg);
  io::Config to_config() const;

  double depth_to_norm(double meters) const;
  double norm_to_depth(double norm) const;
};

// Per-batch model inputs. Complex data uses (N, 2, F, T) planes. The
// signal-descriptor features are precomputed (they carry no gradients);
// only their latent pathway is trained.
template <typename T>
struct BatchInput {
  int batch = 0;
  // per configured input channel, (N, 1, F, Tt) log-spectrograms
  std::vector<nn::Tensor<T>> specs;
  // per configured input channel, (N, frames) and (N, frames, n_coeffs)
  std::vector<nn::Tensor<T>> f0;
  std::vector<nn::Tensor<T>> loudness;
  std::vector<nn::Tensor<T>> mfcc;
  // reference-pair complex spectrograms for the S3R head, left and right
  nn::Tensor<T> ref_spec[2];
};

template <typename T>
struct Prediction {
  nn::Tensor<T> semantic;  // (N, classes, H, W) softmax probabilities
  nn::Tensor<T> depth;     // (N, 1, H, W) normalized [0, 1] scale
  nn::Tensor<T> flow;      // (N, 2, H, W) pixels
  nn::Tensor<T> masks;     // (N, 4P, bins, frames) in [-1, 1]
};

template <typename T>
class SoundNet {
 public:
  explicit SoundNet(const ModelConfig& cfg);

  const ModelConfig& config() const { return cfg_; }

  // One encoder pass, one decoder pass per enabled task. Requesting a
  // task the model lacks throws ConfigError.
  Prediction<T> forward(const BatchInput<T>& input, const TaskSet& tasks,
                        bool training);
  Prediction<T> forward(const BatchInput<T>& input, bool training) {
    return forward(input, cfg_.tasks, training);
  }

  nn::ParamSet<T>& params() { return params_; }

  // Exposed encoder stages (ablation tooling and tests).
  nn::Tensor<T> encode(const BatchInput<T>& input, bool training);
  nn::Tensor<T> spectrogram_branch(const BatchInput<T>& input, bool training);
  nn::Tensor<T> ddsp_branch(const BatchInput<T>& input, bool training);
  nn::Tensor<T> aspp(const nn::Tensor<T>& x, bool training);

  // Everything the optimizer or checkpoint needs, including batch-norm
  // running statistics (exported as "<name>.running_*" buffers).
  std::vector<io::NamedTensor> export_state() const;
  void import_state(const std::vector<io::NamedTensor>& state);

 private:
  nn::Tensor<T> dense_head(int which, const nn::Tensor<T>& feat, bool training);

  // applies fn(name, layer) to every batch-norm layer, in checkpoint order
  template <typename F>
  void visit_bn(F&& fn) {
    for (std::size_t i = 0; i < enc_bn_.size(); ++i)
      fn("enc.bn" + std::to_string(i), enc_bn_[i]);
    for (std::size_t i = 0; i < aspp_bn_.size(); ++i)
      fn("aspp.bn" + std::to_string(i), aspp_bn_[i]);
    fn("aspp.fuse_bn", aspp_fuse_bn_);
    static const char* head_names[3] = {"semantic", "depth", "motion"};
    for (int i = 0; i < 3; ++i) {
      if (!heads_[i].present) continue;
      fn(std::string("head.") + head_names[i] + ".bn1", heads_[i].bn1);
      fn(std::string("head.") + head_names[i] + ".bn2", heads_[i].bn2);
    }
    for (std::size_t i = 0; i < s3r_bn_.size(); ++i)
      fn("s3r.bn" + std::to_string(i), s3r_bn_[i]);
  }

  ModelConfig cfg_;
  nn::ParamSet<T> params_;

  // shared per-channel spectrogram stack
  std::vector<nn::Conv2dLayer<T>> enc_conv_;
  std::vector<nn::BatchNorm2dLayer<T>> enc_bn_;

  // signal-descriptor branch (shared across channels)
  nn::GruLayer<T> gru_;
  nn::LinearLayer<T> z_linear_;
  std::vector<nn::LinearLayer<T>> mlp_;

  // context module
  std::vector<nn::Conv2dLayer<T>> aspp_conv_;  // 1x1, d6, d12, d18
  std::vector<nn::BatchNorm2dLayer<T>> aspp_bn_;
  nn::Conv2dLayer<T> aspp_fuse_;
  nn::BatchNorm2dLayer<T> aspp_fuse_bn_;

  // dense decoders: 0 semantic, 1 depth, 2 motion
  struct DenseHead {
    nn::Conv2dLayer<T> c1, c2, c3;
    nn::BatchNorm2dLayer<T> bn1, bn2;
    bool present = false;
  };
  DenseHead heads_[3];

  // spatial-sound decoder
  std::vector<nn::ConvTranspose2dLayer<T>> s3r_up_;
  std::vector<nn::BatchNorm2dLayer<T>> s3r_bn_;
  nn::Conv2dLayer<T> s3r_out_;
  bool has_s3r_ = false;
};

// Complex-mask reconstruction: per pair and ear, the predicted difference
// spectrogram is mask * reference spectrogram; its inverse transform is
// subtracted from the reference waveform to produce the target-pair
// signal. masks holds (4P, bins, frames) planes for one sample, ordered
// (pair, ear L/R, re/im).
struct ReconstructedPair {
  dsp::Waveform left;
  dsp::Waveform right;
};
std::vector<ReconstructedPair> s3r_reconstruct(
    const std::vector<float>& masks, int output_pairs,
    const dsp::ComplexSpectrogram& ref_left,
    const dsp::ComplexSpectrogram& ref_right, const dsp::Waveform& wave_left,
    const dsp::Waveform& wave_right);

}  // namespace binsight::model
