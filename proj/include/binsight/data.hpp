#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "binsight/dataset.hpp"
#include "binsight/model.hpp"

namespace binsight::train {

// Corpus statistics gathered over the training split; they parameterize
// preprocessing and ride along inside checkpoints.
struct DatasetStats {
  std::array<double, 8> channel_mean_rms{};
  double loudness_mean = 0.0;
  double loudness_std = 1.0;
  double target_rms = 0.1;

  void to_config(io::Config& cfg) const;
  static DatasetStats from_config(const io::Config& cfg);
};

DatasetStats compute_dataset_stats(const std::filesystem::path& dataset_dir,
                                   const std::vector<sim::ManifestRow>& rows,
                                   const model::ModelConfig& cfg);

// One sample, fully preprocessed into plain arrays.
struct SampleData {
  std::string id;
  // per configured input channel
  std::vector<std::vector<float>> specs;  // F*T log-spectrogram
  std::vector<std::vector<float>> f0;     // frames, scaled to ~[0,1]
  std::vector<std::vector<float>> loud;   // frames, corpus-normalized
  std::vector<std::vector<float>> mfcc;   // frames*coeffs, per-sample normed
  // reference 0-degree pair for the spatial-sound head
  std::array<std::vector<float>, 2> ref_spec;  // 2*F*T complex planes
  std::array<std::vector<float>, 2> ref_wave;  // clip samples
  // targets
  std::vector<int> labels;          // H*W
  std::vector<float> depth_norm;    // H*W in [0,1]
  std::vector<float> depth_meters;  // H*W
  std::vector<float> flow;          // 2*H*W
  // per output pair, per ear
  std::vector<std::array<std::vector<float>, 2>> diff_spec;    // 2*F*T
  std::vector<std::array<std::vector<float>, 2>> target_wave;  // clip samples
};

// Rig channel ids of the S3R reference pair and of the candidate output
// pairs, in ablation order (90, 180, 270 degrees).
std::array<int, 2> s3r_reference_pair();
std::vector<std::array<int, 2>> s3r_output_pairs(int count);

// Normalizes the rig channels and fills the model-input side of a
// SampleData (spectrograms, signal descriptors, reference pair when
// with_ref is set). Targets are left empty. channels must hold the eight
// rig channels in id order.
SampleData preprocess_channels(const std::vector<dsp::Waveform>& channels,
                               const model::ModelConfig& cfg,
                               const DatasetStats& stats, double amp,
                               bool with_ref);

class DataPipeline {
 public:
  DataPipeline(std::filesystem::path dataset_dir, model::ModelConfig cfg,
               DatasetStats stats, double amp_multiplier = 1.0);

  // with_s3r_targets additionally prepares difference spectrograms and
  // target-pair waveforms for the configured number of output pairs.
  SampleData load(const std::string& id, bool with_s3r_targets) const;

  // Stacks samples into the model's batched input plus target tensors.
  model::BatchInput<float> make_input(const std::vector<SampleData>& batch) const;
  std::vector<int> stack_labels(const std::vector<SampleData>& batch) const;
  nn::Tensor<float> stack_depth(const std::vector<SampleData>& batch) const;
  nn::Tensor<float> stack_flow(const std::vector<SampleData>& batch) const;
  // per pair/ear targets; complex planes (N,2,F,T) and waves (N, L)
  nn::Tensor<float> stack_diff_spec(const std::vector<SampleData>& batch,
                                    int pair, int ear) const;
  nn::Tensor<float> stack_target_wave(const std::vector<SampleData>& batch,
                                      int pair, int ear, int length) const;
  nn::Tensor<float> stack_ref_wave(const std::vector<SampleData>& batch,
                                   int ear, int length) const;

  const model::ModelConfig& config() const { return cfg_; }
  const DatasetStats& stats() const { return stats_; }

 private:
  std::filesystem::path dir_;
  model::ModelConfig cfg_;
  DatasetStats stats_;
  double amp_;
};

}  // namespace binsight::train
