#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>

#include "binsight/data.hpp"
#include "binsight/metrics.hpp"
#include "binsight/model.hpp"

namespace binsight::train {

struct RunConfig {
  std::filesystem::path dataset_dir;
  model::ModelConfig model;
  metrics::LossWeights weights;
  double lr = 1e-4;
  int epochs = 10;
  int batch_size = 8;
  std::uint32_t seed = 1;
  double amp_multiplier = 1.0;

  static RunConfig from_config(const io::Config& cfg);
  io::Config to_config() const;
};

struct TaskLosses {
  double semantic = 0.0;
  double depth = 0.0;
  double motion = 0.0;
  double s3r = 0.0;
  double total = 0.0;
};

// Graph construction shared by training, the overfit check and the tests:
// runs the forward pass and assembles the per-task losses plus the
// weighted total. The s3r term is a complex-spectrogram L2 for the pure
// spectrogram encoder and the multi-scale spectral loss otherwise.
struct LossGraph {
  nn::Tensor<float> total;
  TaskLosses values;
};
LossGraph build_loss(model::SoundNet<float>& net, const DataPipeline& pipe,
                     const std::vector<SampleData>& batch,
                     const metrics::LossWeights& weights, bool training);

// Writes checkpoint_last.bsnc / checkpoint_best.bsnc under out_dir plus a
// deterministic per-epoch log; returns the path of the best checkpoint.
std::filesystem::path run_training(const RunConfig& cfg,
                                   const std::filesystem::path& out_dir,
                                   std::ostream& log,
                                   const std::filesystem::path& resume = {});

// Serialized model + optimizer + preprocessing statistics.
void save_checkpoint(const std::filesystem::path& path,
                     const RunConfig& cfg, const DatasetStats& stats,
                     model::SoundNet<float>& net, nn::Adam<float>& opt,
                     int epochs_done);
struct LoadedCheckpoint {
  RunConfig cfg;
  DatasetStats stats;
  std::unique_ptr<model::SoundNet<float>> net;
  std::vector<io::NamedTensor> opt_state;  // raw, for resuming
  int epochs_done = 0;
};
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

struct EvalReport {
  metrics::IouReport iou;
  metrics::DepthReport depth;
  double epe = 0.0;
  metrics::S3rReport s3r;  // first output pair
  std::size_t samples = 0;
  std::string per_sample_tsv;  // one machine-readable line per sample

  std::string to_text() const;  // key=value block
};

EvalReport evaluate(model::SoundNet<float>& net, const DataPipeline& pipe,
                    const std::vector<sim::ManifestRow>& manifest,
                    const std::string& split);

}  // namespace binsight::train
