#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "binsight/ground_truth.hpp"
#include "binsight/io.hpp"
#include "binsight/rig.hpp"

namespace binsight::sim {

// Knobs for synthesizing a dataset of seeded scenes. Every field has a
// desk-scale default; the config file may override any of them.
struct DatasetConfig {
  int num_samples = 64;
  double train_frac = 0.8;
  double val_frac = 0.1;  // test gets the rest
  std::uint32_t master_seed = 1234;

  int sample_rate = 16000;
  double duration = 1.0;  // s
  double t_mid = 0.5;
  double dt = 0.25;  // flow probe offset
  int grid_h = 32;
  int grid_w = 64;
  double bg_depth = 30.0;
  double noise_floor = 0.001;

  int min_sources = 1;
  int max_sources = 2;
  double min_distance = 2.0;
  double max_distance = 5.0;
  // Azimuth sector the sources are drawn from (radians, 0 = front). The
  // full circle keeps every head orientation exercised; a front sector
  // avoids the front/back confusion a single 0-degree pair cannot
  // resolve.
  double azimuth_min = 0.0;
  double azimuth_max = 2.0 * 3.141592653589793238462643383279502884;
  double max_angular_velocity = 0.8;  // rad/s
  double max_radial_velocity = 0.5;   // m/s
  double min_gain = 0.6;
  double max_gain = 1.0;

  RigGeometry rig;
  RasterParams raster;
};

DatasetConfig dataset_config_from(const io::Config& cfg);

struct ManifestRow {
  std::string id;
  std::string split;  // train | val | test
};

// Deterministically draws a scene for the given sample index.
SceneSpec sample_scene(const DatasetConfig& cfg, int index);

// Renders and writes num_samples scenes under out_dir:
//   <id>/audio.bsna  <id>/labels.bsnt  <id>/depth.bsnt  <id>/flow.bsnt
//   <id>/scene.txt   and a top-level manifest.txt with "id<TAB>split".
std::vector<ManifestRow> generate_dataset(const DatasetConfig& cfg,
                                          const std::filesystem::path& out_dir);

std::vector<ManifestRow> read_manifest(const std::filesystem::path& path);

// Ground-truth maps for one generated sample directory.
GroundTruthMaps read_ground_truth(const std::filesystem::path& sample_dir);

}  // namespace binsight::sim
