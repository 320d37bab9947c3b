#include "binsight/dataset.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "binsight/error.hpp"

namespace binsight::sim {
namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

double uniform01(std::mt19937& rng) {
  return static_cast<double>(rng()) / 4294967296.0;
}

double uniform(std::mt19937& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

std::string sample_id(int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%06d", index);
  return buf;
}

void write_scene_txt(const std::filesystem::path& path,
                     const SceneSpec& scene) {
  io::Config cfg;
  cfg.set("duration", std::to_string(scene.duration));
  cfg.set("sample_rate", std::to_string(scene.sample_rate));
  cfg.set("noise_floor", std::to_string(scene.noise_floor));
  cfg.set("rng_seed", std::to_string(scene.rng_seed));
  cfg.set("num_sources", std::to_string(scene.sources.size()));
  for (std::size_t i = 0; i < scene.sources.size(); ++i) {
    const auto& s = scene.sources[i];
    const std::string p = "source" + std::to_string(i) + ".";
    cfg.set(p + "class", std::to_string(static_cast<int>(s.class_id)));
    cfg.set(p + "azimuth0", std::to_string(s.azimuth0));
    cfg.set(p + "distance0", std::to_string(s.distance0));
    cfg.set(p + "angular_velocity", std::to_string(s.angular_velocity));
    cfg.set(p + "radial_velocity", std::to_string(s.radial_velocity));
    cfg.set(p + "timbre_seed", std::to_string(s.timbre_seed));
    cfg.set(p + "base_gain", std::to_string(s.base_gain));
  }
  std::ofstream os(path);
  if (!os) throw DataError("cannot write " + path.string());
  os << cfg.to_string();
  if (!os) throw DataError("write failed: " + path.string());
}

}  // namespace

DatasetConfig dataset_config_from(const io::Config& cfg) {
  DatasetConfig d;
  d.num_samples = static_cast<int>(cfg.get_int_or("num_samples", d.num_samples));
  d.train_frac = cfg.get_double_or("train_frac", d.train_frac);
  d.val_frac = cfg.get_double_or("val_frac", d.val_frac);
  d.master_seed = static_cast<std::uint32_t>(cfg.get_int_or("seed", d.master_seed));
  d.sample_rate = static_cast<int>(cfg.get_int_or("sample_rate", d.sample_rate));
  d.duration = cfg.get_double_or("duration", d.duration);
  d.t_mid = cfg.get_double_or("t_mid", d.duration / 2.0);
  d.dt = cfg.get_double_or("dt", d.dt);
  d.grid_h = static_cast<int>(cfg.get_int_or("grid_h", d.grid_h));
  d.grid_w = static_cast<int>(cfg.get_int_or("grid_w", d.grid_w));
  d.bg_depth = cfg.get_double_or("bg_depth", d.bg_depth);
  d.noise_floor = cfg.get_double_or("noise_floor", d.noise_floor);
  d.min_sources = static_cast<int>(cfg.get_int_or("min_sources", d.min_sources));
  d.max_sources = static_cast<int>(cfg.get_int_or("max_sources", d.max_sources));
  d.min_distance = cfg.get_double_or("min_distance", d.min_distance);
  d.azimuth_min = cfg.get_double_or("azimuth_min", d.azimuth_min);
  d.azimuth_max = cfg.get_double_or("azimuth_max", d.azimuth_max);
  d.max_distance = cfg.get_double_or("max_distance", d.max_distance);
  d.max_angular_velocity =
      cfg.get_double_or("max_angular_velocity", d.max_angular_velocity);
  d.max_radial_velocity =
      cfg.get_double_or("max_radial_velocity", d.max_radial_velocity);
  d.min_gain = cfg.get_double_or("min_gain", d.min_gain);
  d.max_gain = cfg.get_double_or("max_gain", d.max_gain);
  d.rig.head_radius = cfg.get_double_or("head_radius", d.rig.head_radius);
  d.rig.speed_of_sound =
      cfg.get_double_or("speed_of_sound", d.rig.speed_of_sound);
  d.raster.width_factor =
      cfg.get_double_or("rect_width_factor", d.raster.width_factor);
  d.raster.height_factor =
      cfg.get_double_or("rect_height_factor", d.raster.height_factor);
  if (d.num_samples <= 0) throw ConfigError("dataset: empty dataset (num_samples <= 0)");
  if (d.min_sources < 0 || d.max_sources > 4 || d.min_sources > d.max_sources)
    throw ConfigError("dataset: source count range must sit inside 0..4");
  if (!(d.train_frac >= 0 && d.val_frac >= 0 && d.train_frac + d.val_frac <= 1.0))
    throw ConfigError("dataset: bad split fractions");
  return d;
}

SceneSpec sample_scene(const DatasetConfig& cfg, int index) {
  std::mt19937 rng(cfg.master_seed ^
                   (0x9e3779b9u * static_cast<std::uint32_t>(index + 1)));
  SceneSpec scene;
  scene.duration = cfg.duration;
  scene.sample_rate = cfg.sample_rate;
  scene.noise_floor = cfg.noise_floor;
  scene.rng_seed = rng();

  const int count =
      cfg.min_sources +
      static_cast<int>(rng() % static_cast<std::uint32_t>(
                                   cfg.max_sources - cfg.min_sources + 1));
  for (int s = 0; s < count; ++s) {
    SourceSpec src;
    src.class_id = static_cast<SourceClass>(1 + rng() % 3);
    src.azimuth0 = uniform(rng, cfg.azimuth_min, cfg.azimuth_max);
    src.distance0 = uniform(rng, cfg.min_distance, cfg.max_distance);
    src.angular_velocity =
        uniform(rng, -cfg.max_angular_velocity, cfg.max_angular_velocity);
    src.radial_velocity =
        uniform(rng, -cfg.max_radial_velocity, cfg.max_radial_velocity);
    // keep the trajectory outside the 1 m bubble with margin
    const double d_end = src.distance0 + src.radial_velocity * cfg.duration;
    if (d_end < 1.2) src.radial_velocity = (1.2 - src.distance0) / cfg.duration;
    src.timbre_seed = rng();
    src.base_gain = uniform(rng, cfg.min_gain, cfg.max_gain);
    scene.sources.push_back(src);
  }
  return scene;
}

std::vector<ManifestRow> generate_dataset(
    const DatasetConfig& cfg, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw DataError("cannot create " + out_dir.string() + ": " + ec.message());

  const int n_train = static_cast<int>(cfg.num_samples * cfg.train_frac);
  const int n_val = static_cast<int>(cfg.num_samples * cfg.val_frac);

  std::vector<ManifestRow> manifest;
  for (int i = 0; i < cfg.num_samples; ++i) {
    const std::string id = sample_id(i);
    const std::filesystem::path dir = out_dir / id;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw DataError("cannot create " + dir.string() + ": " + ec.message());

    const SceneSpec scene = sample_scene(cfg, i);
    const auto channels = render_scene(scene, cfg.rig);
    io::write_bsna(dir / "audio.bsna", channels);

    const GroundTruthMaps gt =
        rasterize_ground_truth(scene, cfg.t_mid, cfg.t_mid + cfg.dt, cfg.grid_h,
                               cfg.grid_w, cfg.bg_depth, cfg.raster);
    const auto h = static_cast<std::uint32_t>(cfg.grid_h);
    const auto w = static_cast<std::uint32_t>(cfg.grid_w);
    std::vector<float> labels_f(gt.labels.begin(), gt.labels.end());
    io::write_bsnt(dir / "labels.bsnt", {h, w}, labels_f);
    io::write_bsnt(dir / "depth.bsnt", {h, w}, gt.depth);
    io::write_bsnt(dir / "flow.bsnt", {2, h, w}, gt.flow);
    write_scene_txt(dir / "scene.txt", scene);

    const char* split = i < n_train ? "train" : (i < n_train + n_val ? "val" : "test");
    manifest.push_back({id, split});
  }

  std::ofstream os(out_dir / "manifest.txt");
  if (!os) throw DataError("cannot write manifest in " + out_dir.string());
  for (const auto& row : manifest) os << row.id << '\t' << row.split << '\n';
  if (!os) throw DataError("manifest write failed in " + out_dir.string());
  return manifest;
}

std::vector<ManifestRow> read_manifest(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open manifest: " + path.string());
  std::vector<ManifestRow> rows;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw DataError("malformed manifest line: " + line);
    rows.push_back({line.substr(0, tab), line.substr(tab + 1)});
  }
  if (rows.empty()) throw DataError("empty manifest: " + path.string());
  return rows;
}

GroundTruthMaps read_ground_truth(const std::filesystem::path& sample_dir) {
  GroundTruthMaps gt;
  std::vector<std::uint32_t> dims;
  std::vector<float> labels_f;
  io::read_bsnt(sample_dir / "labels.bsnt", dims, labels_f);
  if (dims.size() != 2) throw DataError("labels.bsnt: expected rank 2");
  gt.height = static_cast<int>(dims[0]);
  gt.width = static_cast<int>(dims[1]);
  gt.labels.assign(labels_f.size(), 0);
  for (std::size_t i = 0; i < labels_f.size(); ++i)
    gt.labels[i] = static_cast<int>(std::lround(labels_f[i]));
  io::read_bsnt(sample_dir / "depth.bsnt", dims, gt.depth);
  if (dims.size() != 2 || static_cast<int>(dims[0]) != gt.height ||
      static_cast<int>(dims[1]) != gt.width)
    throw DataError("depth.bsnt: shape mismatch in " + sample_dir.string());
  io::read_bsnt(sample_dir / "flow.bsnt", dims, gt.flow);
  if (dims.size() != 3 || dims[0] != 2)
    throw DataError("flow.bsnt: expected (2,H,W) in " + sample_dir.string());
  return gt;
}

}  // namespace binsight::sim
