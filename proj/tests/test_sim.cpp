#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "binsight/dataset.hpp"
#include "binsight/error.hpp"
#include "binsight/ground_truth.hpp"
#include "binsight/rig.hpp"

namespace fs = std::filesystem;

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

using binsight::sim::RigGeometry;
using binsight::sim::SceneSpec;
using binsight::sim::SourceClass;
using binsight::sim::SourceSpec;

std::size_t onset_index(const std::vector<double>& x, double tiny = 1e-9) {
  for (std::size_t i = 0; i < x.size(); ++i)
    if (std::abs(x[i]) > tiny) return i;
  return x.size();
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("binsight_sim_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

std::string file_bytes(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(is), {});
}

}  // namespace

TEST_CASE("itd follows the spherical-head formula") {
  RigGeometry g;  // a = 0.0875, c = 343

  CHECK(binsight::sim::itd(0.0, g) == doctest::Approx(0.0));

  // direct formula evaluation at the side: (a/c) * (pi/2 + 1)
  const double want = 0.0875 / 343.0 * (kPi / 2 + 1.0);
  CHECK(binsight::sim::itd(kPi / 2, g) == doctest::Approx(want).epsilon(1e-12));
  CHECK(want == doctest::Approx(6.56e-4).epsilon(1e-3));

  // antisymmetry, and folding of rear azimuths
  for (double az : {0.3, 1.1, 2.0, 3.0}) {
    CHECK(binsight::sim::itd(-az, g) ==
          doctest::Approx(-binsight::sim::itd(az, g)).epsilon(1e-12));
  }
  CHECK(binsight::sim::itd(kPi, g) == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(binsight::sim::itd(kPi - 0.4, g) ==
        doctest::Approx(binsight::sim::itd(0.4, g)).epsilon(1e-12));
}

TEST_CASE("empty scene renders silence on all eight channels") {
  SceneSpec scene;
  scene.noise_floor = 0.0;
  auto ch = binsight::sim::render_scene(scene, RigGeometry{});
  REQUIRE(ch.size() == 8);
  for (const auto& c : ch) {
    CHECK(c.samples.size() == 16000);
    for (double v : c.samples) CHECK(v == 0.0);
  }
}

TEST_CASE("static frontal source: pair (3,8) symmetric, pair (1,6) maximally split") {
  RigGeometry g;
  SceneSpec scene;
  scene.noise_floor = 0.0;
  SourceSpec src;
  src.class_id = SourceClass::tram;
  src.azimuth0 = 0.0;
  src.distance0 = 3.0;
  src.timbre_seed = 7;
  scene.sources = {src};
  auto ch = binsight::sim::render_scene(scene, g);

  // frontal: no ITD/ILD between 3 and 8
  for (std::size_t i = 0; i < ch[2].samples.size(); ++i)
    CHECK(ch[2].samples[i] == doctest::Approx(ch[7].samples[i]).epsilon(1e-12));

  // pair (1,6) faces 90 degrees: source sits at lateral -90, so the right
  // ear (6) leads by the full ITD. Oracle: analytic per-channel delays.
  const double base = 3.0 / g.speed_of_sound;
  const double full = 0.0875 / g.speed_of_sound * (kPi / 2 + 1.0);
  const double fs = 16000.0;
  const auto on1 = onset_index(ch[0].samples);
  const auto on6 = onset_index(ch[5].samples);
  CHECK(std::abs(static_cast<double>(on6) - (base - full / 2) * fs) <= 1.0);
  CHECK(std::abs(static_cast<double>(on1) - (base + full / 2) * fs) <= 1.0);
  CHECK(on6 < on1);

  // ILD: far ear (1) is quieter
  double e1 = 0.0, e6 = 0.0;
  for (double v : ch[0].samples) e1 += v * v;
  for (double v : ch[5].samples) e6 += v * v;
  CHECK(e1 < e6);

  // reproducibility: bit-identical rerun
  auto ch2 = binsight::sim::render_scene(scene, g);
  for (int c = 0; c < 8; ++c) CHECK(ch[c].samples == ch2[c].samples);
}

TEST_CASE("doubling base_gain doubles every channel pre-noise") {
  SceneSpec scene;
  scene.noise_floor = 0.0;
  SourceSpec src;
  src.class_id = SourceClass::car;
  src.azimuth0 = 1.0;
  src.distance0 = 2.5;
  src.angular_velocity = 0.5;
  src.timbre_seed = 11;
  src.base_gain = 0.4;
  scene.sources = {src};
  auto lo = binsight::sim::render_scene(scene, RigGeometry{});
  scene.sources[0].base_gain = 0.8;
  auto hi = binsight::sim::render_scene(scene, RigGeometry{});
  for (int c = 0; c < 8; ++c)
    for (std::size_t i = 0; i < lo[c].samples.size(); ++i)
      CHECK(hi[c].samples[i] == doctest::Approx(2.0 * lo[c].samples[i]).epsilon(1e-12));
}

TEST_CASE("moving a source from 2 m to 4 m halves the amplitude") {
  // speed of sound 320 m/s makes both propagation delays integer samples
  // (100 and 200), so the two renders align by a plain shift.
  RigGeometry g;
  g.speed_of_sound = 320.0;
  SceneSpec scene;
  scene.noise_floor = 0.0;
  SourceSpec src;
  src.class_id = SourceClass::motorcycle;
  src.azimuth0 = 0.0;
  src.distance0 = 2.0;
  src.timbre_seed = 3;
  scene.sources = {src};
  auto near = binsight::sim::render_scene(scene, g);
  scene.sources[0].distance0 = 4.0;
  auto far = binsight::sim::render_scene(scene, g);
  for (std::size_t i = 300; i < far[2].samples.size(); ++i) {
    const double want = 0.5 * near[2].samples[i - 100];
    CHECK(far[2].samples[i] == doctest::Approx(want).epsilon(1e-6));
  }
}

TEST_CASE("sources inside one meter are rejected") {
  SceneSpec scene;
  SourceSpec src;
  src.distance0 = 1.5;
  src.radial_velocity = -1.0;  // reaches 0.5 m at t = 1
  scene.sources = {src};
  CHECK_THROWS_AS(binsight::sim::render_scene(scene, RigGeometry{}),
                  binsight::InvalidInput);
}

TEST_CASE("ground-truth rasterization: background, statics, and flow") {
  SceneSpec scene;  // empty
  auto gt = binsight::sim::rasterize_ground_truth(scene, 0.5, 0.75, 32, 64, 30.0);
  for (int v : gt.labels) CHECK(v == 0);
  for (float v : gt.depth) CHECK(v == doctest::Approx(30.0f));
  for (float v : gt.flow) CHECK(v == 0.0f);

  // one static source: its box carries class, depth and zero flow
  SourceSpec src;
  src.class_id = SourceClass::tram;
  src.azimuth0 = kPi / 2;
  src.distance0 = 2.0;
  scene.sources = {src};
  gt = binsight::sim::rasterize_ground_truth(scene, 0.5, 0.75, 32, 64, 30.0);
  std::size_t labeled = 0;
  for (std::size_t i = 0; i < gt.labels.size(); ++i) {
    if (gt.labels[i] != 0) {
      ++labeled;
      CHECK(gt.labels[i] == 2);
      CHECK(gt.depth[i] == doctest::Approx(2.0f));
      CHECK(gt.flow[i] == 0.0f);
      CHECK(gt.flow[gt.labels.size() + i] == 0.0f);
    }
  }
  CHECK(labeled > 0);

  // rotating source: horizontal flow = omega * dt * W / (2 pi)
  scene.sources[0].angular_velocity = 0.8;
  gt = binsight::sim::rasterize_ground_truth(scene, 0.5, 0.75, 32, 64, 30.0);
  const double want_dx = 0.8 * 0.25 * 64.0 / (2.0 * kPi);
  bool seen = false;
  for (std::size_t i = 0; i < gt.labels.size(); ++i) {
    if (gt.labels[i] != 0) {
      CHECK(gt.flow[i] == doctest::Approx(want_dx).epsilon(1e-6));
      seen = true;
    }
  }
  CHECK(seen);

  // nearer source overwrites farther one at overlapping pixels
  SourceSpec near = src;
  near.class_id = SourceClass::car;
  near.distance0 = 1.5;
  near.angular_velocity = 0.0;
  scene.sources = {src, near};
  gt = binsight::sim::rasterize_ground_truth(scene, 0.5, 0.75, 32, 64, 30.0);
  bool saw_near = false;
  for (std::size_t i = 0; i < gt.labels.size(); ++i) {
    if (gt.labels[i] == 1) {
      CHECK(gt.depth[i] == doctest::Approx(1.5f));
      saw_near = true;
    }
  }
  CHECK(saw_near);

  CHECK_THROWS_AS(
      binsight::sim::rasterize_ground_truth(scene, 0.5, 0.75, 4, 64, 30.0),
      binsight::ConfigError);
  CHECK_THROWS_AS(
      binsight::sim::rasterize_ground_truth(scene, 0.8, 0.7, 32, 64, 30.0),
      binsight::InvalidInput);
}

TEST_CASE("generate_dataset writes a reproducible split") {
  TempDir tmp;
  binsight::sim::DatasetConfig cfg;
  cfg.num_samples = 10;
  cfg.duration = 0.25;
  cfg.t_mid = 0.1;
  cfg.dt = 0.1;
  cfg.master_seed = 99;
  auto manifest = binsight::sim::generate_dataset(cfg, tmp.path / "a");
  REQUIRE(manifest.size() == 10);
  int train = 0, val = 0, test = 0;
  for (const auto& row : manifest) {
    if (row.split == "train") ++train;
    if (row.split == "val") ++val;
    if (row.split == "test") ++test;
  }
  CHECK(train == 8);
  CHECK(val == 1);
  CHECK(test == 1);
  CHECK(train + val + test == 10);

  // same master seed: byte-identical outputs
  binsight::sim::generate_dataset(cfg, tmp.path / "b");
  for (const char* name : {"000000", "000004", "000009"}) {
    for (const char* f : {"audio.bsna", "labels.bsnt", "depth.bsnt",
                          "flow.bsnt", "scene.txt"}) {
      CHECK(file_bytes(tmp.path / "a" / name / f) ==
            file_bytes(tmp.path / "b" / name / f));
    }
  }
  CHECK(file_bytes(tmp.path / "a" / "manifest.txt") ==
        file_bytes(tmp.path / "b" / "manifest.txt"));

  // manifest re-reads and ground truth loads
  auto rows = binsight::sim::read_manifest(tmp.path / "a" / "manifest.txt");
  CHECK(rows.size() == 10);
  auto gt = binsight::sim::read_ground_truth(tmp.path / "a" / "000000");
  CHECK(gt.height == 32);
  CHECK(gt.width == 64);

  // labeled pixels carry the source distance, never the background depth
  bool any_label = false;
  for (std::size_t i = 0; i < gt.labels.size(); ++i) {
    if (gt.labels[i] != 0) {
      any_label = true;
      CHECK(gt.depth[i] > 0.0f);
      CHECK(gt.depth[i] < 30.0f);
    }
  }
  CHECK(any_label);
}
