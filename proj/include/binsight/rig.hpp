#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "binsight/wave.hpp"

namespace binsight::sim {

// Eight-microphone rig: four binaural pairs looking at 0, 90, 180 and 270
// degrees azimuth. Azimuth is measured counter-clockwise from the front,
// in radians; pair entries are (left ear, right ear) channel ids.
struct RigGeometry {
  double head_radius = 0.0875;    // m
  double speed_of_sound = 343.0;  // m/s

  struct Pair {
    double azimuth;
    int left;
    int right;
  };
  static constexpr int kChannels = 8;
  std::array<Pair, 4> pairs() const {
    constexpr double kPi = 3.141592653589793238462643383279502884;
    return {Pair{0.0, 3, 8}, Pair{kPi / 2, 1, 6}, Pair{kPi, 4, 7},
            Pair{3 * kPi / 2, 2, 5}};
  }
};

enum class SourceClass : int { car = 1, tram = 2, motorcycle = 3 };

struct SourceSpec {
  SourceClass class_id = SourceClass::car;
  double azimuth0 = 0.0;          // rad at t = 0
  double distance0 = 2.0;         // m at t = 0
  double angular_velocity = 0.0;  // rad/s, counter-clockwise positive
  double radial_velocity = 0.0;   // m/s, positive moves away
  std::uint32_t timbre_seed = 0;
  double base_gain = 1.0;

  double azimuth_at(double t) const { return azimuth0 + angular_velocity * t; }
  double distance_at(double t) const {
    return distance0 + radial_velocity * t;
  }
};

struct SceneSpec {
  std::vector<SourceSpec> sources;  // up to 4
  double duration = 1.0;            // s
  int sample_rate = 16000;
  double noise_floor = 0.0;  // RMS of additive gaussian noise per channel
  std::uint32_t rng_seed = 0;
};

// Woodworth spherical-head interaural time difference for a source seen at
// the given azimuth relative to the head's facing direction. Positive when
// the right ear hears the sound later (source on the left).
double itd(double source_azimuth, const RigGeometry& g);

// Frequency-independent head-shadow gain applied to the far ear.
double head_shadow_gain(double lateral_azimuth);

// Class-specific emitter rendered at the scene rate; deterministic in the
// timbre seed, normalized to a fixed RMS, silent before t = 0.
std::vector<double> render_emitter(SourceClass cls, std::uint32_t timbre_seed,
                                   int sample_rate, std::size_t samples);

// Renders all eight rig channels; result[i] is channel id i+1.
std::vector<dsp::Waveform> render_scene(const SceneSpec& scene,
                                        const RigGeometry& g);

}  // namespace binsight::sim
