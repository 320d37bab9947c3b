#include "binsight/rig.hpp"

#include <cmath>
#include <random>
#include <string>

#include "binsight/error.hpp"

namespace binsight::sim {
namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

double wrap_pi(double a) {
  a = std::fmod(a + kPi, 2.0 * kPi);
  if (a < 0) a += 2.0 * kPi;
  return a - kPi;
}

double uniform01(std::mt19937& rng) {
  return static_cast<double>(rng()) / 4294967296.0;
}

double gaussian(std::mt19937& rng) {
  double u1 = 0.0;
  do {
    u1 = (static_cast<double>(rng()) + 1.0) / 4294967297.0;
  } while (u1 <= 0.0);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
}

// Linear interpolation with silence before sample 0.
inline double sample_at(const std::vector<double>& buf, double pos) {
  if (pos <= -1.0) return 0.0;
  const double fl = std::floor(pos);
  const long i = static_cast<long>(fl);
  const double frac = pos - fl;
  const double lo = (i < 0 || i >= static_cast<long>(buf.size()))
                        ? 0.0
                        : buf[static_cast<std::size_t>(i)];
  const long j = i + 1;
  const double hi = (j < 0 || j >= static_cast<long>(buf.size()))
                        ? 0.0
                        : buf[static_cast<std::size_t>(j)];
  return lo + frac * (hi - lo);
}

struct Harmonic {
  double freq;
  double amp;
  double phase;
};

}  // namespace

double itd(double source_azimuth, const RigGeometry& g) {
  if (!(g.head_radius > 0)) throw ConfigError("itd: head_radius must be positive");
  const double s = std::sin(wrap_pi(source_azimuth));
  const double lateral = std::asin(std::abs(s));  // folded into [0, pi/2]
  const double mag = g.head_radius / g.speed_of_sound * (lateral + std::sin(lateral));
  return s >= 0 ? mag : -mag;
}

double head_shadow_gain(double lateral_azimuth) {
  return 1.0 - 0.4 * std::abs(std::sin(lateral_azimuth));
}

std::vector<double> render_emitter(SourceClass cls, std::uint32_t timbre_seed,
                                   int sample_rate, std::size_t samples) {
  std::mt19937 rng(timbre_seed ^ 0x51a7b3c9u);
  std::vector<Harmonic> harmonics;
  double noise_level = 0.0;
  enum class NoiseColor { low, high, band } color = NoiseColor::low;

  switch (cls) {
    case SourceClass::car: {
      // low rumble: dense stack on a low fundamental plus broadband noise;
      // the seed jitters the fundamental inside a narrow class band and
      // randomizes phases, keeping classes acoustically tight
      const double f0 = 90.0 + 20.0 * uniform01(rng);
      for (int h = 1; h <= 8; ++h)
        harmonics.push_back({f0 * h, 1.0 / h, 2.0 * kPi * uniform01(rng)});
      noise_level = 0.3;
      color = NoiseColor::low;
      break;
    }
    case SourceClass::tram: {
      // tonal whine plus rail hiss
      const double f0 = 380.0 + 40.0 * uniform01(rng);
      harmonics.push_back({f0, 1.0, 2.0 * kPi * uniform01(rng)});
      harmonics.push_back({2 * f0, 0.55, 2.0 * kPi * uniform01(rng)});
      harmonics.push_back({3 * f0, 0.3, 2.0 * kPi * uniform01(rng)});
      noise_level = 0.22;
      color = NoiseColor::high;
      break;
    }
    case SourceClass::motorcycle: {
      // pulse-train firing: strong odd harmonics on a very low fundamental
      const double f0 = 50.0 + 10.0 * uniform01(rng);
      for (int h = 1; h <= 15; h += 2)
        harmonics.push_back(
            {f0 * h, 1.0 / std::sqrt(static_cast<double>(h)),
             2.0 * kPi * uniform01(rng)});
      noise_level = 0.18;
      color = NoiseColor::band;
      break;
    }
    default:
      throw InvalidInput("render_emitter: unknown source class");
  }

  const double nyquist_cap = 0.45 * sample_rate;
  std::vector<double> out(samples, 0.0);
  for (const auto& h : harmonics) {
    if (h.freq >= nyquist_cap) continue;
    const double w = 2.0 * kPi * h.freq / sample_rate;
    for (std::size_t i = 0; i < samples; ++i)
      out[i] += h.amp * std::sin(w * static_cast<double>(i) + h.phase);
  }

  // shaped noise via first-order filters
  double lp = 0.0, lp2 = 0.0;
  const double alpha_low = 0.05, alpha_band = 0.2;
  for (std::size_t i = 0; i < samples; ++i) {
    const double white = gaussian(rng);
    double shaped = 0.0;
    switch (color) {
      case NoiseColor::low:
        lp += alpha_low * (white - lp);
        shaped = lp * 6.0;
        break;
      case NoiseColor::high:
        lp += alpha_low * (white - lp);
        shaped = white - lp;
        break;
      case NoiseColor::band:
        lp += alpha_band * (white - lp);
        lp2 += alpha_band * (lp - lp2);
        shaped = (lp - lp2) * 4.0;
        break;
    }
    out[i] += noise_level * shaped;
  }

  // fixed output RMS so distance and base_gain fully control level
  double acc = 0.0;
  for (double v : out) acc += v * v;
  const double rms = std::sqrt(acc / static_cast<double>(samples));
  const double target = 0.2;
  if (rms > 0) {
    const double s = target / rms;
    for (double& v : out) v *= s;
  }
  return out;
}

std::vector<dsp::Waveform> render_scene(const SceneSpec& scene,
                                        const RigGeometry& g) {
  if (!(scene.duration > 0) || scene.sample_rate <= 0)
    throw InvalidInput("render_scene: bad duration or sample rate");
  if (scene.sources.size() > 4)
    throw InvalidInput("render_scene: at most 4 sources");
  const std::size_t len =
      static_cast<std::size_t>(scene.duration * scene.sample_rate);
  if (len == 0) throw InvalidInput("render_scene: empty clip");

  for (const auto& src : scene.sources) {
    const double d0 = src.distance_at(0.0);
    const double d1 = src.distance_at(scene.duration);
    if (std::min(d0, d1) < 1.0)
      throw InvalidInput("render_scene: source passes inside 1 m");
  }

  std::vector<dsp::Waveform> channels(RigGeometry::kChannels);
  for (int c = 0; c < RigGeometry::kChannels; ++c) {
    channels[c].sample_rate = scene.sample_rate;
    channels[c].channel_id = c + 1;
    channels[c].samples.assign(len, 0.0);
  }

  const auto pairs = g.pairs();
  for (const auto& src : scene.sources) {
    const auto emitter = render_emitter(src.class_id, src.timbre_seed,
                                        scene.sample_rate, len);
    for (const auto& pair : pairs) {
      auto& left = channels[pair.left - 1].samples;
      auto& right = channels[pair.right - 1].samples;
      for (std::size_t n = 0; n < len; ++n) {
        const double t = static_cast<double>(n) / scene.sample_rate;
        const double d = src.distance_at(t);
        const double theta = wrap_pi(src.azimuth_at(t) - pair.azimuth);
        const double dt_ears = itd(theta, g);
        const double base_delay = d / g.speed_of_sound;
        const double gain = src.base_gain / d;
        const double shadow = head_shadow_gain(theta);
        // positive itd: source on the left, right ear later and shadowed
        const double gain_l = gain * (theta >= 0 ? 1.0 : shadow);
        const double gain_r = gain * (theta >= 0 ? shadow : 1.0);
        const double tau_l = (t - (base_delay - dt_ears / 2)) * scene.sample_rate;
        const double tau_r = (t - (base_delay + dt_ears / 2)) * scene.sample_rate;
        left[n] += gain_l * sample_at(emitter, tau_l);
        right[n] += gain_r * sample_at(emitter, tau_r);
      }
    }
  }

  if (scene.noise_floor > 0) {
    for (int c = 0; c < RigGeometry::kChannels; ++c) {
      std::mt19937 rng(scene.rng_seed ^ (0x9e3779b9u * (c + 1)));
      for (auto& v : channels[c].samples)
        v += scene.noise_floor * gaussian(rng);
    }
  }
  return channels;
}

}  // namespace binsight::sim
