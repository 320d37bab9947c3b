#include "binsight/data.hpp"

#include <cmath>

#include "binsight/error.hpp"
#include "binsight/features.hpp"

namespace binsight::train {

namespace {

std::vector<float> complex_planes(const dsp::ComplexSpectrogram& s) {
  const std::size_t plane = s.bins * s.frames;
  std::vector<float> out(2 * plane);
  for (std::size_t i = 0; i < plane; ++i) {
    out[i] = static_cast<float>(s.data[i].real());
    out[plane + i] = static_cast<float>(s.data[i].imag());
  }
  return out;
}

}  // namespace

void DatasetStats::to_config(io::Config& cfg) const {
  for (int c = 0; c < 8; ++c) {
    cfg.set("stats.rms" + std::to_string(c + 1),
            std::to_string(channel_mean_rms[c]));
  }
  cfg.set("stats.loudness_mean", std::to_string(loudness_mean));
  cfg.set("stats.loudness_std", std::to_string(loudness_std));
  cfg.set("stats.target_rms", std::to_string(target_rms));
}

DatasetStats DatasetStats::from_config(const io::Config& cfg) {
  DatasetStats s;
  for (int c = 0; c < 8; ++c)
    s.channel_mean_rms[c] = cfg.get_double("stats.rms" + std::to_string(c + 1));
  s.loudness_mean = cfg.get_double("stats.loudness_mean");
  s.loudness_std = cfg.get_double("stats.loudness_std");
  s.target_rms = cfg.get_double_or("stats.target_rms", 0.1);
  return s;
}

DatasetStats compute_dataset_stats(const std::filesystem::path& dataset_dir,
                                   const std::vector<sim::ManifestRow>& rows,
                                   const model::ModelConfig& cfg) {
  DatasetStats stats;
  std::array<double, 8> rms_acc{};
  double loud_acc = 0.0, loud_sq = 0.0;
  std::size_t loud_n = 0, used = 0;

  for (const auto& row : rows) {
    if (row.split != "train") continue;
    const auto channels = io::read_bsna(dataset_dir / row.id / "audio.bsna");
    if (channels.size() != 8)
      throw DataError("expected 8 rig channels in sample " + row.id);
    for (int c = 0; c < 8; ++c) rms_acc[c] += dsp::rms(channels[c]);
    // loudness statistics over the configured input channels, pooled
    for (int id : cfg.input_channels) {
      const auto db =
          dsp::a_weighted_loudness_db(channels[id - 1], cfg.stft);
      for (double v : db) {
        loud_acc += v;
        loud_sq += v * v;
        ++loud_n;
      }
    }
    ++used;
  }
  if (used == 0) throw DataError("dataset has no training samples");
  for (int c = 0; c < 8; ++c) {
    stats.channel_mean_rms[c] = rms_acc[c] / static_cast<double>(used);
    if (!(stats.channel_mean_rms[c] > 0.0))
      throw NumericError("degenerate per-channel RMS statistics");
  }
  const double mean = loud_acc / static_cast<double>(loud_n);
  const double var = loud_sq / static_cast<double>(loud_n) - mean * mean;
  stats.loudness_mean = mean;
  stats.loudness_std = std::sqrt(std::max(var, 1e-12));
  return stats;
}

std::array<int, 2> s3r_reference_pair() { return {3, 8}; }

std::vector<std::array<int, 2>> s3r_output_pairs(int count) {
  static const std::array<std::array<int, 2>, 3> all{
      std::array<int, 2>{1, 6}, std::array<int, 2>{4, 7},
      std::array<int, 2>{2, 5}};
  if (count < 1 || count > 3)
    throw ConfigError("s3r output pair count must be in 1..3");
  return {all.begin(), all.begin() + count};
}

DataPipeline::DataPipeline(std::filesystem::path dataset_dir,
                           model::ModelConfig cfg, DatasetStats stats,
                           double amp_multiplier)
    : dir_(std::move(dataset_dir)),
      cfg_(std::move(cfg)),
      stats_(stats),
      amp_(amp_multiplier) {}

SampleData preprocess_channels(const std::vector<dsp::Waveform>& channels,
                               const model::ModelConfig& cfg,
                               const DatasetStats& stats, double amp,
                               bool with_ref) {
  if (channels.size() != 8)
    throw DataError("preprocess: expected 8 rig channels");
  if (static_cast<int>(channels[0].samples.size()) != cfg.clip_samples)
    throw DataError("preprocess: clip length mismatch (want " +
                    std::to_string(cfg.clip_samples) + " samples)");

  SampleData out;
  // amplitude multiplier models a quieter/louder scene; normalization
  // uses frozen corpus statistics so the scaling survives preprocessing
  std::array<dsp::Waveform, 8> norm;
  for (int c = 0; c < 8; ++c) {
    dsp::Waveform scaled = channels[c];
    for (auto& v : scaled.samples) v *= amp;
    norm[c] = dsp::rms_normalize(scaled, stats.channel_mean_rms[c],
                                 stats.target_rms);
  }

  const int frames = cfg.spec_frames();
  for (int id_ch : cfg.input_channels) {
    const auto& w = norm[id_ch - 1];
    const auto spec = dsp::stft(w, cfg.stft);
    const auto lg = dsp::log_spectrogram(spec);
    out.specs.emplace_back(lg.begin(), lg.end());

    if (cfg.encoder != model::EncoderKind::spectrogram) {
      const auto f0 = dsp::estimate_f0(w, cfg.stft, cfg.f0_min, cfg.f0_max);
      std::vector<float> f0_scaled(f0.size());
      for (std::size_t i = 0; i < f0.size(); ++i)
        f0_scaled[i] = static_cast<float>(f0[i] / 1000.0);
      out.f0.push_back(std::move(f0_scaled));

      const auto db = dsp::a_weighted_loudness_db(w, cfg.stft);
      const auto ln = dsp::normalize_loudness(db, stats.loudness_mean,
                                              stats.loudness_std);
      out.loud.emplace_back(ln.begin(), ln.end());

      // per-coefficient standardization over the clip ("normalization
      // layer" ahead of the recurrent latent encoder)
      const auto mf = dsp::mfcc(w, cfg.stft, cfg.mfcc_mels, cfg.mfcc_coeffs);
      std::vector<float> flat(static_cast<std::size_t>(frames) * cfg.mfcc_coeffs);
      for (int c = 0; c < cfg.mfcc_coeffs; ++c) {
        double mean = 0.0, sq = 0.0;
        for (int t = 0; t < frames; ++t) mean += mf[t][c];
        mean /= frames;
        for (int t = 0; t < frames; ++t) {
          const double d = mf[t][c] - mean;
          sq += d * d;
        }
        const double sd = std::sqrt(std::max(sq / frames, 1e-12));
        for (int t = 0; t < frames; ++t)
          flat[static_cast<std::size_t>(t) * cfg.mfcc_coeffs + c] =
              static_cast<float>((mf[t][c] - mean) / sd);
      }
      out.mfcc.push_back(std::move(flat));
    }
  }

  if (with_ref) {
    const auto ref = s3r_reference_pair();
    for (int ear = 0; ear < 2; ++ear) {
      const auto& w = norm[ref[ear] - 1];
      out.ref_spec[ear] = complex_planes(dsp::stft(w, cfg.stft));
      out.ref_wave[ear].assign(w.samples.begin(), w.samples.end());
    }
  }
  return out;
}

SampleData DataPipeline::load(const std::string& id,
                              bool with_s3r_targets) const {
  const auto dir = dir_ / id;
  auto channels = io::read_bsna(dir / "audio.bsna");
  if (channels.size() != 8) throw DataError("sample " + id + ": expected 8 channels");

  const bool need_ref = cfg_.tasks.s3r || with_s3r_targets;
  SampleData out = preprocess_channels(channels, cfg_, stats_, amp_, need_ref);
  out.id = id;

  if (with_s3r_targets) {
    std::array<dsp::Waveform, 8> norm;
    for (int c = 0; c < 8; ++c) {
      dsp::Waveform scaled = channels[c];
      for (auto& v : scaled.samples) v *= amp_;
      norm[c] = dsp::rms_normalize(scaled, stats_.channel_mean_rms[c],
                                   stats_.target_rms);
    }
    const auto ref = s3r_reference_pair();
    for (const auto& pair : s3r_output_pairs(cfg_.output_pairs)) {
      std::array<std::vector<float>, 2> dspec, twave;
      for (int ear = 0; ear < 2; ++ear) {
        const auto& w0 = norm[ref[ear] - 1];
        const auto& wa = norm[pair[ear] - 1];
        dsp::Waveform diff = w0;
        for (std::size_t i = 0; i < diff.samples.size(); ++i)
          diff.samples[i] = w0.samples[i] - wa.samples[i];
        dspec[ear] = complex_planes(dsp::stft(diff, cfg_.stft));
        twave[ear].assign(wa.samples.begin(), wa.samples.end());
      }
      out.diff_spec.push_back(std::move(dspec));
      out.target_wave.push_back(std::move(twave));
    }
  }

  const auto gt = sim::read_ground_truth(dir);
  if (gt.height != cfg_.out_h || gt.width != cfg_.out_w)
    throw DataError("sample " + id + ": ground-truth grid mismatch");
  out.labels = gt.labels;
  out.depth_meters = gt.depth;
  out.depth_norm.resize(gt.depth.size());
  for (std::size_t i = 0; i < gt.depth.size(); ++i)
    out.depth_norm[i] = static_cast<float>(cfg_.depth_to_norm(gt.depth[i]));
  out.flow = gt.flow;
  return out;
}

model::BatchInput<float> DataPipeline::make_input(
    const std::vector<SampleData>& batch) const {
  if (batch.empty()) throw InvalidInput("make_input: empty batch");
  const int n = static_cast<int>(batch.size());
  const int bins = cfg_.spec_bins(), frames = cfg_.spec_frames();
  const std::size_t plane = static_cast<std::size_t>(bins) * frames;

  model::BatchInput<float> input;
  input.batch = n;
  const std::size_t n_ch = cfg_.input_channels.size();
  for (std::size_t c = 0; c < n_ch; ++c) {
    std::vector<float> spec(static_cast<std::size_t>(n) * plane);
    for (int s = 0; s < n; ++s)
      std::copy(batch[s].specs[c].begin(), batch[s].specs[c].end(),
                spec.begin() + s * plane);
    input.specs.push_back(nn::Tensor<float>::from_data(
        {n, 1, bins, frames}, std::move(spec)));

    if (cfg_.encoder != model::EncoderKind::spectrogram) {
      std::vector<float> f0(static_cast<std::size_t>(n) * frames);
      std::vector<float> loud(f0.size());
      std::vector<float> mf(static_cast<std::size_t>(n) * frames *
                            cfg_.mfcc_coeffs);
      for (int s = 0; s < n; ++s) {
        std::copy(batch[s].f0[c].begin(), batch[s].f0[c].end(),
                  f0.begin() + static_cast<std::size_t>(s) * frames);
        std::copy(batch[s].loud[c].begin(), batch[s].loud[c].end(),
                  loud.begin() + static_cast<std::size_t>(s) * frames);
        std::copy(batch[s].mfcc[c].begin(), batch[s].mfcc[c].end(),
                  mf.begin() + static_cast<std::size_t>(s) * frames *
                                   cfg_.mfcc_coeffs);
      }
      input.f0.push_back(
          nn::Tensor<float>::from_data({n, frames}, std::move(f0)));
      input.loudness.push_back(
          nn::Tensor<float>::from_data({n, frames}, std::move(loud)));
      input.mfcc.push_back(nn::Tensor<float>::from_data(
          {n, frames, cfg_.mfcc_coeffs}, std::move(mf)));
    }
  }
  if (cfg_.tasks.s3r && !batch[0].ref_spec[0].empty()) {
    for (int ear = 0; ear < 2; ++ear) {
      std::vector<float> planes(static_cast<std::size_t>(n) * 2 * plane);
      for (int s = 0; s < n; ++s)
        std::copy(batch[s].ref_spec[ear].begin(),
                  batch[s].ref_spec[ear].end(),
                  planes.begin() + static_cast<std::size_t>(s) * 2 * plane);
      input.ref_spec[ear] = nn::Tensor<float>::from_data(
          {n, 2, bins, frames}, std::move(planes));
    }
  }
  return input;
}

std::vector<int> DataPipeline::stack_labels(
    const std::vector<SampleData>& batch) const {
  std::vector<int> out;
  for (const auto& s : batch)
    out.insert(out.end(), s.labels.begin(), s.labels.end());
  return out;
}

nn::Tensor<float> DataPipeline::stack_depth(
    const std::vector<SampleData>& batch) const {
  const int n = static_cast<int>(batch.size());
  std::vector<float> data;
  for (const auto& s : batch)
    data.insert(data.end(), s.depth_norm.begin(), s.depth_norm.end());
  return nn::Tensor<float>::from_data({n, 1, cfg_.out_h, cfg_.out_w},
                                      std::move(data));
}

nn::Tensor<float> DataPipeline::stack_flow(
    const std::vector<SampleData>& batch) const {
  const int n = static_cast<int>(batch.size());
  std::vector<float> data;
  for (const auto& s : batch)
    data.insert(data.end(), s.flow.begin(), s.flow.end());
  return nn::Tensor<float>::from_data({n, 2, cfg_.out_h, cfg_.out_w},
                                      std::move(data));
}

nn::Tensor<float> DataPipeline::stack_diff_spec(
    const std::vector<SampleData>& batch, int pair, int ear) const {
  const int n = static_cast<int>(batch.size());
  const int bins = cfg_.spec_bins(), frames = cfg_.spec_frames();
  std::vector<float> data;
  for (const auto& s : batch) {
    const auto& planes = s.diff_spec.at(pair)[ear];
    data.insert(data.end(), planes.begin(), planes.end());
  }
  return nn::Tensor<float>::from_data({n, 2, bins, frames}, std::move(data));
}

nn::Tensor<float> DataPipeline::stack_target_wave(
    const std::vector<SampleData>& batch, int pair, int ear,
    int length) const {
  const int n = static_cast<int>(batch.size());
  std::vector<float> data;
  for (const auto& s : batch) {
    const auto& w = s.target_wave.at(pair)[ear];
    data.insert(data.end(), w.begin(), w.begin() + length);
  }
  return nn::Tensor<float>::from_data({n, length}, std::move(data));
}

nn::Tensor<float> DataPipeline::stack_ref_wave(
    const std::vector<SampleData>& batch, int ear, int length) const {
  const int n = static_cast<int>(batch.size());
  std::vector<float> data;
  for (const auto& s : batch) {
    const auto& w = s.ref_wave[ear];
    data.insert(data.end(), w.begin(), w.begin() + length);
  }
  return nn::Tensor<float>::from_data({n, length}, std::move(data));
}

}  // namespace binsight::train
