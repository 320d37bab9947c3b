#include <doctest.h>

#include <cmath>
#include <random>

#include "binsight/error.hpp"
#include "binsight/model.hpp"

namespace {

using binsight::model::BatchInput;
using binsight::model::EncoderKind;
using binsight::model::ModelConfig;
using binsight::model::SoundNet;
using binsight::model::TaskSet;
using binsight::nn::Shape;
using binsight::nn::Tensor;

// Tiny geometry so forward passes stay cheap: 16-sample window on a
// 128-sample clip gives a 9x29 spectrogram.
ModelConfig tiny_config() {
  ModelConfig c;
  c.stft.window_size = 64;
  c.stft.hop_length = 4;
  c.clip_samples = 256;
  c.sample_rate = 1000;
  c.conv_plan = {4, 4, 8, 8};
  c.aspp_filters = 8;
  c.decoder_hidden = 8;
  c.s3r_plan = {8, 8, 4, 4, 4};
  c.out_h = 8;
  c.out_w = 16;
  c.mfcc_coeffs = 5;
  c.mfcc_mels = 8;
  c.gru_hidden = 6;
  c.z_dim = 6;
  c.mlp_hidden = 16;
  c.ddsp_channels = 8;
  c.tasks = TaskSet::from_string("SDMR");
  return c;
}

template <typename T>
Tensor<T> randt(Shape shape, std::mt19937& rng) {
  std::vector<T> data(binsight::nn::numel(shape));
  for (auto& v : data)
    v = static_cast<T>(static_cast<double>(rng()) / 4294967296.0 - 0.5);
  return Tensor<T>::from_data(std::move(shape), std::move(data));
}

template <typename T>
BatchInput<T> tiny_input(const ModelConfig& cfg, std::mt19937& rng,
                         bool same_channels = false) {
  BatchInput<T> input;
  input.batch = 1;
  const int bins = cfg.spec_bins(), frames = cfg.spec_frames();
  auto first = randt<T>({1, 1, bins, frames}, rng);
  for (std::size_t c = 0; c < cfg.input_channels.size(); ++c) {
    input.specs.push_back(
        (same_channels && c > 0) ? first
                                 : (c == 0 ? first
                                           : randt<T>({1, 1, bins, frames}, rng)));
    if (cfg.encoder != EncoderKind::spectrogram) {
      if (same_channels && c > 0) {
        input.f0.push_back(input.f0[0]);
        input.loudness.push_back(input.loudness[0]);
        input.mfcc.push_back(input.mfcc[0]);
      } else {
        input.f0.push_back(randt<T>({1, frames}, rng));
        input.loudness.push_back(randt<T>({1, frames}, rng));
        input.mfcc.push_back(randt<T>({1, frames, cfg.mfcc_coeffs}, rng));
      }
    }
  }
  if (cfg.tasks.s3r) {
    input.ref_spec[0] = randt<T>({1, 2, bins, frames}, rng);
    input.ref_spec[1] = randt<T>({1, 2, bins, frames}, rng);
  }
  return input;
}

}  // namespace

TEST_CASE("model config round-trips through key=value form") {
  ModelConfig c = tiny_config();
  c.encoder = EncoderKind::combined;
  c.input_channels = {1, 6, 3, 8};
  c.output_pairs = 2;
  const auto cfg_text = c.to_config().to_string();
  const auto back = ModelConfig::from_config(
      binsight::io::Config::from_string(cfg_text));
  CHECK(back.to_config().to_string() == cfg_text);
  CHECK(back.encoder == EncoderKind::combined);
  CHECK(back.input_channels == std::vector<int>{1, 6, 3, 8});
  CHECK(back.tasks.to_string() == "SDMR");

  CHECK_THROWS_AS(TaskSet::from_string("X"), binsight::ConfigError);
  CHECK_THROWS_AS(binsight::model::encoder_kind_from("conv"),
                  binsight::ConfigError);
}

TEST_CASE("desk-scale encoder grid: 257x97 collapses to 16x6") {
  ModelConfig c;  // defaults: 512/160 at 16 kHz, 1 s
  CHECK(c.spec_bins() == 257);
  CHECK(c.spec_frames() == 97);
  CHECK(c.feat_h() == 16);
  CHECK(c.feat_w() == 6);
}

TEST_CASE("shared-weight encoder: swapping ears swaps feature halves") {
  auto cfg = tiny_config();
  cfg.tasks = TaskSet::from_string("S");
  SoundNet<float> net(cfg);
  std::mt19937 rng(71);

  BatchInput<float> ab = tiny_input<float>(cfg, rng);
  BatchInput<float> ba = ab;
  std::swap(ba.specs[0], ba.specs[1]);

  auto feat_ab = net.spectrogram_branch(ab, false);
  auto feat_ba = net.spectrogram_branch(ba, false);
  const int half = cfg.conv_plan.back();
  const std::size_t plane =
      static_cast<std::size_t>(feat_ab.dim(2)) * feat_ab.dim(3);
  REQUIRE(feat_ab.dim(1) == 2 * half);
  for (int c = 0; c < half; ++c) {
    for (std::size_t i = 0; i < plane; ++i) {
      CHECK(feat_ab.data()[c * plane + i] ==
            feat_ba.data()[(half + c) * plane + i]);
      CHECK(feat_ab.data()[(half + c) * plane + i] ==
            feat_ba.data()[c * plane + i]);
    }
  }

  // identical ears produce identical halves
  BatchInput<float> same = tiny_input<float>(cfg, rng, true);
  auto feat_same = net.spectrogram_branch(same, false);
  for (int c = 0; c < half; ++c)
    for (std::size_t i = 0; i < plane; ++i)
      CHECK(feat_same.data()[c * plane + i] ==
            feat_same.data()[(half + c) * plane + i]);
}

TEST_CASE("aspp preserves the spatial grid and passes zeros through") {
  auto cfg = tiny_config();
  cfg.tasks = TaskSet::from_string("S");
  SoundNet<float> net(cfg);
  std::mt19937 rng(73);
  // the model's aspp expects its configured input width
  // (2 channels * plan back = 16)
  auto feat = randt<float>({2, 16, 5, 7}, rng);
  auto y = net.aspp(feat, false);
  CHECK(y.shape() == Shape{2, cfg.aspp_filters, 5, 7});

  auto zeros = Tensor<float>::zeros({2, 16, 5, 7});
  auto yz = net.aspp(zeros, false);
  for (float v : yz.data()) CHECK(v == 0.0f);
}

TEST_CASE("ddsp branch shares sub-encoders across ears and handles silence") {
  auto cfg = tiny_config();
  cfg.encoder = EncoderKind::ddsp;
  cfg.tasks = TaskSet::from_string("S");
  SoundNet<float> net(cfg);
  std::mt19937 rng(79);

  auto same = tiny_input<float>(cfg, rng, true);
  auto feat = net.ddsp_branch(same, false);
  const int half = cfg.ddsp_channels;
  REQUIRE(feat.dim(1) == 2 * half);
  const std::size_t plane =
      static_cast<std::size_t>(feat.dim(2)) * feat.dim(3);
  for (int c = 0; c < half; ++c)
    for (std::size_t i = 0; i < plane; ++i)
      CHECK(feat.data()[c * plane + i] ==
            feat.data()[(half + c) * plane + i]);

  // silence: all-zero descriptors give a finite, deterministic output
  BatchInput<float> zero;
  zero.batch = 1;
  const int bins = cfg.spec_bins(), frames = cfg.spec_frames();
  for (int c = 0; c < 2; ++c) {
    zero.specs.push_back(Tensor<float>::zeros({1, 1, bins, frames}));
    zero.f0.push_back(Tensor<float>::zeros({1, frames}));
    zero.loudness.push_back(Tensor<float>::zeros({1, frames}));
    zero.mfcc.push_back(Tensor<float>::zeros({1, frames, cfg.mfcc_coeffs}));
  }
  auto f1 = net.ddsp_branch(zero, false);
  auto f2 = net.ddsp_branch(zero, false);
  for (std::size_t i = 0; i < f1.size(); ++i) {
    CHECK(std::isfinite(f1.data()[i]));
    CHECK(f1.data()[i] == f2.data()[i]);
  }
}

TEST_CASE("combined encoder concatenates branch channels") {
  auto cfg = tiny_config();
  cfg.encoder = EncoderKind::combined;
  cfg.tasks = TaskSet::from_string("S");
  SoundNet<float> net(cfg);
  std::mt19937 rng(83);
  auto input = tiny_input<float>(cfg, rng);
  auto spec_feat = net.spectrogram_branch(input, false);
  auto ddsp_feat = net.ddsp_branch(input, false);
  CHECK(spec_feat.dim(1) + ddsp_feat.dim(1) ==
        2 * cfg.conv_plan.back() + 2 * cfg.ddsp_channels);
  // the full encoder consumes the concatenation without shape complaints
  auto enc = net.encode(input, false);
  CHECK(enc.shape() == Shape{1, cfg.aspp_filters, cfg.feat_h(), cfg.feat_w()});
}

TEST_CASE("multitask forward: shapes, ranges, determinism, task gating") {
  auto cfg = tiny_config();
  cfg.output_pairs = 3;
  SoundNet<float> net(cfg);
  std::mt19937 rng(89);
  auto input = tiny_input<float>(cfg, rng);

  auto pred = net.forward(input, false);
  CHECK(pred.semantic.shape() == Shape{1, 4, cfg.out_h, cfg.out_w});
  CHECK(pred.depth.shape() == Shape{1, 1, cfg.out_h, cfg.out_w});
  CHECK(pred.flow.shape() == Shape{1, 2, cfg.out_h, cfg.out_w});
  CHECK(pred.masks.shape() ==
        Shape{1, 12, cfg.spec_bins(), cfg.spec_frames()});

  // semantic probabilities per pixel sum to one
  const std::size_t pixels = static_cast<std::size_t>(cfg.out_h) * cfg.out_w;
  for (std::size_t px = 0; px < pixels; ++px) {
    float acc = 0.0f;
    for (int c = 0; c < 4; ++c) acc += pred.semantic.data()[c * pixels + px];
    CHECK(acc == doctest::Approx(1.0f).epsilon(1e-5));
  }
  // masks bounded to [-1, 1]
  for (float v : pred.masks.data()) {
    CHECK(v >= -1.0f);
    CHECK(v <= 1.0f);
  }

  // inference determinism
  auto pred2 = net.forward(input, false);
  CHECK(pred.semantic.data() == pred2.semantic.data());
  CHECK(pred.masks.data() == pred2.masks.data());

  // single-task subset leaves other outputs undefined
  auto only_sem = net.forward(input, TaskSet::from_string("S"), false);
  CHECK(only_sem.semantic.defined());
  CHECK_FALSE(only_sem.depth.defined());

  // asking a semantic-only model for depth fails
  auto cfg2 = tiny_config();
  cfg2.tasks = TaskSet::from_string("S");
  SoundNet<float> sem_net(cfg2);
  auto input2 = tiny_input<float>(cfg2, rng);
  CHECK_THROWS_AS(sem_net.forward(input2, TaskSet::from_string("SD"), false),
                  binsight::ConfigError);
}

TEST_CASE("zero masks reconstruct the input waveform exactly") {
  binsight::dsp::StftParams p;
  p.window_size = 32;
  p.hop_length = 8;
  std::mt19937 rng(97);
  binsight::dsp::Waveform left, right;
  left.sample_rate = right.sample_rate = 1000;
  left.samples.resize(256);
  right.samples.resize(256);
  for (auto& v : left.samples) v = static_cast<double>(rng()) / 4294967296.0 - 0.5;
  for (auto& v : right.samples) v = static_cast<double>(rng()) / 4294967296.0 - 0.5;
  auto sl = binsight::dsp::stft(left, p);
  auto sr = binsight::dsp::stft(right, p);

  const std::size_t plane = sl.bins * sl.frames;
  std::vector<float> masks(4 * plane, 0.0f);
  auto recon = binsight::model::s3r_reconstruct(masks, 1, sl, sr, left, right);
  REQUIRE(recon.size() == 1);
  for (std::size_t i = 0; i < left.samples.size(); ++i) {
    CHECK(std::abs(recon[0].left.samples[i] - left.samples[i]) < 1e-6);
    CHECK(std::abs(recon[0].right.samples[i] - right.samples[i]) < 1e-6);
  }
}

TEST_CASE("oracle masks reconstruct the target pair via the difference path") {
  // Build a synthetic scene where target = input - diff with a known diff;
  // the ideal mask diff_spec / input_spec must recover the target within
  // the inverse-transform tolerance.
  binsight::dsp::StftParams p;
  p.window_size = 32;
  p.hop_length = 8;
  constexpr double kPi = 3.141592653589793238462643383279502884;
  binsight::dsp::Waveform input, target;
  input.sample_rate = target.sample_rate = 1000;
  input.samples.resize(512);
  target.samples.resize(512);
  for (std::size_t i = 0; i < input.samples.size(); ++i) {
    const double t = static_cast<double>(i) / 1000.0;
    input.samples[i] = 0.5 * std::sin(2.0 * kPi * 61.0 * t) +
                       0.3 * std::sin(2.0 * kPi * 173.0 * t);
    target.samples[i] = 0.4 * std::sin(2.0 * kPi * 61.0 * t + 0.6) +
                        0.1 * std::sin(2.0 * kPi * 229.0 * t);
  }
  binsight::dsp::Waveform diff = input;
  for (std::size_t i = 0; i < diff.samples.size(); ++i)
    diff.samples[i] = input.samples[i] - target.samples[i];

  auto s_in = binsight::dsp::stft(input, p);
  auto s_diff = binsight::dsp::stft(diff, p);
  const std::size_t plane = s_in.bins * s_in.frames;
  std::vector<float> masks(4 * plane, 0.0f);
  for (std::size_t i = 0; i < plane; ++i) {
    const auto ratio = std::abs(s_in.data[i]) > 1e-9
                           ? s_diff.data[i] / s_in.data[i]
                           : std::complex<double>(0.0, 0.0);
    masks[i] = static_cast<float>(ratio.real());
    masks[plane + i] = static_cast<float>(ratio.imag());
    masks[2 * plane + i] = masks[i];
    masks[3 * plane + i] = masks[plane + i];
  }
  auto recon =
      binsight::model::s3r_reconstruct(masks, 1, s_in, s_in, input, input);
  // compare on the span covered by the inverse transform
  const std::size_t covered =
      p.window_size + (s_in.frames - 1) * p.hop_length;
  double err = 0.0, ref = 0.0;
  for (std::size_t i = p.window_size; i < covered - p.window_size; ++i) {
    err += std::pow(recon[0].left.samples[i] - target.samples[i], 2);
    ref += target.samples[i] * target.samples[i];
  }
  CHECK(std::sqrt(err / ref) < 1e-4);
}

TEST_CASE("checkpoint state export/import preserves behaviour") {
  auto cfg = tiny_config();
  SoundNet<float> net(cfg);
  std::mt19937 rng(101);
  auto input = tiny_input<float>(cfg, rng);
  auto before = net.forward(input, false);

  auto state = net.export_state();
  SoundNet<float> other(cfg);
  // perturb, then restore
  for (auto& [name, t] : other.params().items)
    for (auto& v : t.data()) v += 0.125f;
  other.import_state(state);
  auto after = other.forward(input, false);
  CHECK(before.semantic.data() == after.semantic.data());
  CHECK(before.masks.data() == after.masks.data());

  // missing tensors are rejected
  state.pop_back();
  SoundNet<float> third(cfg);
  CHECK_THROWS_AS(third.import_state(state), binsight::DataError);
}

TEST_CASE("end-to-end gradient through the full loss (wide precision)") {
  auto cfg = tiny_config();
  cfg.conv_plan = {2, 2, 4, 4};
  cfg.aspp_filters = 4;
  cfg.decoder_hidden = 4;
  cfg.s3r_plan = {4, 4, 4, 2, 2};
  cfg.out_h = 8;
  cfg.out_w = 8;
  SoundNet<double> net(cfg);
  std::mt19937 rng(103);
  auto input = tiny_input<double>(cfg, rng);

  std::vector<int> labels(static_cast<std::size_t>(cfg.out_h) * cfg.out_w);
  for (auto& v : labels) v = static_cast<int>(rng() % 4);
  auto depth_tgt = randt<double>({1, 1, cfg.out_h, cfg.out_w}, rng);
  auto flow_tgt = randt<double>({1, 2, cfg.out_h, cfg.out_w}, rng);
  auto diff_tgt =
      randt<double>({1, 2, cfg.spec_bins(), cfg.spec_frames()}, rng);

  auto loss_fn = [&] {
    auto pred = net.forward(input, true);
    auto sem = binsight::nn::cross_entropy_mean(pred.semantic, labels);
    auto dep = binsight::nn::mse(pred.depth, depth_tgt);
    auto mot = binsight::nn::mse(pred.flow, flow_tgt);
    auto mask = binsight::nn::slice(pred.masks, 1, 0, 2);
    auto diff_pred = binsight::nn::cmul_planar(mask, input.ref_spec[0]);
    auto s3r = binsight::nn::mse(diff_pred, diff_tgt);
    binsight::metrics::LossWeights w;
    return binsight::metrics::total_loss(sem, dep, mot, s3r, w);
  };

  // probe a handful of weights from the first encoder conv
  auto& weight = net.params().items.front().second;
  auto loss = loss_fn();
  weight.zero_grad();
  loss.backward();
  const auto analytic = weight.grad();

  // 1e-6 keeps the central-difference truncation error (third-derivative
  // terms through softmax + cross-entropy) well under the 1e-3 gate while
  // double precision keeps the cancellation noise near 1e-6 relative.
  std::mt19937 pick(107);
  const double eps = 1e-6;
  for (int probe = 0; probe < 5; ++probe) {
    const std::size_t i = pick() % weight.size();
    const double saved = weight.data()[i];
    weight.data()[i] = saved + eps;
    const double up = loss_fn().item();
    weight.data()[i] = saved - eps;
    const double dn = loss_fn().item();
    weight.data()[i] = saved;
    const double fd = (up - dn) / (2 * eps);
    const double denom = std::max({std::abs(fd), std::abs(analytic[i]), 1e-8});
    CHECK(std::abs(fd - analytic[i]) / denom < 1e-3);
  }
}
