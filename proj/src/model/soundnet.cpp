#include "binsight/model.hpp"

#include <algorithm>
#include <sstream>

#include "binsight/error.hpp"

namespace binsight::model {

EncoderKind encoder_kind_from(const std::string& name) {
  if (name == "spectrogram") return EncoderKind::spectrogram;
  if (name == "ddsp") return EncoderKind::ddsp;
  if (name == "combined") return EncoderKind::combined;
  throw ConfigError("unknown encoder kind: " + name);
}

const char* encoder_kind_name(EncoderKind k) {
  switch (k) {
    case EncoderKind::spectrogram: return "spectrogram";
    case EncoderKind::ddsp: return "ddsp";
    case EncoderKind::combined: return "combined";
  }
  return "?";
}

TaskSet TaskSet::from_string(const std::string& letters) {
  TaskSet t;
  t.semantic = t.depth = t.motion = t.s3r = false;
  for (char c : letters) {
    switch (c) {
      case 'S': t.semantic = true; break;
      case 'D': t.depth = true; break;
      case 'M': t.motion = true; break;
      case 'R': t.s3r = true; break;
      default:
        throw ConfigError(std::string("unknown task letter: ") + c);
    }
  }
  if (!t.semantic && !t.depth && !t.motion && !t.s3r)
    throw ConfigError("task set is empty");
  return t;
}

std::string TaskSet::to_string() const {
  std::string s;
  if (semantic) s += 'S';
  if (depth) s += 'D';
  if (motion) s += 'M';
  if (s3r) s += 'R';
  return s;
}

int ModelConfig::feat_h() const {
  nn::Conv2dGeom g{4, 4, 2, 2, 1, 1, 1, 1};
  int h = spec_bins();
  for (std::size_t i = 0; i < conv_plan.size(); ++i) h = g.out_dim(h, true);
  return h;
}

int ModelConfig::feat_w() const {
  nn::Conv2dGeom g{4, 4, 2, 2, 1, 1, 1, 1};
  int w = spec_frames();
  for (std::size_t i = 0; i < conv_plan.size(); ++i) w = g.out_dim(w, false);
  return w;
}

double ModelConfig::depth_to_norm(double meters) const {
  const double d = std::clamp(meters, depth_min, depth_max);
  return (d - depth_min) / (depth_max - depth_min);
}

double ModelConfig::norm_to_depth(double norm) const {
  const double n = std::clamp(norm, 0.0, 1.0);
  return depth_min + n * (depth_max - depth_min);
}

namespace {

std::string join_ints(const std::vector<int>& v) {
  std::ostringstream os;
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
  return os.str();
}

void validate(const ModelConfig& c) {
  if (c.input_channels.empty())
    throw ConfigError("model: input channel set is empty");
  for (int id : c.input_channels) {
    if (id < 1 || id > 8)
      throw ConfigError("model: channel ids must be in 1..8");
  }
  if (c.output_pairs < 1 || c.output_pairs > 3)
    throw ConfigError("model: output_pairs must be in 1..3");
  if (c.conv_plan.size() != 4) throw ConfigError("model: conv_plan needs 4 widths");
  if (c.s3r_plan.size() != 5) throw ConfigError("model: s3r_plan needs 5 widths");
  if (c.num_classes < 2) throw ConfigError("model: num_classes must be >= 2");
  if (c.clip_samples < c.stft.window_size)
    throw ConfigError("model: clip shorter than one analysis window");
  if (c.feat_h() < 1 || c.feat_w() < 1)
    throw ConfigError("model: encoder collapses the spectrogram to nothing");
}

}  // namespace

ModelConfig ModelConfig::from_config(const io::Config& cfg) {
  ModelConfig c;
  c.encoder = encoder_kind_from(cfg.get_or("encoder", "spectrogram"));
  c.tasks = TaskSet::from_string(cfg.get_or("tasks", "S"));
  c.input_channels = cfg.get_int_list_or("channels", c.input_channels);
  c.output_pairs = static_cast<int>(cfg.get_int_or("pairs", c.output_pairs));
  c.conv_plan = cfg.get_int_list_or("conv_plan", c.conv_plan);
  c.aspp_filters = static_cast<int>(cfg.get_int_or("aspp_filters", c.aspp_filters));
  c.decoder_hidden =
      static_cast<int>(cfg.get_int_or("decoder_hidden", c.decoder_hidden));
  c.s3r_plan = cfg.get_int_list_or("s3r_plan", c.s3r_plan);
  c.stft.window_size =
      static_cast<int>(cfg.get_int_or("window_size", c.stft.window_size));
  c.stft.hop_length =
      static_cast<int>(cfg.get_int_or("hop_length", c.stft.hop_length));
  c.sample_rate = static_cast<int>(cfg.get_int_or("sample_rate", c.sample_rate));
  c.clip_samples = static_cast<int>(cfg.get_int_or("clip_samples", c.clip_samples));
  c.out_h = static_cast<int>(cfg.get_int_or("out_h", c.out_h));
  c.out_w = static_cast<int>(cfg.get_int_or("out_w", c.out_w));
  c.num_classes = static_cast<int>(cfg.get_int_or("num_classes", c.num_classes));
  c.mfcc_mels = static_cast<int>(cfg.get_int_or("mfcc_mels", c.mfcc_mels));
  c.mfcc_coeffs = static_cast<int>(cfg.get_int_or("mfcc_coeffs", c.mfcc_coeffs));
  c.gru_hidden = static_cast<int>(cfg.get_int_or("gru_hidden", c.gru_hidden));
  c.z_dim = static_cast<int>(cfg.get_int_or("z_dim", c.z_dim));
  c.mlp_hidden = static_cast<int>(cfg.get_int_or("mlp_hidden", c.mlp_hidden));
  c.ddsp_channels =
      static_cast<int>(cfg.get_int_or("ddsp_channels", c.ddsp_channels));
  c.f0_min = cfg.get_double_or("f0_min", c.f0_min);
  c.f0_max = cfg.get_double_or("f0_max", c.f0_max);
  c.depth_min = cfg.get_double_or("depth_min", c.depth_min);
  c.depth_max = cfg.get_double_or("depth_max", c.depth_max);
  c.init_seed = static_cast<std::uint32_t>(cfg.get_int_or("init_seed", c.init_seed));
  validate(c);
  return c;
}

io::Config ModelConfig::to_config() const {
  io::Config cfg;
  cfg.set("encoder", encoder_kind_name(encoder));
  cfg.set("tasks", tasks.to_string());
  cfg.set("channels", join_ints(input_channels));
  cfg.set("pairs", std::to_string(output_pairs));
  cfg.set("conv_plan", join_ints(conv_plan));
  cfg.set("aspp_filters", std::to_string(aspp_filters));
  cfg.set("decoder_hidden", std::to_string(decoder_hidden));
  cfg.set("s3r_plan", join_ints(s3r_plan));
  cfg.set("window_size", std::to_string(stft.window_size));
  cfg.set("hop_length", std::to_string(stft.hop_length));
  cfg.set("sample_rate", std::to_string(sample_rate));
  cfg.set("clip_samples", std::to_string(clip_samples));
  cfg.set("out_h", std::to_string(out_h));
  cfg.set("out_w", std::to_string(out_w));
  cfg.set("num_classes", std::to_string(num_classes));
  cfg.set("mfcc_mels", std::to_string(mfcc_mels));
  cfg.set("mfcc_coeffs", std::to_string(mfcc_coeffs));
  cfg.set("gru_hidden", std::to_string(gru_hidden));
  cfg.set("z_dim", std::to_string(z_dim));
  cfg.set("mlp_hidden", std::to_string(mlp_hidden));
  cfg.set("ddsp_channels", std::to_string(ddsp_channels));
  cfg.set("f0_min", std::to_string(f0_min));
  cfg.set("f0_max", std::to_string(f0_max));
  cfg.set("depth_min", std::to_string(depth_min));
  cfg.set("depth_max", std::to_string(depth_max));
  cfg.set("init_seed", std::to_string(init_seed));
  return cfg;
}

template <typename T>
SoundNet<T>::SoundNet(const ModelConfig& cfg) : cfg_(cfg) {
  validate(cfg_);
  std::mt19937 rng(cfg_.init_seed);
  const bool use_spec = cfg_.encoder != EncoderKind::ddsp;
  const bool use_ddsp = cfg_.encoder != EncoderKind::spectrogram;
  const int n_ch = static_cast<int>(cfg_.input_channels.size());

  if (use_spec) {
    int in = 1;
    for (std::size_t i = 0; i < cfg_.conv_plan.size(); ++i) {
      enc_conv_.emplace_back(in, cfg_.conv_plan[i], 4, 4, 2, 1, 1, rng);
      enc_bn_.emplace_back(cfg_.conv_plan[i]);
      in = cfg_.conv_plan[i];
    }
  }
  if (use_ddsp) {
    gru_ = nn::GruLayer<T>(cfg_.mfcc_coeffs, cfg_.gru_hidden, rng);
    z_linear_ = nn::LinearLayer<T>(cfg_.gru_hidden, cfg_.z_dim, rng);
    const int frames = cfg_.spec_frames();
    const int mlp_in = frames * (2 + cfg_.z_dim);
    const int mlp_out = cfg_.ddsp_channels * cfg_.feat_h() * cfg_.feat_w();
    mlp_.emplace_back(mlp_in, cfg_.mlp_hidden, rng);
    mlp_.emplace_back(cfg_.mlp_hidden, cfg_.mlp_hidden, rng);
    mlp_.emplace_back(cfg_.mlp_hidden, mlp_out, rng);
  }

  int aspp_in = 0;
  if (use_spec) aspp_in += cfg_.conv_plan.back() * n_ch;
  if (use_ddsp) aspp_in += cfg_.ddsp_channels * n_ch;
  const int f = cfg_.aspp_filters;
  aspp_conv_.emplace_back(aspp_in, f, 1, 1, 1, 0, 1, rng);
  aspp_conv_.emplace_back(aspp_in, f, 3, 3, 1, 6, 6, rng);
  aspp_conv_.emplace_back(aspp_in, f, 3, 3, 1, 12, 12, rng);
  aspp_conv_.emplace_back(aspp_in, f, 3, 3, 1, 18, 18, rng);
  for (int i = 0; i < 4; ++i) aspp_bn_.emplace_back(f);
  aspp_fuse_ = nn::Conv2dLayer<T>(4 * f, f, 1, 1, 1, 0, 1, rng);
  aspp_fuse_bn_ = nn::BatchNorm2dLayer<T>(f);

  const int head_out[3] = {cfg_.num_classes, 1, 2};
  const bool head_on[3] = {cfg_.tasks.semantic, cfg_.tasks.depth,
                           cfg_.tasks.motion};
  for (int i = 0; i < 3; ++i) {
    if (!head_on[i]) continue;
    heads_[i].present = true;
    heads_[i].c1 = nn::Conv2dLayer<T>(f, cfg_.decoder_hidden, 1, 1, 1, 0, 1, rng);
    heads_[i].bn1 = nn::BatchNorm2dLayer<T>(cfg_.decoder_hidden);
    heads_[i].c2 = nn::Conv2dLayer<T>(cfg_.decoder_hidden, cfg_.decoder_hidden,
                                      1, 1, 1, 0, 1, rng);
    heads_[i].bn2 = nn::BatchNorm2dLayer<T>(cfg_.decoder_hidden);
    heads_[i].c3 = nn::Conv2dLayer<T>(cfg_.decoder_hidden, head_out[i], 1, 1,
                                      1, 0, 1, rng);
  }

  if (cfg_.tasks.s3r) {
    has_s3r_ = true;
    int in = f;
    for (int width : cfg_.s3r_plan) {
      s3r_up_.emplace_back(in, width, 4, 4, 2, 1, rng);
      s3r_bn_.emplace_back(width);
      in = width;
    }
    s3r_out_ = nn::Conv2dLayer<T>(in, 4 * cfg_.output_pairs, 1, 1, 1, 0, 1, rng);
  }

  // registration order defines the checkpoint layout
  if (use_spec) {
    for (std::size_t i = 0; i < enc_conv_.size(); ++i) {
      enc_conv_[i].collect(params_, "enc.conv" + std::to_string(i));
      enc_bn_[i].collect(params_, "enc.bn" + std::to_string(i));
    }
  }
  if (use_ddsp) {
    gru_.collect(params_, "ddsp.gru");
    z_linear_.collect(params_, "ddsp.z");
    for (std::size_t i = 0; i < mlp_.size(); ++i)
      mlp_[i].collect(params_, "ddsp.mlp" + std::to_string(i));
  }
  for (int i = 0; i < 4; ++i) {
    aspp_conv_[i].collect(params_, "aspp.branch" + std::to_string(i));
    aspp_bn_[i].collect(params_, "aspp.bn" + std::to_string(i));
  }
  aspp_fuse_.collect(params_, "aspp.fuse");
  aspp_fuse_bn_.collect(params_, "aspp.fuse_bn");
  static const char* head_names[3] = {"semantic", "depth", "motion"};
  for (int i = 0; i < 3; ++i) {
    if (!heads_[i].present) continue;
    const std::string p = std::string("head.") + head_names[i];
    heads_[i].c1.collect(params_, p + ".c1");
    heads_[i].bn1.collect(params_, p + ".bn1");
    heads_[i].c2.collect(params_, p + ".c2");
    heads_[i].bn2.collect(params_, p + ".bn2");
    heads_[i].c3.collect(params_, p + ".c3");
  }
  if (has_s3r_) {
    for (std::size_t i = 0; i < s3r_up_.size(); ++i) {
      s3r_up_[i].collect(params_, "s3r.up" + std::to_string(i));
      s3r_bn_[i].collect(params_, "s3r.bn" + std::to_string(i));
    }
    s3r_out_.collect(params_, "s3r.out");
  }
}

template <typename T>
nn::Tensor<T> SoundNet<T>::spectrogram_branch(const BatchInput<T>& input,
                                              bool training) {
  if (input.specs.size() != cfg_.input_channels.size())
    throw ConfigError("forward: expected " +
                      std::to_string(cfg_.input_channels.size()) +
                      " spectrogram channels, got " +
                      std::to_string(input.specs.size()));
  std::vector<nn::Tensor<T>> feats;
  for (const auto& spec : input.specs) {
    if (spec.rank() != 4 || spec.dim(1) != 1 ||
        spec.dim(2) != cfg_.spec_bins() || spec.dim(3) != cfg_.spec_frames())
      throw ConfigError("forward: spectrogram shape mismatch " +
                        nn::shape_str(spec.shape()));
    nn::Tensor<T> h = spec;
    for (std::size_t i = 0; i < enc_conv_.size(); ++i)
      h = nn::relu(enc_bn_[i].forward(enc_conv_[i].forward(h), training));
    feats.push_back(h);
  }
  return feats.size() == 1 ? feats[0] : nn::concat(feats, 1);
}

template <typename T>
nn::Tensor<T> SoundNet<T>::ddsp_branch(const BatchInput<T>& input,
                                       bool training) {
  (void)training;
  const std::size_t n_ch = cfg_.input_channels.size();
  if (input.f0.size() != n_ch || input.loudness.size() != n_ch ||
      input.mfcc.size() != n_ch)
    throw ConfigError("forward: signal-descriptor inputs missing");
  const int frames = cfg_.spec_frames();

  std::vector<nn::Tensor<T>> feats;
  for (std::size_t c = 0; c < n_ch; ++c) {
    const auto& f0 = input.f0[c];
    const auto& loud = input.loudness[c];
    const auto& mf = input.mfcc[c];
    if (f0.rank() != 2 || f0.dim(1) != frames)
      throw ConfigError("forward: f0 must be (N, frames)");
    if (loud.shape() != f0.shape())
      throw ConfigError("forward: loudness/f0 frame count mismatch");
    if (mf.rank() != 3 || mf.dim(0) != f0.dim(0) || mf.dim(1) != frames ||
        mf.dim(2) != cfg_.mfcc_coeffs)
      throw ConfigError("forward: mfcc must be (N, frames, coeffs)");
    const int batch = f0.dim(0);

    // latent path: mfcc -> GRU over time -> per-frame linear
    auto seq = nn::swap01(mf);  // (T, N, C)
    auto h0 = nn::Tensor<T>::zeros({batch, cfg_.gru_hidden});
    auto [gru_out, gru_last] = gru_.forward(seq, h0);
    auto z = z_linear_.forward(
        nn::reshape(gru_out, {frames * batch, cfg_.gru_hidden}));

    // per-frame (f, l, z) rows in time-major order
    auto f0_rows = nn::reshape(nn::swap01(nn::reshape(f0, {batch, frames, 1})),
                               {frames * batch, 1});
    auto loud_rows = nn::reshape(
        nn::swap01(nn::reshape(loud, {batch, frames, 1})), {frames * batch, 1});
    std::vector<nn::Tensor<T>> parts{f0_rows, loud_rows, z};
    auto rows = nn::concat(parts, 1);  // (T*N, 2+z)

    // back to sample-major, flatten the clip, run the MLP
    auto per_sample = nn::reshape(
        nn::swap01(nn::reshape(rows, {frames, batch, 2 + cfg_.z_dim})),
        {batch, frames * (2 + cfg_.z_dim)});
    auto hidden = nn::relu(mlp_[0].forward(per_sample));
    hidden = nn::relu(mlp_[1].forward(hidden));
    auto latent = mlp_[2].forward(hidden);
    feats.push_back(nn::reshape(
        latent, {batch, cfg_.ddsp_channels, cfg_.feat_h(), cfg_.feat_w()}));
  }
  return feats.size() == 1 ? feats[0] : nn::concat(feats, 1);
}

template <typename T>
nn::Tensor<T> SoundNet<T>::aspp(const nn::Tensor<T>& x, bool training) {
  std::vector<nn::Tensor<T>> branches;
  for (int i = 0; i < 4; ++i) {
    branches.push_back(
        nn::relu(aspp_bn_[i].forward(aspp_conv_[i].forward(x), training)));
  }
  auto cat = nn::concat(branches, 1);
  return nn::relu(aspp_fuse_bn_.forward(aspp_fuse_.forward(cat), training));
}

template <typename T>
nn::Tensor<T> SoundNet<T>::encode(const BatchInput<T>& input, bool training) {
  nn::Tensor<T> feat;
  switch (cfg_.encoder) {
    case EncoderKind::spectrogram:
      feat = spectrogram_branch(input, training);
      break;
    case EncoderKind::ddsp:
      feat = ddsp_branch(input, training);
      break;
    case EncoderKind::combined: {
      std::vector<nn::Tensor<T>> both{spectrogram_branch(input, training),
                                      ddsp_branch(input, training)};
      feat = nn::concat(both, 1);
      break;
    }
  }
  return aspp(feat, training);
}

template <typename T>
nn::Tensor<T> SoundNet<T>::dense_head(int which, const nn::Tensor<T>& feat,
                                      bool training) {
  auto& head = heads_[which];
  auto up = nn::bilinear_resize(feat, cfg_.out_h, cfg_.out_w);
  auto h = nn::relu(head.bn1.forward(head.c1.forward(up), training));
  h = nn::relu(head.bn2.forward(head.c2.forward(h), training));
  return head.c3.forward(h);
}

template <typename T>
Prediction<T> SoundNet<T>::forward(const BatchInput<T>& input,
                                   const TaskSet& tasks, bool training) {
  if ((tasks.semantic && !heads_[0].present) ||
      (tasks.depth && !heads_[1].present) ||
      (tasks.motion && !heads_[2].present) || (tasks.s3r && !has_s3r_))
    throw ConfigError("forward: requested task the model was not built with");

  auto feat = encode(input, training);
  Prediction<T> out;
  if (tasks.semantic)
    out.semantic = nn::softmax(dense_head(0, feat, training), 1);
  if (tasks.depth) out.depth = dense_head(1, feat, training);
  if (tasks.motion) out.flow = dense_head(2, feat, training);
  if (tasks.s3r) {
    nn::Tensor<T> h = feat;
    for (std::size_t i = 0; i < s3r_up_.size(); ++i)
      h = nn::relu(s3r_bn_[i].forward(s3r_up_[i].forward(h), training));
    auto raw = nn::sigmoid(s3r_out_.forward(h));
    auto mask = nn::add_scalar(nn::scale(raw, T(2)), T(-1));  // [-1, 1]
    const int bins = cfg_.spec_bins(), frames = cfg_.spec_frames();
    if (mask.dim(2) >= bins && mask.dim(3) >= frames) {
      mask = nn::center_crop(mask, bins, frames);
    } else {
      mask = nn::bilinear_resize(mask, bins, frames);
    }
    out.masks = mask;
  }
  return out;
}

template <typename T>
std::vector<io::NamedTensor> SoundNet<T>::export_state() const {
  std::vector<io::NamedTensor> out;
  for (const auto& [name, tensor] : params_.items) {
    io::NamedTensor nt;
    nt.name = name;
    for (int d : tensor.shape()) nt.dims.push_back(static_cast<std::uint32_t>(d));
    if (nt.dims.empty()) nt.dims.push_back(1);
    nt.data.assign(tensor.data().begin(), tensor.data().end());
    out.push_back(std::move(nt));
  }
  // batch-norm running statistics ride along as plain buffers
  auto add_running = [&out](const std::string& name, const std::vector<T>& v) {
    io::NamedTensor nt;
    nt.name = name;
    nt.dims.push_back(static_cast<std::uint32_t>(v.size()));
    nt.data.assign(v.begin(), v.end());
    out.push_back(std::move(nt));
  };
  const_cast<SoundNet<T>*>(this)->visit_bn(
      [&](const std::string& name, nn::BatchNorm2dLayer<T>& bn) {
        add_running(name + ".running_mean", bn.running_mean());
        add_running(name + ".running_var", bn.running_var());
      });
  return out;
}

template <typename T>
void SoundNet<T>::import_state(const std::vector<io::NamedTensor>& state) {
  auto find = [&state](const std::string& name) -> const io::NamedTensor& {
    for (const auto& nt : state) {
      if (nt.name == name) return nt;
    }
    throw DataError("checkpoint is missing tensor: " + name);
  };
  for (auto& [name, tensor] : params_.items) {
    const auto& nt = find(name);
    if (nt.data.size() != tensor.size())
      throw DataError("checkpoint shape mismatch for " + name);
    for (std::size_t i = 0; i < nt.data.size(); ++i)
      tensor.data()[i] = static_cast<T>(nt.data[i]);
  }
  visit_bn([&](const std::string& name, nn::BatchNorm2dLayer<T>& bn) {
    const auto& rm = find(name + ".running_mean");
    const auto& rv = find(name + ".running_var");
    if (rm.data.size() != bn.running_mean().size() ||
        rv.data.size() != bn.running_var().size())
      throw DataError("checkpoint running-stat mismatch for " + name);
    for (std::size_t i = 0; i < rm.data.size(); ++i) {
      bn.running_mean()[i] = static_cast<T>(rm.data[i]);
      bn.running_var()[i] = static_cast<T>(rv.data[i]);
    }
  });
}

template class SoundNet<float>;
template class SoundNet<double>;

std::vector<ReconstructedPair> s3r_reconstruct(
    const std::vector<float>& masks, int output_pairs,
    const dsp::ComplexSpectrogram& ref_left,
    const dsp::ComplexSpectrogram& ref_right, const dsp::Waveform& wave_left,
    const dsp::Waveform& wave_right) {
  const std::size_t plane = ref_left.bins * ref_left.frames;
  if (ref_right.bins != ref_left.bins || ref_right.frames != ref_left.frames)
    throw ConfigError("s3r_reconstruct: reference spectrogram mismatch");
  if (masks.size() != static_cast<std::size_t>(4 * output_pairs) * plane)
    throw ConfigError("s3r_reconstruct: mask shape mismatch");

  std::vector<ReconstructedPair> out;
  for (int p = 0; p < output_pairs; ++p) {
    ReconstructedPair pair;
    for (int ear = 0; ear < 2; ++ear) {
      const dsp::ComplexSpectrogram& ref = ear == 0 ? ref_left : ref_right;
      const dsp::Waveform& wave = ear == 0 ? wave_left : wave_right;
      const float* m_re = masks.data() + (p * 4 + ear * 2) * plane;
      const float* m_im = m_re + plane;

      dsp::ComplexSpectrogram diff = ref;
      for (std::size_t i = 0; i < plane; ++i) {
        diff.data[i] = std::complex<double>(m_re[i], m_im[i]) * ref.data[i];
      }
      const dsp::Waveform diff_wave = dsp::istft(diff);
      dsp::Waveform target = wave;
      for (std::size_t i = 0; i < target.samples.size(); ++i) {
        const double d =
            i < diff_wave.samples.size() ? diff_wave.samples[i] : 0.0;
        target.samples[i] = wave.samples[i] - d;
      }
      (ear == 0 ? pair.left : pair.right) = std::move(target);
    }
    out.push_back(std::move(pair));
  }
  return out;
}

}  // namespace binsight::model
