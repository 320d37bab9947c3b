#include "binsight/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <ostream>
#include <random>
#include <sstream>

#include "binsight/error.hpp"

namespace binsight::train {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

std::vector<std::string> split_ids(const std::vector<sim::ManifestRow>& rows,
                                   const std::string& split) {
  std::vector<std::string> ids;
  for (const auto& r : rows) {
    if (r.split == split) ids.push_back(r.id);
  }
  if (ids.empty())
    throw DataError("manifest has no samples in split '" + split + "'");
  return ids;
}

}  // namespace

RunConfig RunConfig::from_config(const io::Config& cfg) {
  RunConfig r;
  r.dataset_dir = cfg.get("dataset");
  r.model = model::ModelConfig::from_config(cfg);
  r.weights.lambda1 = cfg.get_double_or("lambda1", r.weights.lambda1);
  r.weights.lambda2 = cfg.get_double_or("lambda2", r.weights.lambda2);
  r.weights.lambda3 = cfg.get_double_or("lambda3", r.weights.lambda3);
  r.weights.alpha_spec = cfg.get_double_or("alpha_spec", r.weights.alpha_spec);
  r.weights.fft_sizes = cfg.get_int_list_or("fft_sizes", r.weights.fft_sizes);
  r.lr = cfg.get_double_or("lr", r.lr);
  r.epochs = static_cast<int>(cfg.get_int_or("epochs", r.epochs));
  r.batch_size = static_cast<int>(cfg.get_int_or("batch_size", r.batch_size));
  r.seed = static_cast<std::uint32_t>(cfg.get_int_or("seed", r.seed));
  r.amp_multiplier = cfg.get_double_or("amp", r.amp_multiplier);
  if (r.epochs <= 0 || r.batch_size <= 0)
    throw ConfigError("train: epochs and batch_size must be positive");
  return r;
}

io::Config RunConfig::to_config() const {
  io::Config cfg = model.to_config();
  cfg.set("dataset", dataset_dir.string());
  cfg.set("lambda1", std::to_string(weights.lambda1));
  cfg.set("lambda2", std::to_string(weights.lambda2));
  cfg.set("lambda3", std::to_string(weights.lambda3));
  cfg.set("alpha_spec", std::to_string(weights.alpha_spec));
  std::ostringstream sizes;
  for (std::size_t i = 0; i < weights.fft_sizes.size(); ++i)
    sizes << (i ? "," : "") << weights.fft_sizes[i];
  cfg.set("fft_sizes", sizes.str());
  cfg.set("lr", std::to_string(lr));
  cfg.set("epochs", std::to_string(epochs));
  cfg.set("batch_size", std::to_string(batch_size));
  cfg.set("seed", std::to_string(seed));
  return cfg;
}

LossGraph build_loss(model::SoundNet<float>& net, const DataPipeline& pipe,
                     const std::vector<SampleData>& batch,
                     const metrics::LossWeights& weights, bool training) {
  const auto& cfg = net.config();
  auto input = pipe.make_input(batch);
  auto pred = net.forward(input, training);

  LossGraph out;
  nn::Tensor<float> sem, dep, mot, s3r;
  if (cfg.tasks.semantic) {
    sem = nn::cross_entropy_mean(pred.semantic, pipe.stack_labels(batch));
    out.values.semantic = sem.item();
  }
  if (cfg.tasks.depth) {
    dep = nn::mse(pred.depth, pipe.stack_depth(batch));
    out.values.depth = dep.item();
  }
  if (cfg.tasks.motion) {
    mot = nn::mse(pred.flow, pipe.stack_flow(batch));
    out.values.motion = mot.item();
  }
  if (cfg.tasks.s3r) {
    const int pairs = cfg.output_pairs;
    nn::Tensor<float> acc = nn::Tensor<float>::scalar(0.0f);
    const float norm = 1.0f / static_cast<float>(2 * pairs);
    for (int p = 0; p < pairs; ++p) {
      for (int ear = 0; ear < 2; ++ear) {
        auto mask = nn::slice(pred.masks, 1, p * 4 + ear * 2, 2);
        auto diff_pred = nn::cmul_planar(mask, input.ref_spec[ear]);
        if (cfg.encoder == model::EncoderKind::spectrogram) {
          // L2 against the ground-truth difference spectrogram
          auto target = pipe.stack_diff_spec(batch, p, ear);
          acc = nn::add(acc, nn::scale(nn::mse(diff_pred, target), norm));
        } else {
          // reconstruct the waveform and compare spectral magnitudes
          auto diff_wave = nn::istft_op(diff_pred, cfg.stft);
          const int len = diff_wave.dim(1);
          auto ref_wave = pipe.stack_ref_wave(batch, ear, len);
          auto pred_wave = nn::sub(ref_wave, diff_wave);
          auto gt_wave = pipe.stack_target_wave(batch, p, ear, len);
          acc = nn::add(acc,
                        nn::scale(metrics::multiscale_spectral_loss(
                                      pred_wave, gt_wave, weights),
                                  norm));
        }
      }
    }
    s3r = acc;
    out.values.s3r = s3r.item();
  }
  out.total = metrics::total_loss(sem, dep, mot, s3r, weights);
  out.values.total = out.total.item();
  return out;
}

void save_checkpoint(const std::filesystem::path& path, const RunConfig& cfg,
                     const DatasetStats& stats, model::SoundNet<float>& net,
                     nn::Adam<float>& opt, int epochs_done) {
  io::Config meta = cfg.to_config();
  stats.to_config(meta);
  meta.set("epochs_done", std::to_string(epochs_done));

  auto tensors = net.export_state();
  auto& m = opt.moments1();
  auto& v = opt.moments2();
  for (std::size_t i = 0; i < m.size(); ++i) {
    io::NamedTensor nt;
    nt.name = "opt.m." + std::to_string(i);
    nt.dims = {static_cast<std::uint32_t>(m[i].size())};
    nt.data = m[i];
    tensors.push_back(std::move(nt));
    io::NamedTensor nv;
    nv.name = "opt.v." + std::to_string(i);
    nv.dims = {static_cast<std::uint32_t>(v[i].size())};
    nv.data = v[i];
    tensors.push_back(std::move(nv));
  }
  io::NamedTensor step;
  step.name = "opt.step";
  step.dims = {1};
  step.data = {static_cast<float>(opt.step_count())};
  tensors.push_back(std::move(step));

  io::write_bsnc(path, meta.to_string(), tensors);
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  LoadedCheckpoint out;
  std::string cfg_text;
  std::vector<io::NamedTensor> tensors;
  io::read_bsnc(path, cfg_text, tensors);
  const auto cfg = io::Config::from_string(cfg_text);
  out.cfg = RunConfig::from_config(cfg);
  out.stats = DatasetStats::from_config(cfg);
  out.epochs_done = static_cast<int>(cfg.get_int_or("epochs_done", 0));
  out.net = std::make_unique<model::SoundNet<float>>(out.cfg.model);
  out.net->import_state(tensors);
  out.opt_state = std::move(tensors);
  return out;
}

namespace {

void restore_optimizer(nn::Adam<float>& opt, nn::ParamSet<float>& params,
                       const std::vector<io::NamedTensor>& state) {
  auto find = [&state](const std::string& name) -> const io::NamedTensor* {
    for (const auto& nt : state)
      if (nt.name == name) return &nt;
    return nullptr;
  };
  const io::NamedTensor* step = find("opt.step");
  if (!step) return;  // checkpoint without optimizer state
  auto& m = opt.moments1();
  auto& v = opt.moments2();
  m.resize(params.items.size());
  v.resize(params.items.size());
  for (std::size_t i = 0; i < params.items.size(); ++i) {
    const io::NamedTensor* mi = find("opt.m." + std::to_string(i));
    const io::NamedTensor* vi = find("opt.v." + std::to_string(i));
    if (!mi || !vi || mi->data.size() != params.items[i].second.size())
      throw DataError("checkpoint optimizer state does not match model");
    m[i] = mi->data;
    v[i] = vi->data;
  }
  opt.set_step_count(static_cast<long>(step->data[0]));
}

}  // namespace

std::filesystem::path run_training(const RunConfig& cfg,
                                   const std::filesystem::path& out_dir,
                                   std::ostream& log,
                                   const std::filesystem::path& resume) {
  std::filesystem::create_directories(out_dir);
  const auto manifest =
      sim::read_manifest(cfg.dataset_dir / "manifest.txt");
  const auto train_ids = split_ids(manifest, "train");
  const auto val_ids = split_ids(manifest, "val");

  DatasetStats stats;
  std::unique_ptr<model::SoundNet<float>> net;
  nn::Adam<float>::Settings adam_cfg;
  adam_cfg.lr = static_cast<float>(cfg.lr);
  nn::Adam<float> opt(adam_cfg);
  int first_epoch = 0;

  if (!resume.empty()) {
    auto loaded = load_checkpoint(resume);
    stats = loaded.stats;
    net = std::move(loaded.net);
    restore_optimizer(opt, net->params(), loaded.opt_state);
    first_epoch = loaded.epochs_done;
  } else {
    stats = compute_dataset_stats(cfg.dataset_dir, manifest, cfg.model);
    net = std::make_unique<model::SoundNet<float>>(cfg.model);
  }

  DataPipeline pipe(cfg.dataset_dir, cfg.model, stats, cfg.amp_multiplier);
  const bool want_s3r = cfg.model.tasks.s3r;

  double best_val = std::numeric_limits<double>::infinity();
  const auto best_path = out_dir / "checkpoint_best.bsnc";
  const auto last_path = out_dir / "checkpoint_last.bsnc";

  long step_id = 0;
  for (int epoch = first_epoch; epoch < cfg.epochs; ++epoch) {
    // seeded per-epoch permutation; fixed order within a batch
    std::vector<std::size_t> order(train_ids.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::mt19937 shuffle_rng(cfg.seed ^ (0x85ebca6bu * (epoch + 1)));
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[shuffle_rng() % i]);

    TaskLosses epoch_acc;
    std::size_t batches = 0;
    for (std::size_t pos = 0; pos < order.size();
         pos += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t hi =
          std::min(order.size(), pos + static_cast<std::size_t>(cfg.batch_size));
      std::vector<SampleData> batch;
      std::string batch_ids;
      for (std::size_t i = pos; i < hi; ++i) {
        batch.push_back(pipe.load(train_ids[order[i]], want_s3r));
        batch_ids += (batch_ids.empty() ? "" : ",") + train_ids[order[i]];
      }
      net->params().zero_grad();
      auto loss = build_loss(*net, pipe, batch, cfg.weights, true);
      if (!std::isfinite(loss.values.total)) {
        throw NumericError("training diverged (non-finite loss) at step " +
                           std::to_string(step_id) + ", batch [" + batch_ids +
                           "]");
      }
      loss.total.backward();
      opt.step(net->params());
      ++step_id;

      epoch_acc.semantic += loss.values.semantic;
      epoch_acc.depth += loss.values.depth;
      epoch_acc.motion += loss.values.motion;
      epoch_acc.s3r += loss.values.s3r;
      epoch_acc.total += loss.values.total;
      ++batches;
    }

    // validation loss with frozen statistics
    TaskLosses val_acc;
    std::size_t val_batches = 0;
    for (std::size_t pos = 0; pos < val_ids.size();
         pos += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t hi =
          std::min(val_ids.size(), pos + static_cast<std::size_t>(cfg.batch_size));
      std::vector<SampleData> batch;
      for (std::size_t i = pos; i < hi; ++i)
        batch.push_back(pipe.load(val_ids[i], want_s3r));
      auto loss = build_loss(*net, pipe, batch, cfg.weights, false);
      val_acc.total += loss.values.total;
      ++val_batches;
    }
    const double val_total = val_acc.total / static_cast<double>(val_batches);

    log << "epoch " << (epoch + 1) << " steps " << step_id
        << " train_total " << fmt(epoch_acc.total / batches)
        << " semantic " << fmt(epoch_acc.semantic / batches)
        << " depth " << fmt(epoch_acc.depth / batches)
        << " motion " << fmt(epoch_acc.motion / batches)
        << " s3r " << fmt(epoch_acc.s3r / batches)
        << " val_total " << fmt(val_total) << "\n";
    log.flush();

    save_checkpoint(last_path, cfg, stats, *net, opt, epoch + 1);
    if (val_total < best_val) {
      best_val = val_total;
      save_checkpoint(best_path, cfg, stats, *net, opt, epoch + 1);
    }
  }
  return std::filesystem::exists(best_path) ? best_path : last_path;
}

std::string EvalReport::to_text() const {
  io::Config cfg;
  cfg.set("samples", std::to_string(samples));
  auto classname = [](int cls) {
    switch (cls) {
      case 1: return "car";
      case 2: return "tram";
      case 3: return "motorcycle";
      default: return "other";
    }
  };
  for (const auto& [cls, iou_opt] : iou.per_class) {
    cfg.set(std::string("iou.") + classname(cls),
            iou_opt ? fmt(*iou_opt) : "undefined");
  }
  cfg.set("miou", fmt(iou.mean));
  cfg.set("depth.abs_rel", fmt(depth.abs_rel));
  cfg.set("depth.sq_rel", fmt(depth.sq_rel));
  cfg.set("depth.rmse", fmt(depth.rmse));
  cfg.set("depth.mse", fmt(depth.mse));
  cfg.set("flow.epe", fmt(epe));
  cfg.set("s3r.mse1", fmt(s3r.mse[0]));
  cfg.set("s3r.env1", fmt(s3r.env[0]));
  cfg.set("s3r.mse2", fmt(s3r.mse[1]));
  cfg.set("s3r.env2", fmt(s3r.env[1]));
  return cfg.to_string();
}

EvalReport evaluate(model::SoundNet<float>& net, const DataPipeline& pipe,
                    const std::vector<sim::ManifestRow>& manifest,
                    const std::string& split) {
  const auto& cfg = net.config();
  const auto ids = split_ids(manifest, split);
  const std::size_t pixels =
      static_cast<std::size_t>(cfg.out_h) * cfg.out_w;
  const std::size_t plane =
      static_cast<std::size_t>(cfg.spec_bins()) * cfg.spec_frames();

  // pooled accumulators
  std::map<int, std::array<std::size_t, 2>> iou_acc;  // class -> {inter, union}
  for (int cls = 1; cls < cfg.num_classes; ++cls) iou_acc[cls] = {0, 0};
  double abs_rel = 0.0, sq_rel = 0.0, sq = 0.0;
  std::size_t depth_n = 0;
  double epe_acc = 0.0;
  std::size_t epe_n = 0;
  double mse_acc[2] = {0, 0}, env_acc[2] = {0, 0};
  std::size_t s3r_n = 0;

  std::ostringstream tsv;
  tsv << "id\tmiou\tabs_rel\trmse\tepe\ts3r_mse1\ts3r_env1\n";

  EvalReport report;
  for (const auto& id : ids) {
    const auto sample = pipe.load(id, cfg.tasks.s3r);
    std::vector<SampleData> batch{sample};
    auto input = pipe.make_input(batch);
    auto pred = net.forward(input, false);

    double row_miou = 0.0, row_absrel = 0.0, row_rmse = 0.0, row_epe = 0.0;
    double row_mse1 = 0.0, row_env1 = 0.0;

    if (cfg.tasks.semantic) {
      std::vector<int> hard(pixels);
      for (std::size_t px = 0; px < pixels; ++px) {
        int best = 0;
        float best_p = pred.semantic.data()[px];
        for (int c = 1; c < cfg.num_classes; ++c) {
          const float p = pred.semantic.data()[c * pixels + px];
          if (p > best_p) {
            best_p = p;
            best = c;
          }
        }
        hard[px] = best;
      }
      std::set<int> fg;
      for (int c = 1; c < cfg.num_classes; ++c) fg.insert(c);
      const auto sample_iou = metrics::miou(hard, sample.labels, fg);
      row_miou = sample_iou.mean;
      for (int cls = 1; cls < cfg.num_classes; ++cls) {
        std::size_t inter = 0, uni = 0;
        for (std::size_t px = 0; px < pixels; ++px) {
          const bool p = hard[px] == cls;
          const bool g = sample.labels[px] == cls;
          inter += p && g;
          uni += p || g;
        }
        iou_acc[cls][0] += inter;
        iou_acc[cls][1] += uni;
      }
    }
    if (cfg.tasks.depth) {
      for (std::size_t px = 0; px < pixels; ++px) {
        const double gt = sample.depth_meters[px];
        if (!(gt > 0)) continue;
        const double pm = cfg.norm_to_depth(pred.depth.data()[px]);
        const double d = pm - gt;
        abs_rel += std::abs(d) / gt;
        sq_rel += d * d / gt;
        sq += d * d;
        ++depth_n;
        row_absrel += std::abs(d) / gt;
        row_rmse += d * d;
      }
      row_absrel /= pixels;
      row_rmse = std::sqrt(row_rmse / pixels);
    }
    if (cfg.tasks.motion) {
      for (std::size_t px = 0; px < pixels; ++px) {
        const double dx = pred.flow.data()[px] - sample.flow[px];
        const double dy =
            pred.flow.data()[pixels + px] - sample.flow[pixels + px];
        epe_acc += std::sqrt(dx * dx + dy * dy);
        row_epe += std::sqrt(dx * dx + dy * dy);
        ++epe_n;
      }
      row_epe /= pixels;
    }
    if (cfg.tasks.s3r) {
      // rebuild reference spectrograms/waves in double for reconstruction
      dsp::ComplexSpectrogram ref[2];
      dsp::Waveform wav[2];
      for (int ear = 0; ear < 2; ++ear) {
        ref[ear].bins = cfg.spec_bins();
        ref[ear].frames = cfg.spec_frames();
        ref[ear].params = cfg.stft;
        ref[ear].sample_rate = cfg.sample_rate;
        ref[ear].data.resize(plane);
        for (std::size_t i = 0; i < plane; ++i)
          ref[ear].data[i] = {sample.ref_spec[ear][i],
                              sample.ref_spec[ear][plane + i]};
        wav[ear].sample_rate = cfg.sample_rate;
        wav[ear].samples.assign(sample.ref_wave[ear].begin(),
                                sample.ref_wave[ear].end());
      }
      std::vector<float> masks(pred.masks.data().begin(),
                               pred.masks.data().end());
      const auto recon = model::s3r_reconstruct(masks, cfg.output_pairs,
                                                ref[0], ref[1], wav[0], wav[1]);
      dsp::Waveform gt_l = wav[0], gt_r = wav[1];
      gt_l.samples.assign(sample.target_wave[0][0].begin(),
                          sample.target_wave[0][0].end());
      gt_r.samples.assign(sample.target_wave[0][1].begin(),
                          sample.target_wave[0][1].end());
      const auto rep = metrics::s3r_metrics(recon[0].left, recon[0].right,
                                            gt_l, gt_r, cfg.stft);
      mse_acc[0] += rep.mse[0];
      mse_acc[1] += rep.mse[1];
      env_acc[0] += rep.env[0];
      env_acc[1] += rep.env[1];
      ++s3r_n;
      row_mse1 = rep.mse[0];
      row_env1 = rep.env[0];
    }

    tsv << id << '\t' << fmt(row_miou) << '\t' << fmt(row_absrel) << '\t'
        << fmt(row_rmse) << '\t' << fmt(row_epe) << '\t' << fmt(row_mse1)
        << '\t' << fmt(row_env1) << '\n';
    ++report.samples;
  }

  if (cfg.tasks.semantic) {
    double acc = 0.0;
    int defined = 0;
    for (const auto& [cls, iu] : iou_acc) {
      if (iu[1] == 0) {
        report.iou.per_class[cls] = std::nullopt;
        continue;
      }
      const double iou = static_cast<double>(iu[0]) / iu[1];
      report.iou.per_class[cls] = iou;
      acc += iou;
      ++defined;
    }
    report.iou.mean = defined ? acc / defined : 0.0;
  }
  if (depth_n > 0) {
    report.depth.abs_rel = abs_rel / depth_n;
    report.depth.sq_rel = sq_rel / depth_n;
    report.depth.mse = sq / depth_n;
    report.depth.rmse = std::sqrt(report.depth.mse);
  }
  if (epe_n > 0) report.epe = epe_acc / epe_n;
  if (s3r_n > 0) {
    for (int e = 0; e < 2; ++e) {
      report.s3r.mse[e] = mse_acc[e] / s3r_n;
      report.s3r.env[e] = env_acc[e] / s3r_n;
    }
  }
  report.per_sample_tsv = tsv.str();
  return report;
}

}  // namespace binsight::train
