#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "binsight/dataset.hpp"
#include "binsight/error.hpp"
#include "binsight/trainer.hpp"

// Subcommands: render, train, eval, sweep, s3r.
// Exit codes: 0 success, 1 usage/config, 2 data error, 3 numerical failure.

namespace fs = std::filesystem;
using namespace binsight;

namespace {

io::Config load_config(const std::string& path) {
  return io::Config::from_file(path);
}

void apply_overrides(io::Config& cfg, const std::string& channels,
                     int pairs, long seed, double amp) {
  if (!channels.empty()) cfg.set("channels", channels);
  if (pairs > 0) cfg.set("pairs", std::to_string(pairs));
  if (seed >= 0) cfg.set("seed", std::to_string(seed));
  if (amp >= 0) cfg.set("amp", std::to_string(amp));
}

train::RunConfig run_config_from(const io::Config& cfg) {
  auto rc = train::RunConfig::from_config(cfg);
  // without an explicit init_seed the run seed controls initialization too
  if (!cfg.has("init_seed")) rc.model.init_seed = rc.seed;
  return rc;
}

int cmd_render(const std::string& config_path, const std::string& out_dir) {
  const auto cfg = load_config(config_path);
  const auto dcfg = sim::dataset_config_from(cfg);
  const auto manifest = sim::generate_dataset(dcfg, out_dir);
  std::cout << "rendered " << manifest.size() << " samples into " << out_dir
            << "\n";
  return 0;
}

int cmd_train(const std::string& config_path, const std::string& out_dir,
              const std::string& resume, const std::string& channels,
              int pairs, long seed, double amp) {
  auto cfg = load_config(config_path);
  apply_overrides(cfg, channels, pairs, seed, amp);
  const auto rc = run_config_from(cfg);
  fs::create_directories(out_dir);
  std::ofstream log(fs::path(out_dir) / "training_log.txt");
  if (!log) throw DataError("cannot open training log in " + out_dir);
  const auto best = train::run_training(rc, out_dir, log,
                                        resume.empty() ? fs::path{} : fs::path(resume));
  std::cout << "best checkpoint: " << best.string() << "\n";
  return 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& split,
             double amp, const std::string& out_dir,
             const std::string& dataset_override) {
  auto loaded = train::load_checkpoint(checkpoint);
  if (!dataset_override.empty()) loaded.cfg.dataset_dir = dataset_override;
  const auto manifest =
      sim::read_manifest(loaded.cfg.dataset_dir / "manifest.txt");
  train::DataPipeline pipe(loaded.cfg.dataset_dir, loaded.cfg.model,
                           loaded.stats, amp);
  const auto report = train::evaluate(*loaded.net, pipe, manifest, split);

  const fs::path dir = out_dir.empty()
                           ? fs::path(checkpoint).parent_path()
                           : fs::path(out_dir);
  fs::create_directories(dir);
  {
    std::ofstream os(dir / ("report_" + split + ".txt"));
    os << report.to_text();
  }
  {
    std::ofstream os(dir / ("per_sample_" + split + ".tsv"));
    os << report.per_sample_tsv;
  }
  std::cout << report.to_text();
  return 0;
}

int cmd_s3r(const std::string& checkpoint, const std::string& audio_path,
            const std::string& out_dir, int pairs_override) {
  auto loaded = train::load_checkpoint(checkpoint);
  const auto& cfg = loaded.cfg.model;
  if (!cfg.tasks.s3r)
    throw ConfigError("checkpoint has no spatial-sound decoder");
  int pairs = cfg.output_pairs;
  if (pairs_override > 0) {
    if (pairs_override > cfg.output_pairs)
      throw ConfigError("checkpoint predicts only " +
                        std::to_string(cfg.output_pairs) + " pairs");
    pairs = pairs_override;
  }

  auto channels = io::read_bsna(audio_path);
  std::vector<dsp::Waveform> rig(8);
  const auto ref = train::s3r_reference_pair();
  if (channels.size() == 8) {
    rig = channels;
  } else if (channels.size() == 2) {
    // a bare binaural file is taken as the reference 0-degree pair
    for (int c = 0; c < 8; ++c) {
      rig[c].sample_rate = channels[0].sample_rate;
      rig[c].channel_id = c + 1;
      rig[c].samples.assign(channels[0].samples.size(), 0.0);
    }
    rig[ref[0] - 1] = channels[0];
    rig[ref[1] - 1] = channels[1];
    for (int id : cfg.input_channels) {
      if (id != ref[0] && id != ref[1])
        throw DataError(
            "model needs rig channel " + std::to_string(id) +
            ", but the input file only carries the reference pair");
    }
  } else {
    throw DataError("expected a 2- or 8-channel audio file");
  }

  auto sample = train::preprocess_channels(rig, cfg, loaded.stats, 1.0, true);
  std::vector<train::SampleData> batch{std::move(sample)};
  train::DataPipeline pipe(fs::path{}, cfg, loaded.stats, 1.0);
  auto input = pipe.make_input(batch);
  auto pred = loaded.net->forward(input, false);

  const std::size_t plane =
      static_cast<std::size_t>(cfg.spec_bins()) * cfg.spec_frames();
  dsp::ComplexSpectrogram ref_spec[2];
  dsp::Waveform ref_wave[2];
  for (int ear = 0; ear < 2; ++ear) {
    ref_spec[ear].bins = cfg.spec_bins();
    ref_spec[ear].frames = cfg.spec_frames();
    ref_spec[ear].params = cfg.stft;
    ref_spec[ear].sample_rate = cfg.sample_rate;
    ref_spec[ear].data.resize(plane);
    for (std::size_t i = 0; i < plane; ++i)
      ref_spec[ear].data[i] = {batch[0].ref_spec[ear][i],
                               batch[0].ref_spec[ear][plane + i]};
    ref_wave[ear].sample_rate = cfg.sample_rate;
    ref_wave[ear].samples.assign(batch[0].ref_wave[ear].begin(),
                                 batch[0].ref_wave[ear].end());
  }
  std::vector<float> masks(pred.masks.data().begin(),
                           pred.masks.data().end());
  const auto recon = model::s3r_reconstruct(masks, cfg.output_pairs,
                                            ref_spec[0], ref_spec[1],
                                            ref_wave[0], ref_wave[1]);

  fs::create_directories(out_dir);
  const auto out_pairs = train::s3r_output_pairs(cfg.output_pairs);
  static const char* angle[3] = {"090", "180", "270"};
  for (int p = 0; p < pairs; ++p) {
    std::vector<dsp::Waveform> stereo{recon[p].left, recon[p].right};
    stereo[0].channel_id = out_pairs[p][0];
    stereo[1].channel_id = out_pairs[p][1];
    const fs::path out =
        fs::path(out_dir) / (std::string("pair_") + angle[p] + ".bsna");
    io::write_bsna(out, stereo);
    std::cout << "wrote " << out.string() << "\n";
  }
  return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& out_dir) {
  const auto base = load_config(config_path);
  const std::string axis = base.get("sweep_axis");
  const std::string values_raw = base.get("sweep_values");
  std::vector<std::string> values;
  {
    std::istringstream is(values_raw);
    std::string item;
    while (std::getline(is, item, ';')) {
      if (!item.empty()) values.push_back(item);
    }
  }
  if (values.empty()) throw ConfigError("sweep: empty sweep_values");
  if (axis != "channels" && axis != "encoder" && axis != "pairs" &&
      axis != "tasks")
    throw ConfigError("sweep: axis must be channels|encoder|pairs|tasks");

  fs::create_directories(out_dir);
  std::ofstream table(fs::path(out_dir) / "sweep_results.tsv");
  table << "cell\t" << axis
        << "\tstatus\tmiou\tdepth_rmse\tflow_epe\ts3r_mse1\n";

  for (std::size_t i = 0; i < values.size(); ++i) {
    io::Config cell_cfg = base;
    cell_cfg.set(axis, values[i]);
    const fs::path cell_dir =
        fs::path(out_dir) / ("cell_" + std::to_string(i));
    std::string status = "ok";
    double miou = 0, rmse = 0, epe_v = 0, mse1 = 0;
    try {
      const auto rc = run_config_from(cell_cfg);
      fs::create_directories(cell_dir);
      std::ofstream log(cell_dir / "training_log.txt");
      const auto best = train::run_training(rc, cell_dir, log);
      auto loaded = train::load_checkpoint(best);
      const auto manifest =
          sim::read_manifest(loaded.cfg.dataset_dir / "manifest.txt");
      train::DataPipeline pipe(loaded.cfg.dataset_dir, loaded.cfg.model,
                               loaded.stats, 1.0);
      const auto report = train::evaluate(*loaded.net, pipe, manifest, "test");
      std::ofstream os(cell_dir / "report_test.txt");
      os << report.to_text();
      miou = report.iou.mean;
      rmse = report.depth.rmse;
      epe_v = report.epe;
      mse1 = report.s3r.mse[0];
    } catch (const std::exception& e) {
      status = std::string("error: ") + e.what();
    }
    table << i << '\t' << values[i] << '\t' << status << '\t' << miou << '\t'
          << rmse << '\t' << epe_v << '\t' << mse1 << '\n';
    table.flush();
    std::cout << "cell " << i << " (" << values[i] << "): " << status << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"binaural scene understanding toolkit"};
  app.require_subcommand(1);

  std::string config_path, out_dir, checkpoint, split = "test";
  std::string channels, resume, audio_path, dataset_override;
  double amp = -1.0;
  int pairs = 0;
  long seed = -1;

  auto* render = app.add_subcommand("render", "synthesize a dataset");
  render->add_option("--config", config_path)->required();
  render->add_option("--out", out_dir)->required();

  auto* tr = app.add_subcommand("train", "train a model");
  tr->add_option("--config", config_path)->required();
  tr->add_option("--out", out_dir)->required();
  tr->add_option("--checkpoint", resume, "resume from this checkpoint");
  tr->add_option("--channels", channels, "input rig channels, e.g. 3,8");
  tr->add_option("--pairs", pairs, "output pairs for the s3r head");
  tr->add_option("--seed", seed);

  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint");
  ev->add_option("--checkpoint", checkpoint)->required();
  ev->add_option("--split", split);
  ev->add_option("--amp", amp, "input amplitude multiplier");
  ev->add_option("--out", out_dir);
  ev->add_option("--config", dataset_override, "override dataset directory");

  auto* sw = app.add_subcommand("sweep", "train/eval over an ablation axis");
  sw->add_option("--config", config_path)->required();
  sw->add_option("--out", out_dir)->required();

  auto* s3 = app.add_subcommand("s3r", "predict binaural pairs at other orientations");
  s3->add_option("--checkpoint", checkpoint)->required();
  s3->add_option("audio", audio_path, "input BSNA file")->required();
  s3->add_option("--out", out_dir)->required();
  s3->add_option("--pairs", pairs, "emit only the first N pairs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (render->parsed()) return cmd_render(config_path, out_dir);
    if (tr->parsed())
      return cmd_train(config_path, out_dir, resume, channels, pairs, seed,
                       amp);
    if (ev->parsed())
      return cmd_eval(checkpoint, split, amp < 0 ? 1.0 : amp, out_dir,
                      dataset_override);
    if (sw->parsed()) return cmd_sweep(config_path, out_dir);
    if (s3->parsed()) return cmd_s3r(checkpoint, audio_path, out_dir, pairs);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const NumericError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
