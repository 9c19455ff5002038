// Command-line front end: scene generation, interpolation and forecaster
// training, extrapolation, rendering, evaluation, plotting and multi-variant
// comparison runs.

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "odegs/experiment.hpp"

namespace fs = std::filesystem;
using namespace odegs;

namespace {

enum ExitCode { kOk = 0, kFailure = 1, kUsage = 2, kMissing = 3, kNumerical = 4 };

// Flags shared by every command that builds a RunConfig.
struct ConfigFlags {
  std::string config_file;
  std::optional<std::uint64_t> seed;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_file, "JSON run configuration");
    cmd->add_option("--seed", seed, "global seed (overrides ODEGS_SEED and the config file)");
  }
};

template <class T>
void set_if(const std::optional<T>& flag, T& target) {
  if (flag) target = *flag;
}

// defaults < config file < ODEGS_SEED < flags. Stage seeds derive from the
// global seed, so it is applied before flag overrides of individual fields.
RunConfig resolve(const ConfigFlags& flags) {
  RunConfig cfg;
  if (!flags.config_file.empty()) cfg = load_run_config(flags.config_file, cfg);
  if (const char* env = std::getenv("ODEGS_SEED")) {
    try {
      std::size_t used = 0;
      cfg.seed = std::stoull(env, &used);
      if (used != std::string(env).size()) throw std::invalid_argument(env);
    } catch (const std::exception&) {
      throw std::invalid_argument(std::string("ODEGS_SEED must be a non-negative integer, got '") + env + "'");
    }
  }
  set_if(flags.seed, cfg.seed);
  cfg.apply_seed();
  return cfg;
}

std::vector<double> eval_times(const StoredScene& s) {
  std::vector<double> ts;
  for (const Frame& f : s.frames)
    if (!f.train) ts.push_back(f.t);
  return ts;
}

TrajectorySet train_truth(const StoredScene& s) {
  std::vector<double> ts;
  std::vector<std::size_t> steps;
  for (const Frame& f : s.frames)
    if (f.train) {
      ts.push_back(f.t);
      steps.push_back(f.index);
    }
  TrajectorySet out(s.truth.gaussians(), ts);
  for (std::size_t i = 0; i < steps.size(); ++i) out.set_frame(i, s.truth.frame(steps[i]));
  return out;
}

InterpModel require_interp(const std::string& path) {
  require_file(path, "interpolation checkpoint");
  return load_interp(path);
}

TrajectorySet require_trajectories(const std::string& path) {
  require_file(path, "trajectory file");
  return read_trajectories(path);
}

void print_rows(std::span<const EvalRow> rows) {
  for (const auto& r : rows)
    std::printf("%-20s frame %4zu  t %.4f  psnr %7.3f  ssim %.5f\n", r.variant.c_str(), r.frame_index, r.t, r.psnr,
                r.ssim);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Forecast dynamic Gaussian-splat scenes with a latent ODE."};
  app.require_subcommand(1);
  app.set_version_flag("--version", "odegs 0.1.0");

  // generate-scene
  ConfigFlags gen_flags;
  std::optional<std::string> preset;
  std::optional<std::size_t> gaussians, frames;
  std::optional<double> split, period;
  std::optional<int> resolution, cameras;
  std::string gen_out;
  auto* gen = app.add_subcommand("generate-scene", "Synthesize a scene, its frames and ground-truth trajectories");
  gen_flags.attach(gen);
  gen->add_option("--preset", preset, "scene preset")->check(CLI::IsMember(preset_names()));
  gen->add_option("--gaussians", gaussians, "number of Gaussians");
  gen->add_option("--frames", frames, "number of frames over the whole window");
  gen->add_option("--split", split, "fraction of the window used for training frames");
  gen->add_option("--period", period, "motion period in scene time");
  gen->add_option("--resolution", resolution, "image width and height");
  gen->add_option("--cameras", cameras, "number of cameras");
  gen->add_option("--out", gen_out, "output directory")->required();

  // train-interp
  ConfigFlags ti_flags;
  std::string ti_scene, ti_out;
  std::optional<std::size_t> ti_epochs;
  auto* ti = app.add_subcommand("train-interp", "Fit the interpolation model to the training-window trajectories");
  ti_flags.attach(ti);
  ti->add_option("--scene", ti_scene, "generated scene directory")->required();
  ti->add_option("--out", ti_out, "checkpoint path")->required();
  ti->add_option("--epochs", ti_epochs, "training epochs");

  // train-forecast
  ConfigFlags tf_flags;
  std::string tf_scene, tf_interp, tf_out;
  bool tf_analytic = false;
  std::optional<std::string> tf_variant;
  std::optional<std::size_t> tf_epochs, tf_batch, tf_d_model, tf_layers;
  std::optional<double> tf_lr, tf_lambda_latent, tf_lambda_traj;
  auto* tf = app.add_subcommand("train-forecast", "Train a forecaster on trajectories sampled from the observed window");
  tf_flags.attach(tf);
  tf->add_option("--scene", tf_scene, "generated scene directory")->required();
  auto* tf_interp_opt = tf->add_option("--interp", tf_interp, "interpolation checkpoint used as trajectory source");
  tf->add_flag("--analytic", tf_analytic, "sample closed-form states instead of the interpolation model")
      ->excludes(tf_interp_opt);
  tf->add_option("--variant", tf_variant, "forecaster variant")
      ->check(CLI::IsMember({"deterministic", "variational", "autoregressive"}));
  tf->add_option("--epochs", tf_epochs, "training epochs");
  tf->add_option("--batch-size", tf_batch, "Gaussians per batch");
  tf->add_option("--lr", tf_lr, "peak learning rate");
  tf->add_option("--lambda-latent", tf_lambda_latent, "latent smoothness weight");
  tf->add_option("--lambda-traj", tf_lambda_traj, "trajectory acceleration weight");
  tf->add_option("--d-model", tf_d_model, "encoder width");
  tf->add_option("--layers", tf_layers, "encoder layers");
  tf->add_option("--out", tf_out, "output directory")->required();

  // extrapolate
  std::string ex_scene, ex_model, ex_interp, ex_out;
  bool ex_analytic = false;
  std::string ex_variant = "forecaster";
  std::vector<double> ex_times;
  auto* ex = app.add_subcommand("extrapolate", "Predict Gaussian states at future timestamps");
  ex->add_option("--scene", ex_scene, "generated scene directory")->required();
  ex->add_option("--variant", ex_variant, "forecaster or timestamp-baseline")
      ->check(CLI::IsMember({"forecaster", kTimestampBaseline}));
  ex->add_option("--model", ex_model, "forecaster checkpoint");
  auto* ex_interp_opt = ex->add_option("--interp", ex_interp, "interpolation checkpoint");
  ex->add_flag("--analytic", ex_analytic, "build the context from closed-form states")->excludes(ex_interp_opt);
  ex->add_option("--times", ex_times, "comma separated timestamps (default: evaluation frames)")->delimiter(',');
  ex->add_option("--out", ex_out, "output trajectory file")->required();

  // render
  std::string rd_scene, rd_traj, rd_out;
  std::optional<std::size_t> rd_camera;
  auto* rd = app.add_subcommand("render", "Render every timestamp of a trajectory file");
  rd->add_option("--scene", rd_scene, "generated scene directory")->required();
  rd->add_option("--traj", rd_traj, "trajectory file")->required();
  rd->add_option("--camera", rd_camera, "camera index (default: cycle through cameras like the dataset)");
  rd->add_option("--out", rd_out, "output directory")->required();

  // evaluate
  std::string ev_scene, ev_out, ev_plot;
  std::vector<std::string> ev_preds;
  auto* ev = app.add_subcommand("evaluate", "Score predicted trajectories against the evaluation frames");
  ev->add_option("--scene", ev_scene, "generated scene directory")->required();
  ev->add_option("--pred", ev_preds, "NAME=TRAJECTORY_FILE, repeatable")->required();
  ev->add_option("--out", ev_out, "CSV path")->required();
  ev->add_option("--plot", ev_plot, "also write a PSNR/SSIM plot (SVG)");

  // plot
  std::vector<std::string> pl_csv;
  std::string pl_out;
  auto* pl = app.add_subcommand("plot", "Plot PSNR and SSIM against time from evaluation CSVs");
  pl->add_option("--csv", pl_csv, "evaluation CSV, repeatable")->required();
  pl->add_option("--out", pl_out, "SVG path")->required();

  // compare
  ConfigFlags cmp_flags;
  std::vector<std::string> cmp_variants{"deterministic", "autoregressive", kTimestampBaseline, kFreezeBaseline};
  std::string cmp_out;
  std::optional<std::size_t> cmp_epochs;
  auto* cmp = app.add_subcommand("compare", "Run the full pipeline for several variants and tabulate the results");
  cmp_flags.attach(cmp);
  cmp->add_option("--variants", cmp_variants, "variants to run")
      ->delimiter(',')
      ->check(CLI::IsMember({"deterministic", "variational", "autoregressive", kTimestampBaseline, kFreezeBaseline}));
  cmp->add_option("--epochs", cmp_epochs, "forecaster training epochs");
  cmp->add_option("--out", cmp_out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*gen) {
      RunConfig cfg = resolve(gen_flags);
      set_if(preset, cfg.preset);
      set_if(gaussians, cfg.scene.gaussians);
      set_if(frames, cfg.frames);
      set_if(split, cfg.split);
      set_if(period, cfg.scene.period);
      set_if(resolution, cfg.scene.resolution);
      set_if(cameras, cfg.scene.cameras);
      cfg.validate();
      const SceneSpec spec = make_preset(cfg.preset, cfg.scene);
      const GeneratedDataset data = generate_dataset(spec, cfg.frames, cfg.split);
      write_generated(gen_out, spec, data);
      std::printf("wrote %zu train + %zu eval frames to %s (t_split %.6g)\n", data.n_train,
                  data.frames.size() - data.n_train, gen_out.c_str(), data.t_split);
    } else if (*ti) {
      RunConfig cfg = resolve(ti_flags);
      set_if(ti_epochs, cfg.interp.epochs);
      cfg.interp.validate();
      const StoredScene s = read_generated(ti_scene);
      InterpTrainLog log;
      const InterpModel model = train_interp(train_truth(s), cfg.interp, &log);
      if (fs::path(ti_out).has_parent_path()) fs::create_directories(fs::path(ti_out).parent_path());
      save_interp(ti_out, model);
      if (!log.epoch_l1.empty()) std::printf("final epoch L1 %.6g over %zu epochs\n", log.epoch_l1.back(), log.epoch_l1.size());
      std::printf("wrote %s\n", ti_out.c_str());
    } else if (*tf) {
      RunConfig cfg = resolve(tf_flags);
      if (tf_variant) cfg.model.variant = forecast_variant_from_string(*tf_variant);
      set_if(tf_epochs, cfg.train.epochs);
      set_if(tf_batch, cfg.train.batch_size);
      set_if(tf_lr, cfg.train.lr_max);
      set_if(tf_lambda_latent, cfg.loss.lambda_latent);
      set_if(tf_lambda_traj, cfg.loss.lambda_traj);
      set_if(tf_d_model, cfg.model.d_model);
      set_if(tf_layers, cfg.model.layers);
      cfg.validate();
      if (!tf_analytic && tf_interp.empty())
        throw std::invalid_argument("train-forecast needs --interp CHECKPOINT or --analytic");
      const StoredScene s = read_generated(tf_scene);
      std::optional<InterpModel> interp;
      if (!tf_analytic) interp = require_interp(tf_interp);
      const TrajectorySource source = interp ? source_from(*interp) : source_from(s.spec);
      const std::size_t m = s.spec.gaussians.size();
      const SampleDataset ds = build_dataset(source, m, s.spec.t_min, s.t_split, cfg.sampler);
      std::vector<double> contexts;
      for (const auto& g : ds.groups) contexts.insert(contexts.end(), g.context.begin(), g.context.end());
      const PositionNormalizer norm = PositionNormalizer::fit(contexts);
      Forecaster model(cfg.model);
      cfg.train.checkpoint = fs::path(tf_out) / "forecaster.ckpt";
      cfg.train.metrics_csv = fs::path(tf_out) / "train_metrics.csv";
      const TrainResult r = train_forecaster(model, ds, norm, cfg.train, cfg.loss);
      const nlohmann::json run = to_json(cfg);
      save_forecaster(cfg.train.checkpoint, model, norm,
                      {{"sampler", run["sampler"]},
                       {"epoch", r.epoch_loss_e.size() - 1},
                       {"loss_e", r.epoch_loss_e.back()}});
      std::ofstream(fs::path(tf_out) / "config.json") << run.dump(2) << '\n';
      for (std::size_t e = 0; e < r.epoch_loss_e.size(); ++e) std::printf("epoch %zu  L_e %.6g\n", e, r.epoch_loss_e[e]);
      std::printf("wrote %s\n", cfg.train.checkpoint.string().c_str());
    } else if (*ex) {
      const StoredScene s = read_generated(ex_scene);
      const std::vector<double> times = ex_times.empty() ? eval_times(s) : ex_times;
      if (times.empty()) throw std::invalid_argument("extrapolate: no timestamps (pass --times)");
      TrajectorySet predicted;
      if (ex_variant == kTimestampBaseline) {
        if (ex_interp.empty()) throw std::invalid_argument("timestamp-baseline needs --interp CHECKPOINT");
        predicted = require_interp(ex_interp).query(times, true);
      } else {
        if (ex_model.empty()) throw std::invalid_argument("extrapolate needs --model CHECKPOINT");
        if (!ex_analytic && ex_interp.empty())
          throw std::invalid_argument("extrapolate needs --interp CHECKPOINT or --analytic for the context");
        require_file(ex_model, "forecaster checkpoint");
        const LoadedForecaster f = load_forecaster(ex_model);
        RunConfig sampler_only;
        if (f.metadata.contains("sampler"))
          sampler_only = run_config_from_json({{"sampler", f.metadata["sampler"]}}, sampler_only);
        std::optional<InterpModel> interp;
        if (!ex_analytic) interp = require_interp(ex_interp);
        const TrajectorySource source = interp ? source_from(*interp) : source_from(s.spec);
        const ContextBatch ctx =
            final_context(source, s.spec.gaussians.size(), s.spec.t_min, s.t_split, sampler_only.sampler);
        predicted = extrapolate(f.model, f.normalizer, ctx, times);
      }
      if (fs::path(ex_out).has_parent_path()) fs::create_directories(fs::path(ex_out).parent_path());
      write_trajectories(ex_out, predicted);
      std::printf("wrote %zu timestamps for %zu Gaussians to %s\n", predicted.steps(), predicted.gaussians(),
                  ex_out.c_str());
    } else if (*rd) {
      const StoredScene s = read_generated(rd_scene);
      const TrajectorySet traj = require_trajectories(rd_traj);
      if (traj.gaussians() != s.spec.gaussians.size())
        throw std::invalid_argument("render: trajectory and scene disagree on the number of Gaussians");
      if (rd_camera && *rd_camera >= s.spec.cameras.size())
        throw std::invalid_argument("render: camera index out of range");
      fs::create_directories(rd_out);
      for (std::size_t j = 0; j < traj.steps(); ++j) {
        const std::size_t cam = rd_camera.value_or(j % s.spec.cameras.size());
        const Image img = render(traj.frame(j), s.spec.gaussians, s.spec.cameras[cam]);
        char name[32];
        std::snprintf(name, sizeof name, "frame_%04zu.ppm", j);
        write_ppm(fs::path(rd_out) / name, img);
      }
      std::printf("rendered %zu frames to %s\n", traj.steps(), rd_out.c_str());
    } else if (*ev) {
      const StoredScene s = read_generated(ev_scene);
      std::vector<Frame> eval_frames;
      for (const Frame& f : s.frames)
        if (!f.train) eval_frames.push_back(f);
      std::vector<EvalRow> rows;
      for (const std::string& spec : ev_preds) {
        const auto eq = spec.find('=');
        if (eq == std::string::npos || eq == 0 || eq + 1 == spec.size())
          throw std::invalid_argument("--pred expects NAME=FILE, got '" + spec + "'");
        const auto more = evaluate_frames(s.spec, require_trajectories(spec.substr(eq + 1)), eval_frames,
                                          spec.substr(0, eq));
        rows.insert(rows.end(), more.begin(), more.end());
      }
      write_eval_csv(ev_out, rows);
      if (!ev_plot.empty()) write_metric_plot(ev_plot, rows);
      print_rows(rows);
    } else if (*pl) {
      std::vector<EvalRow> rows;
      for (const auto& csv : pl_csv) {
        const auto more = read_eval_csv(csv);
        rows.insert(rows.end(), more.begin(), more.end());
      }
      write_metric_plot(pl_out, rows);
      std::printf("wrote %s\n", pl_out.c_str());
    } else if (*cmp) {
      RunConfig cfg = resolve(cmp_flags);
      set_if(cmp_epochs, cfg.train.epochs);
      const ExperimentReport r = run_experiment(cfg, cmp_variants, cmp_out);
      std::printf("%-20s %14s %14s %10s %8s\n", "variant", "mean pos L1", "end pos L1", "psnr", "ssim");
      for (const auto& v : r.variants)
        std::printf("%-20s %14.6g %14.6g %10.3f %8.4f\n", v.variant.c_str(), v.error.mean_l1, v.error.end_l1,
                    v.mean_psnr, v.mean_ssim);
      std::printf("wrote %s\n", (fs::path(cmp_out) / "comparison.csv").string().c_str());
    }
  } catch (const MissingArtifact& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kMissing;
  } catch (const SolverError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return kNumerical;
  } catch (const TrainingError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return kNumerical;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return kUsage;
  } catch (const std::out_of_range& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return kUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kFailure;
  }
  return kOk;
}
