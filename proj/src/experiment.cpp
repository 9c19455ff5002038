#include "odegs/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace odegs {

namespace {

using nlohmann::json;

void check_keys(const json& patch, const json& known, const std::string& section) {
  if (!patch.is_object()) throw std::invalid_argument("config: section '" + section + "' must be an object");
  for (const auto& [key, value] : patch.items())
    if (!known.contains(key)) throw std::invalid_argument("config: unknown key '" + key + "' in '" + section + "'");
}

json merged(const json& base, const json& patch, const std::string& section) {
  check_keys(patch, base, section);
  json out = base;
  out.merge_patch(patch);
  return out;
}

json scene_json(const RunConfig& c) {
  return {{"preset", c.preset},
          {"gaussians", c.scene.gaussians},
          {"period", c.scene.period},
          {"t_min", c.scene.t_min},
          {"t_max", c.scene.t_max},
          {"resolution", c.scene.resolution},
          {"cameras", c.scene.cameras},
          {"frames", c.frames},
          {"split", c.split}};
}

json interp_json(const InterpConfig& c) {
  return {{"time_octaves", c.time_octaves}, {"space_octaves", c.space_octaves}, {"hidden", c.hidden},
          {"hidden_layers", c.hidden_layers}, {"epochs", c.epochs},           {"batch_frames", c.batch_frames},
          {"lr_max", c.lr_max},             {"lr_min", c.lr_min},             {"target_l1", c.target_l1}};
}

json sampler_json(const SamplerConfig& c) {
  return {{"context_steps", c.context_steps},
          {"target_steps", c.target_steps},
          {"context_span", c.context_span},
          {"t0_stride", c.t0_stride},
          {"min_target_span", c.min_target_span}};
}

json train_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},         {"batch_size", c.batch_size}, {"lr_max", c.lr_max},
          {"lr_min", c.lr_min},         {"beta1", c.adam.beta1},     {"beta2", c.adam.beta2},
          {"eps", c.adam.eps},          {"max_grad_norm", c.adam.max_grad_norm}};
}

json loss_json(const LossConfig& c) {
  return {{"lambda_latent", c.lambda_latent}, {"lambda_traj", c.lambda_traj}, {"temperature", c.temperature},
          {"loss_init", c.loss_init},         {"loss_end", c.loss_end},       {"ema_decay", c.ema_decay},
          {"likelihood_sigma", c.likelihood_sigma}};
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

std::vector<StateVec> frame_states(const TrajectorySet& set, std::size_t j) {
  std::vector<StateVec> out(set.gaussians());
  for (std::size_t k = 0; k < set.gaussians(); ++k) out[k] = set.state_vec(k, j);
  return out;
}

std::size_t time_index(const TrajectorySet& set, double t) {
  const auto& ts = set.times();
  for (std::size_t j = 0; j < ts.size(); ++j)
    if (std::abs(ts[j] - t) <= 1e-12 * std::max(1.0, std::abs(t))) return j;
  std::ostringstream os;
  os << "trajectory file has no state at t = " << t;
  throw std::invalid_argument(os.str());
}

TrajectorySet select_frames(const TrajectorySet& set, const std::vector<std::size_t>& steps) {
  std::vector<double> ts;
  for (std::size_t j : steps) ts.push_back(set.times()[j]);
  TrajectorySet out(set.gaussians(), ts);
  for (std::size_t i = 0; i < steps.size(); ++i) out.set_frame(i, frame_states(set, steps[i]));
  return out;
}

}  // namespace

MissingArtifact::MissingArtifact(const std::filesystem::path& path, const std::string& what)
    : std::runtime_error(what + " not found: " + path.string()), path_(path) {}

void require_file(const std::filesystem::path& path, const std::string& what) {
  if (!std::filesystem::exists(path)) throw MissingArtifact(path, what);
}

void RunConfig::apply_seed() {
  scene.seed = seed;
  interp.seed = seed + 1;
  model.seed = seed + 2;
  train.seed = seed + 3;
}

void RunConfig::validate() const {
  if (scene.gaussians == 0) throw std::invalid_argument("config: scene needs at least one Gaussian");
  if (frames < 2) throw std::invalid_argument("config: need at least two frames");
  if (!(split > 0.0 && split < 1.0)) throw std::invalid_argument("config: split must lie in (0, 1)");
  interp.validate();
  model.validate();
  train.validate();
  loss.validate();
  if (sampler.context_steps != model.context_steps)
    throw std::invalid_argument("config: sampler.context_steps and model.context_steps differ");
}

json to_json(const RunConfig& c) {
  return {{"seed", c.seed},
          {"analytic_source", c.analytic_source},
          {"scene", scene_json(c)},
          {"interp", interp_json(c.interp)},
          {"sampler", sampler_json(c.sampler)},
          {"model", to_json(c.model)},
          {"train", train_json(c.train)},
          {"loss", loss_json(c.loss)}};
}

RunConfig run_config_from_json(const json& j, RunConfig base) {
  check_keys(j, to_json(base), "root");
  RunConfig c = base;
  try {
    c.seed = j.value("seed", c.seed);
    c.analytic_source = j.value("analytic_source", c.analytic_source);
    if (j.contains("scene")) {
      const json s = merged(scene_json(c), j["scene"], "scene");
      c.preset = s["preset"];
      c.scene.gaussians = s["gaussians"];
      c.scene.period = s["period"];
      c.scene.t_min = s["t_min"];
      c.scene.t_max = s["t_max"];
      c.scene.resolution = s["resolution"];
      c.scene.cameras = s["cameras"];
      c.frames = s["frames"];
      c.split = s["split"];
    }
    if (j.contains("interp")) {
      const json s = merged(interp_json(c.interp), j["interp"], "interp");
      c.interp.time_octaves = s["time_octaves"];
      c.interp.space_octaves = s["space_octaves"];
      c.interp.hidden = s["hidden"];
      c.interp.hidden_layers = s["hidden_layers"];
      c.interp.epochs = s["epochs"];
      c.interp.batch_frames = s["batch_frames"];
      c.interp.lr_max = s["lr_max"];
      c.interp.lr_min = s["lr_min"];
      c.interp.target_l1 = s["target_l1"];
    }
    if (j.contains("sampler")) {
      const json s = merged(sampler_json(c.sampler), j["sampler"], "sampler");
      c.sampler.context_steps = s["context_steps"];
      c.sampler.target_steps = s["target_steps"];
      c.sampler.context_span = s["context_span"];
      c.sampler.t0_stride = s["t0_stride"];
      c.sampler.min_target_span = s["min_target_span"];
    }
    if (j.contains("model")) {
      json base_model = to_json(c.model);
      if (j["model"].contains("solver")) {
        base_model["solver"] = merged(base_model["solver"], j["model"]["solver"], "model.solver");
        json rest = j["model"];
        rest.erase("solver");
        base_model = merged(base_model, rest, "model");
      } else {
        base_model = merged(base_model, j["model"], "model");
      }
      c.model = forecaster_config_from_json(base_model);
    }
    if (j.contains("train")) {
      const json s = merged(train_json(c.train), j["train"], "train");
      c.train.epochs = s["epochs"];
      c.train.batch_size = s["batch_size"];
      c.train.lr_max = s["lr_max"];
      c.train.lr_min = s["lr_min"];
      c.train.adam.beta1 = s["beta1"];
      c.train.adam.beta2 = s["beta2"];
      c.train.adam.eps = s["eps"];
      c.train.adam.max_grad_norm = s["max_grad_norm"];
    }
    if (j.contains("loss")) {
      const json s = merged(loss_json(c.loss), j["loss"], "loss");
      c.loss.lambda_latent = s["lambda_latent"];
      c.loss.lambda_traj = s["lambda_traj"];
      c.loss.temperature = s["temperature"];
      c.loss.loss_init = s["loss_init"];
      c.loss.loss_end = s["loss_end"];
      c.loss.ema_decay = s["ema_decay"];
      c.loss.likelihood_sigma = s["likelihood_sigma"];
    }
  } catch (const json::type_error& e) {
    throw std::invalid_argument(std::string("config: wrong value type: ") + e.what());
  }
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path, RunConfig base) {
  require_file(path, "config file");
  std::ifstream is(path);
  json j;
  try {
    j = json::parse(is);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("config: cannot parse " + path.string() + ": " + e.what());
  }
  return run_config_from_json(j, std::move(base));
}

std::vector<EvalRow> evaluate_frames(const SceneSpec& spec, const TrajectorySet& predicted,
                                     std::span<const Frame> frames, const std::string& variant) {
  if (predicted.gaussians() != spec.gaussians.size())
    throw std::invalid_argument("evaluate: trajectory has " + std::to_string(predicted.gaussians()) +
                                " Gaussians, scene has " + std::to_string(spec.gaussians.size()));
  std::vector<EvalRow> rows;
  rows.reserve(frames.size());
  for (const Frame& f : frames) {
    if (f.camera >= spec.cameras.size()) throw std::invalid_argument("evaluate: frame camera out of range");
    const auto states = frame_states(predicted, time_index(predicted, f.t));
    const Image rendered = quantize_8bit(render(states, spec.gaussians, spec.cameras[f.camera]));
    const Image reference = quantize_8bit(f.image);
    rows.push_back({f.index, f.t, psnr(rendered, reference), ssim(rendered, reference), variant});
  }
  return rows;
}

void write_eval_csv(const std::filesystem::path& path, std::span<const EvalRow> rows) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << "frame_index,t,psnr,ssim,variant\n";
  for (const auto& r : rows)
    os << r.frame_index << ',' << format_double(r.t) << ',' << format_double(r.psnr) << ',' << format_double(r.ssim)
       << ',' << r.variant << '\n';
}

std::vector<EvalRow> read_eval_csv(const std::filesystem::path& path) {
  require_file(path, "evaluation CSV");
  std::ifstream is(path);
  std::string line;
  std::getline(is, line);
  if (line != "frame_index,t,psnr,ssim,variant") throw std::invalid_argument("unexpected CSV header in " + path.string());
  std::vector<EvalRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field[5];
    for (auto& f : field)
      if (!std::getline(ss, f, ',')) throw std::invalid_argument("malformed CSV row in " + path.string() + ": " + line);
    rows.push_back({std::stoul(field[0]), std::stod(field[1]), std::stod(field[2]), std::stod(field[3]), field[4]});
  }
  return rows;
}

void write_metric_plot(const std::filesystem::path& path, std::span<const EvalRow> rows) {
  if (rows.empty()) throw std::invalid_argument("plot: no rows");
  std::vector<std::string> variants;
  for (const auto& r : rows)
    if (std::find(variants.begin(), variants.end(), r.variant) == variants.end()) variants.push_back(r.variant);
  double t_lo = rows.front().t, t_hi = rows.front().t, p_lo = rows.front().psnr, p_hi = rows.front().psnr;
  for (const auto& r : rows) {
    t_lo = std::min(t_lo, r.t);
    t_hi = std::max(t_hi, r.t);
    p_lo = std::min(p_lo, r.psnr);
    p_hi = std::max(p_hi, r.psnr);
  }
  if (t_hi - t_lo < 1e-12) t_hi = t_lo + 1.0;
  p_lo = std::floor(p_lo - 1.0);
  p_hi = std::ceil(p_hi + 1.0);

  constexpr double kW = 760, kPanelH = 260, kLeft = 70, kRight = 180, kTop = 30, kGap = 60;
  const double plot_w = kW - kLeft - kRight;
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
  std::ostringstream svg;
  svg << R"(<svg xmlns="http://www.w3.org/2000/svg" width=")" << kW << R"(" height=")"
      << kTop + 2 * kPanelH + kGap + 40 << R"(" font-family="sans-serif" font-size="12">)" << '\n';
  struct Panel {
    const char* name;
    double lo, hi;
    double EvalRow::*field;
  };
  const Panel panels[] = {{"PSNR (dB)", p_lo, p_hi, &EvalRow::psnr}, {"SSIM", 0.0, 1.0, &EvalRow::ssim}};
  for (int p = 0; p < 2; ++p) {
    const Panel& pan = panels[p];
    const double y0 = kTop + p * (kPanelH + kGap);
    auto px = [&](double t) { return kLeft + plot_w * (t - t_lo) / (t_hi - t_lo); };
    auto py = [&](double v) { return y0 + kPanelH * (1.0 - (v - pan.lo) / (pan.hi - pan.lo)); };
    svg << "<rect x=\"" << kLeft << "\" y=\"" << y0 << "\" width=\"" << plot_w << "\" height=\"" << kPanelH
        << "\" fill=\"none\" stroke=\"#444\"/>\n";
    svg << "<text x=\"" << 10 << "\" y=\"" << y0 - 10 << "\">" << pan.name << " vs time</text>\n";
    for (int i = 0; i <= 4; ++i) {
      const double v = pan.lo + (pan.hi - pan.lo) * i / 4.0;
      svg << "<text x=\"" << kLeft - 8 << "\" y=\"" << py(v) + 4 << "\" text-anchor=\"end\">" << std::round(v * 100) / 100
          << "</text>\n";
      const double t = t_lo + (t_hi - t_lo) * i / 4.0;
      svg << "<text x=\"" << px(t) << "\" y=\"" << y0 + kPanelH + 16 << "\" text-anchor=\"middle\">"
          << std::round(t * 1000) / 1000 << "</text>\n";
    }
    for (std::size_t v = 0; v < variants.size(); ++v) {
      std::vector<const EvalRow*> pts;
      for (const auto& r : rows)
        if (r.variant == variants[v]) pts.push_back(&r);
      std::sort(pts.begin(), pts.end(), [](const EvalRow* a, const EvalRow* b) { return a->t < b->t; });
      svg << "<polyline fill=\"none\" stroke-width=\"2\" stroke=\"" << colors[v % 6] << "\" points=\"";
      for (const EvalRow* r : pts) svg << px(r->t) << ',' << py(std::clamp(r->*pan.field, pan.lo, pan.hi)) << ' ';
      svg << "\"/>\n";
      if (p == 0) {
        const double ly = kTop + 16 + 18.0 * static_cast<double>(v);
        svg << "<line x1=\"" << kW - kRight + 15 << "\" y1=\"" << ly << "\" x2=\"" << kW - kRight + 40 << "\" y2=\"" << ly
            << "\" stroke-width=\"2\" stroke=\"" << colors[v % 6] << "\"/>\n";
        svg << "<text class=\"legend\" x=\"" << kW - kRight + 46 << "\" y=\"" << ly + 4 << "\">" << variants[v]
            << "</text>\n";
      }
    }
  }
  svg << "<text x=\"" << kLeft + plot_w / 2 << "\" y=\"" << kTop + 2 * kPanelH + kGap + 34
      << "\" text-anchor=\"middle\">time</text>\n</svg>\n";
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << svg.str();
}

HorizonError position_error(const TrajectorySet& predicted, const TrajectorySet& truth) {
  if (predicted.gaussians() != truth.gaussians() || predicted.steps() != truth.steps())
    throw std::invalid_argument("position_error: trajectory sets differ in size");
  HorizonError e;
  const std::size_t m = truth.gaussians();
  for (std::size_t j = 0; j < truth.steps(); ++j) {
    double s = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
      const auto a = predicted.state(k, j), b = truth.state(k, j);
      s += std::abs(a[0] - b[0]) + std::abs(a[1] - b[1]) + std::abs(a[2] - b[2]);
    }
    e.step_l1.push_back(s / static_cast<double>(m));
  }
  e.mean_l1 = mean_of(e.step_l1);
  e.end_l1 = e.step_l1.empty() ? 0.0 : e.step_l1.back();
  return e;
}

std::optional<double> orbit_radius(const SceneSpec& spec, std::size_t k) {
  const auto* c = std::get_if<CircularMotion>(&spec.motion.at(k));
  if (!c) return std::nullopt;
  const Vec3 axis = c->axis.normalized();
  const Vec3 r = spec.gaussians[k].mu - c->center;
  return (r - axis * axis.dot(r)).norm();
}

TrajectorySet hold_states(std::span<const StateVec> states, std::span<const double> times) {
  TrajectorySet out(states.size(), std::vector<double>(times.begin(), times.end()));
  const std::vector<StateVec> frame(states.begin(), states.end());
  for (std::size_t j = 0; j < times.size(); ++j) out.set_frame(j, frame);
  return out;
}

const VariantReport& ExperimentReport::find(const std::string& variant) const {
  for (const auto& v : variants)
    if (v.variant == variant) return v;
  throw std::out_of_range("experiment report has no variant '" + variant + "'");
}

ExperimentReport run_experiment(const RunConfig& cfg, std::span<const std::string> variants,
                                const std::filesystem::path& out_dir) {
  cfg.validate();
  if (variants.empty()) throw std::invalid_argument("run_experiment: no variants requested");
  for (const auto& v : variants)
    if (v != kTimestampBaseline && v != kFreezeBaseline) forecast_variant_from_string(v);

  ExperimentReport report;
  report.scene = make_preset(cfg.preset, cfg.scene);
  const GeneratedDataset data = generate_dataset(report.scene, cfg.frames, cfg.split);
  report.t_split = data.t_split;
  report.scene.observed_t_max = data.t_split;
  const SceneSpec& spec = report.scene;
  const std::size_t m = spec.gaussians.size();
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    write_generated(out_dir / "scene", spec, data);
  }

  std::vector<std::size_t> train_steps, eval_steps;
  for (const Frame& f : data.frames) (f.train ? train_steps : eval_steps).push_back(f.index);
  const std::span<const Frame> eval_frames(data.frames.data() + data.n_train, eval_steps.size());
  for (std::size_t j : eval_steps) report.eval_times.push_back(data.truth.times()[j]);
  const TrajectorySet eval_truth = select_frames(data.truth, eval_steps);

  double radius_sum = 0.0;
  std::size_t radius_count = 0;
  for (std::size_t k = 0; k < m; ++k)
    if (const auto r = orbit_radius(spec, k)) {
      radius_sum += *r;
      ++radius_count;
    }
  report.mean_orbit_radius = radius_count ? radius_sum / static_cast<double>(radius_count) : 0.0;

  const bool needs_interp = !cfg.analytic_source || std::find(variants.begin(), variants.end(),
                                                              std::string(kTimestampBaseline)) != variants.end();
  std::optional<InterpModel> interp;
  if (needs_interp) {
    interp = train_interp(select_frames(data.truth, train_steps), cfg.interp);
    if (!out_dir.empty()) save_interp(out_dir / "interp.ckpt", *interp);
  }
  const TrajectorySource source = cfg.analytic_source ? source_from(spec) : source_from(*interp);
  const double t_min = spec.t_min;

  std::optional<SampleDataset> dataset;
  PositionNormalizer norm;
  auto ensure_dataset = [&] {
    if (dataset) return;
    dataset = build_dataset(source, m, t_min, data.t_split, cfg.sampler);
    std::vector<double> contexts;
    for (const auto& g : dataset->groups) contexts.insert(contexts.end(), g.context.begin(), g.context.end());
    norm = PositionNormalizer::fit(contexts);
  };

  for (const std::string& name : variants) {
    VariantReport vr;
    vr.variant = name;
    TrajectorySet predicted(m, report.eval_times);
    if (name == kTimestampBaseline) {
      predicted = interp->query(report.eval_times, true);
    } else if (name == kFreezeBaseline) {
      const std::vector<double> last{data.t_split};
      predicted = hold_states(source(last).frame(0), report.eval_times);
    } else {
      ensure_dataset();
      ForecasterConfig mc = cfg.model;
      mc.variant = forecast_variant_from_string(name);
      Forecaster model(mc);
      TrainConfig tc = cfg.train;
      if (!out_dir.empty()) {
        tc.checkpoint = out_dir / name / "forecaster.ckpt";
        tc.metrics_csv = out_dir / name / "train_metrics.csv";
      }
      vr.training = train_forecaster(model, *dataset, norm, tc, cfg.loss);
      const ContextBatch ctx = final_context(source, m, t_min, data.t_split, cfg.sampler);
      predicted = extrapolate(model, norm, ctx, report.eval_times);
    }
    vr.error = position_error(predicted, eval_truth);
    vr.frames = evaluate_frames(spec, predicted, eval_frames, name);
    std::vector<double> ps, ss;
    for (const auto& r : vr.frames) {
      ps.push_back(r.psnr);
      ss.push_back(r.ssim);
    }
    vr.mean_psnr = mean_of(ps);
    vr.mean_ssim = mean_of(ss);
    if (!out_dir.empty()) {
      std::filesystem::create_directories(out_dir / name);
      write_trajectories(out_dir / name / "predicted.ogtj", predicted);
    }
    report.variants.push_back(std::move(vr));
  }

  if (!out_dir.empty()) {
    std::vector<EvalRow> rows;
    for (const auto& v : report.variants) rows.insert(rows.end(), v.frames.begin(), v.frames.end());
    write_eval_csv(out_dir / "eval.csv", rows);
    write_metric_plot(out_dir / "eval.svg", rows);
    write_comparison_csv(out_dir / "comparison.csv", report);
    std::ofstream(out_dir / "config.json") << to_json(cfg).dump(2) << '\n';
  }
  return report;
}

void write_comparison_csv(const std::filesystem::path& path, const ExperimentReport& report) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << "variant,mean_position_l1,horizon_end_l1,mean_psnr,mean_ssim,final_train_loss\n";
  for (const auto& v : report.variants) {
    const double train_loss = v.training.epoch_loss_e.empty() ? std::nan("") : v.training.epoch_loss_e.back();
    os << v.variant << ',' << format_double(v.error.mean_l1) << ',' << format_double(v.error.end_l1) << ','
       << format_double(v.mean_psnr) << ',' << format_double(v.mean_ssim) << ','
       << (std::isnan(train_loss) ? std::string() : format_double(train_loss)) << '\n';
  }
}

nlohmann::json frames_index(const GeneratedDataset& data) {
  json frames = json::array();
  for (const Frame& f : data.frames) {
    char name[64];
    std::snprintf(name, sizeof name, "%s_%04zu.ppm", f.train ? "train" : "eval", f.index);
    frames.push_back({{"index", f.index}, {"t", f.t}, {"split", f.train ? "train" : "eval"}, {"camera", f.camera},
                      {"file", std::string("frames/") + name}});
  }
  return {{"t_split", data.t_split}, {"n_train", data.n_train}, {"frames", frames}};
}

void write_generated(const std::filesystem::path& dir, const SceneSpec& spec, const GeneratedDataset& data) {
  std::filesystem::create_directories(dir / "frames");
  SceneSpec stored = spec;
  stored.observed_t_max = data.t_split;
  std::ofstream(dir / "scene.json") << scene_to_json(stored) << '\n';
  const json index = frames_index(data);
  for (std::size_t i = 0; i < data.frames.size(); ++i)
    write_ppm(dir / index["frames"][i]["file"].get<std::string>(), data.frames[i].image);
  std::ofstream(dir / "frames.json") << index.dump(1) << '\n';
  write_trajectories(dir / "truth.ogtj", data.truth);
}

StoredScene read_generated(const std::filesystem::path& dir) {
  require_file(dir / "scene.json", "scene description");
  require_file(dir / "frames.json", "frame index");
  require_file(dir / "truth.ogtj", "ground-truth trajectories");
  StoredScene out;
  {
    std::ifstream is(dir / "scene.json");
    std::stringstream ss;
    ss << is.rdbuf();
    out.spec = scene_from_json(ss.str());
  }
  std::ifstream is(dir / "frames.json");
  const json index = json::parse(is);
  out.t_split = index.at("t_split");
  for (const auto& f : index.at("frames")) {
    Frame fr;
    fr.index = f.at("index");
    fr.t = f.at("t");
    fr.train = f.at("split") == "train";
    fr.camera = f.at("camera");
    const auto file = dir / f.at("file").get<std::string>();
    require_file(file, "frame image");
    fr.image = read_ppm(file);
    out.frames.push_back(std::move(fr));
  }
  out.truth = read_trajectories(dir / "truth.ogtj");
  return out;
}

}  // namespace odegs
