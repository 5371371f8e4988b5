#include <algorithm>
#include <array>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>

#include "mog/cli.hpp"
#include "mog/errors.hpp"
#include "mog/oracle.hpp"

namespace mog::cli {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FileError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw FileError("write failed for " + path.string());
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

fs::path prepare_output(const ExperimentConfig& config) {
  std::error_code ec;
  fs::create_directories(config.output_dir, ec);
  if (ec) throw FileError("cannot create " + config.output_dir.string() + ": " + ec.message());
  json echo = config_to_json(config);
  write_json(config.output_dir / "config.json", echo);
  return config.output_dir;
}

std::string num(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

json manifest(const ExperimentConfig& config) {
  const json c = config_to_json(config);
  return {{"schema_version", kSchemaVersion},
          {"family", c["family"]},
          {"schedule", c["schedule"]},
          {"train", c["train"]}};
}

std::string loss_csv(const std::vector<double>& loss) {
  std::ostringstream os;
  os << "iteration,loss\n";
  for (std::size_t i = 0; i < loss.size(); ++i) os << i + 1 << ',' << num(loss[i]) << '\n';
  return os.str();
}

std::vector<std::array<double, 2>> read_points_csv(const fs::path& path, int& label) {
  std::ifstream in(path);
  if (!in) throw FileError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("x,y", 0) != 0)
    throw FormatError(path.string() + ": expected a header starting with x,y");
  std::vector<std::array<double, 2>> points;
  label = -1;
  for (std::size_t row = 2; std::getline(in, line); ++row) {
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string x, y, l;
    std::getline(fields, x, ',');
    std::getline(fields, y, ',');
    std::getline(fields, l, ',');
    try {
      points.push_back({std::stod(x), std::stod(y)});
      if (label < 0 && !l.empty()) label = std::stoi(l);
    } catch (const std::exception&) {
      throw FormatError(path.string() + ": bad row " + std::to_string(row));
    }
  }
  return points;
}

}  // namespace

TrainConfig train_config(const ModelRecipe& recipe, const NoiseSchedule& schedule) {
  TrainConfig t;
  t.iterations = recipe.iterations;
  t.batch_size = recipe.batch_size;
  t.learning_rate = recipe.learning_rate;
  t.p_uncond = recipe.p_uncond;
  t.rng_seed = recipe.train_seed;
  t.schedule = schedule;
  return t;
}

MlpDenoiser init_model(const ModelRecipe& recipe, const LabeledMixtureFamily& family, int steps) {
  return init_mlp(recipe.hidden_dim, recipe.num_hidden_layers,
                  static_cast<int>(family.num_classes()), recipe.init_seed, steps);
}

GuidanceMethod::Kind parse_method_kind(const std::string& name) {
  using K = GuidanceMethod::Kind;
  for (K k : {K::none, K::cfg, K::ag, K::pg, K::hg})
    if (to_string(k) == name) return k;
  throw ConfigError("unknown guidance method '" + name + "'");
}

GuidanceMethod make_method(const SampleSettings& s) {
  const HgOrder order = parse_hg_order(s.hg_order);
  GuidanceMethod m = GuidanceMethod::from_name(s.method, s.weights);
  if (m.kind() == GuidanceMethod::Kind::hg && order != HgOrder::cfg_inner)
    return GuidanceMethod::hg({s.weights[0], s.weights[1], s.weights[2]}, order);
  return m;
}

SampleOutcome run_sample(const SampleSettings& s, const RoleMap& denoisers,
                         const LabeledMixtureFamily& family, const NoiseSchedule& schedule,
                         const MetricOptions& metrics) {
  const GuidanceMethod method = make_method(s);
  const SamplerConfig sampler =
      make_sampler_config(schedule.steps(), s.num_steps, s.rng_seed, s.stochastic);
  SampleOutcome out;
  out.run = sample_batch(method, denoisers, s.label, s.n, sampler, schedule);
  out.metrics = compute_metrics(out.run.samples, family.by_label(s.label),
                                default_bounding_box(family), metrics);
  out.metrics.nfe = out.run.nfe;
  return out;
}

Models load_models(const ExperimentConfig& config) {
  const fs::path dir = config.output_dir / "checkpoints";
  const fs::path manifest_path = config.output_dir / "models.json";
  std::ifstream in(manifest_path);
  if (!in)
    throw ConfigError("no trained models in " + config.output_dir.string() + "; run `train` first");
  const json stored = json::parse(in, nullptr, false);
  if (stored.is_discarded()) throw FormatError(manifest_path.string() + ": invalid JSON");
  if (stored != manifest(config))
    throw ConfigError(manifest_path.string() +
                      ": checkpoints were trained with a different family, schedule or recipe; "
                      "rerun `train`");
  return {load_checkpoint(dir / "good.ckpt"), load_checkpoint(dir / "bad.ckpt")};
}

int cmd_dataset(const ExperimentConfig& config, std::ostream& log) {
  const fs::path out = prepare_output(config);
  const LabeledMixtureFamily family = build_fractal_family(config.family);
  write_json(out / "family.json", json(family));
  const ClassMixture all = family.marginal();
  SvgOptions svg;
  svg.title = "ground truth, " + std::to_string(all.components.size()) + " components";
  render_scatter_svg(Points(2, 0), all, default_bounding_box(family), out / "dataset.svg", svg);
  log << "dataset: " << family.num_classes() << " classes, " << all.components.size()
      << " components -> " << (out / "family.json").string() << '\n';
  return kOk;
}

int cmd_train(const ExperimentConfig& config, std::ostream& log) {
  const fs::path out = prepare_output(config);
  fs::create_directories(out / "checkpoints");
  // a half-finished run must not leave a manifest vouching for stale checkpoints
  fs::remove(out / "models.json");
  const LabeledMixtureFamily family = build_fractal_family(config.family);
  const NoiseSchedule schedule = make_cosine_schedule(config.schedule_steps);

  for (const auto& [name, recipe] : {std::pair{"good", config.good}, std::pair{"bad", config.bad}}) {
    const auto start = std::chrono::steady_clock::now();
    TrainResult r = train(init_model(recipe, family, config.schedule_steps), family,
                          train_config(recipe, schedule));
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    save_checkpoint(r.model, out / "checkpoints" / (std::string(name) + ".ckpt"));
    write_text(out / ("loss_" + std::string(name) + ".csv"), loss_csv(r.loss));
    std::ostringstream line;
    line << "train " << name << ": d=" << recipe.hidden_dim << " M=" << recipe.iterations;
    if (!r.loss.empty()) line << " final loss " << r.loss.back();
    line << std::fixed << std::setprecision(1) << " (" << secs << " s)";
    log << line.str() << '\n';
  }
  write_json(out / "models.json", manifest(config));
  return kOk;
}

namespace {

// Owns whichever denoisers a command needs and exposes them as roles.
struct DenoiserSet {
  std::optional<Models> models;
  std::optional<AnalyticDenoiser> oracle;
  RoleMap roles;

  DenoiserSet(const ExperimentConfig& config, const LabeledMixtureFamily& family,
              const NoiseSchedule& schedule, bool use_oracle) {
    if (use_oracle) {
      oracle.emplace(family, schedule);
      roles = make_role_map(&*oracle, nullptr);
    } else {
      models = load_models(config);
      roles = make_role_map(&models->good, &models->bad);
    }
  }
  DenoiserSet(const DenoiserSet&) = delete;
};

}  // namespace

int cmd_sample(const ExperimentConfig& config, std::ostream& log) {
  const LabeledMixtureFamily family = build_fractal_family(config.family);
  const NoiseSchedule schedule = make_cosine_schedule(config.schedule_steps);
  const SampleSettings& s = config.sample;
  const DenoiserSet d(config, family, schedule, s.denoiser == "oracle");

  const fs::path out = prepare_output(config);
  const SampleOutcome r = run_sample(s, d.roles, family, schedule, config.metrics);
  write_text(out / "samples.csv", samples_csv(r.run));

  json report = r.run;
  report["schema_version"] = kSchemaVersion;
  report["label"] = s.label;
  report["denoiser"] = s.denoiser;
  report["metrics"] = r.metrics;
  write_json(out / "run.json", report);

  SvgOptions svg;
  svg.title = r.run.method + " label " + std::to_string(s.label);
  render_scatter_svg(r.run.samples, family.by_label(s.label), default_bounding_box(family),
                     out / "samples.svg", svg);

  log << "sample " << r.run.method << ": n=" << r.metrics.n_samples << " nfe=" << r.run.nfe
      << " outliers=" << r.metrics.outlier_fraction << " coverage=" << r.metrics.mode_coverage
      << " kl=" << r.metrics.hist_kl << '\n';
  if (!r.metrics.warning.empty()) log << "warning: " << r.metrics.warning << '\n';
  return kOk;
}

int cmd_sweep(const ExperimentConfig& config, std::ostream& log) {
  const LabeledMixtureFamily family = build_fractal_family(config.family);
  const NoiseSchedule schedule = make_cosine_schedule(config.schedule_steps);
  const SampleSettings& s = config.sample;
  const DenoiserSet d(config, family, schedule, s.denoiser == "oracle");

  const fs::path out = prepare_output(config);
  SweepSetup setup;
  setup.denoisers = &d.roles;
  setup.family = &family;
  setup.schedule = &schedule;
  setup.label = s.label;
  setup.n_samples = config.sweep.n;
  setup.sampler = make_sampler_config(schedule.steps(), s.num_steps, s.rng_seed, s.stochastic);
  setup.metrics = config.metrics;
  setup.box = default_bounding_box(family);

  const SweepResult result =
      sweep_grid(parse_method_kind(config.sweep.method), config.sweep.axes, setup);
  write_text(out / "sweep.csv", sweep_csv(result));
  json j = result;
  j["schema_version"] = kSchemaVersion;
  write_json(out / "sweep.json", j);
  log << "sweep " << result.method << ": " << result.cells.size() << " cells -> "
      << (out / "sweep.csv").string() << '\n';
  return kOk;
}

int cmd_decompose(const ExperimentConfig& config, std::ostream& log) {
  const LabeledMixtureFamily family = build_fractal_family(config.family);
  const NoiseSchedule schedule = make_cosine_schedule(config.schedule_steps);
  const DecomposeSettings& dc = config.decompose;

  std::optional<Models> models;
  std::optional<AnalyticDenoiser> oracle;
  const Denoiser* uncond = nullptr;
  if (dc.uncond == "oracle") {
    oracle.emplace(family, schedule);
    uncond = &*oracle;
  } else {
    models = load_models(config);
    uncond = dc.uncond == "good" ? static_cast<const Denoiser*>(&models->good) : &models->bad;
  }

  const fs::path out = prepare_output(config);
  const BoundingBox box = default_bounding_box(family);
  Points grid(2, static_cast<Eigen::Index>(dc.grid) * dc.grid);
  for (int iy = 0; iy < dc.grid; ++iy)
    for (int ix = 0; ix < dc.grid; ++ix)
      grid.col(iy * dc.grid + ix) =
          box.lo + Vec2(ix / double(dc.grid - 1), iy / double(dc.grid - 1)).cwiseProduct(box.hi - box.lo);
  Points eps_uncond(2, grid.cols());
  uncond->predict_batch(grid, dc.t, Condition::null(), eps_uncond);

  std::ostringstream csv;
  csv << "x,y,score_correction_x,score_correction_y,condition_alignment_x,"
         "condition_alignment_y,total_x,total_y\n";
  double max_residual = 0.0;
  for (Eigen::Index i = 0; i < grid.cols(); ++i) {
    const Vec2 z = grid.col(i);
    const CfgDecomposition t =
        decompose_cfg_direction(family, dc.label, eps_uncond.col(i), z, dc.t, schedule);
    max_residual =
        std::max(max_residual, (t.score_correction + t.condition_alignment - t.total).norm());
    csv << num(z.x()) << ',' << num(z.y()) << ',' << num(t.score_correction.x()) << ','
        << num(t.score_correction.y()) << ',' << num(t.condition_alignment.x()) << ','
        << num(t.condition_alignment.y()) << ',' << num(t.total.x()) << ',' << num(t.total.y())
        << '\n';
  }
  write_text(out / "decompose.csv", csv.str());
  log << "decompose: t=" << dc.t << " uncond=" << dc.uncond << " " << grid.cols()
      << " points, max |sc + ca - total| = " << max_residual << '\n';
  return kOk;
}

int cmd_plot(const ExperimentConfig& config, const fs::path& samples_csv_path, const fs::path& svg,
             std::ostream& log) {
  const LabeledMixtureFamily family = build_fractal_family(config.family);
  int label = -1;
  const auto rows = read_points_csv(samples_csv_path, label);
  Points samples(2, static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    samples.col(static_cast<Eigen::Index>(i)) = Vec2(rows[i][0], rows[i][1]);
  const ClassMixture mixture = label >= 0 ? family.by_label(label) : family.marginal();
  SvgOptions options;
  options.title = samples_csv_path.filename().string();
  render_scatter_svg(samples, mixture, default_bounding_box(family), svg, options);
  log << "plot: " << rows.size() << " points -> " << svg.string() << '\n';
  return kOk;
}

}  // namespace mog::cli
