#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mog/eval.hpp"
#include "mog/mixture.hpp"
#include "mog/mlp.hpp"
#include "mog/oracle.hpp"
#include "mog/sampler.hpp"

namespace mog::cli {

inline constexpr int kSchemaVersion = 1;

enum ExitCode : int {
  kOk = 0,
  kConfigFailure = 2,
  kNumericFailure = 3,
  kPropertyFailure = 4,
};

// How one MLP denoiser is initialized and trained.
struct ModelRecipe {
  int hidden_dim = 64;
  int num_hidden_layers = 3;
  std::uint64_t init_seed = 11;
  std::size_t iterations = 4096;
  std::size_t batch_size = 512;
  double learning_rate = 3e-3;
  double p_uncond = 0.1;
  std::uint64_t train_seed = 1;
};

struct SampleSettings {
  std::string method = "none";  // none | cfg | ag | pg | hg
  std::vector<double> weights;
  std::string hg_order = "cfg_inner";
  int label = 0;
  std::size_t n = 20000;
  int num_steps = 128;
  bool stochastic = true;
  std::uint64_t rng_seed = 21;
  std::string denoiser = "mlp";  // mlp | oracle
};

struct SweepSettings {
  std::string method = "hg";
  std::vector<std::vector<double>> axes{{1.0, 1.5, 2.0}, {1.0, 1.5, 2.0}, {1.5, 2.0, 2.5}};
  std::size_t n = 5000;
};

struct DecomposeSettings {
  int t = 32;
  int grid = 64;
  int label = 0;
  std::string uncond = "bad";  // bad | good | oracle
};

struct ExperimentConfig {
  int schema_version = kSchemaVersion;
  std::filesystem::path output_dir = "out";
  FractalConfig family;
  int schedule_steps = 128;
  ModelRecipe good;
  ModelRecipe bad{32, 3, 12, 512, 512, 3e-3, 0.1, 2};
  SampleSettings sample;
  MetricOptions metrics;
  SweepSettings sweep;
  DecomposeSettings decompose;
};

// Strict parsing: unknown keys and wrong types raise ConfigError naming the
// offending field path (for example "sample.weights[1]").
ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& config);
ExperimentConfig load_config(const std::filesystem::path& path);

// Applies "a.b.c=value" to a config document. The value is parsed as JSON
// when possible and taken as a string otherwise.
void apply_override(nlohmann::json& doc, const std::string& assignment);

// Shared building blocks, also used by the acceptance binary.
struct Models {
  MlpDenoiser good;
  MlpDenoiser bad;
};

TrainConfig train_config(const ModelRecipe& recipe, const NoiseSchedule& schedule);
MlpDenoiser init_model(const ModelRecipe& recipe, const LabeledMixtureFamily& family, int steps);
GuidanceMethod make_method(const SampleSettings& s);
// "none" | "cfg" | "ag" | "pg" | "hg"; ConfigError otherwise.
GuidanceMethod::Kind parse_method_kind(const std::string& name);

struct SampleOutcome {
  RunReport run;
  MetricReport metrics;
};

SampleOutcome run_sample(const SampleSettings& settings, const RoleMap& denoisers,
                         const LabeledMixtureFamily& family, const NoiseSchedule& schedule,
                         const MetricOptions& metrics);

// Subcommands. Each writes into config.output_dir and logs progress to `log`.
int cmd_dataset(const ExperimentConfig& config, std::ostream& log);
int cmd_train(const ExperimentConfig& config, std::ostream& log);
int cmd_sample(const ExperimentConfig& config, std::ostream& log);
int cmd_verify(std::ostream& log);
int cmd_sweep(const ExperimentConfig& config, std::ostream& log);
int cmd_decompose(const ExperimentConfig& config, std::ostream& log);
int cmd_plot(const ExperimentConfig& config, const std::filesystem::path& samples_csv,
             const std::filesystem::path& svg, std::ostream& log);

// Checkpoints written by cmd_train, validated against the current config.
Models load_models(const ExperimentConfig& config);

// Full command-line entry point; returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mog::cli
