#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Core>

#include "mog/denoiser.hpp"
#include "mog/diffusion.hpp"
#include "mog/mixture.hpp"

namespace mog {

// Small MLP eps-predictor.
//
// Input features, in order: z (2), Fourier features of t/T (8 sines then
// 8 cosines), class embedding (8). Hidden layers use SiLU; the 2-unit linear
// output is zero-initialized so an untrained model predicts eps = 0.
//
// All parameters live in one flat vector, laid out as
//   embedding [embed_dim x (num_classes + 1)], the last column being the
//   null condition; then for each layer, weight [out x in] then bias [out].
// Matrices are stored column-major.
class MlpDenoiser final : public Denoiser {
 public:
  static constexpr int kEmbedDim = 8;
  static constexpr int kTimeFrequencies = 8;
  static constexpr int kInputDim = 2 + 2 * kTimeFrequencies + kEmbedDim;

  struct Architecture {
    int hidden_dim = 64;
    int num_hidden_layers = 3;
    int num_classes = 2;
    int time_steps = 128;  // T used to normalize t

    friend bool operator==(const Architecture&, const Architecture&) = default;
  };

  MlpDenoiser(Architecture arch, std::uint64_t rng_seed);

  void predict_batch(const Points& z, int t, Condition condition, Points& out) const override;
  // Per-sample conditions: condition_index[i] in [0, num_classes], the last
  // value selecting the null row.
  void forward(const Points& z, const std::vector<int>& t, const std::vector<int>& condition_index,
               Points& out) const;

  const Architecture& architecture() const { return arch_; }
  std::uint64_t rng_seed() const { return rng_seed_; }
  std::size_t iterations_completed() const { return iterations_; }
  void set_iterations_completed(std::size_t m) { iterations_ = m; }

  int null_index() const { return arch_.num_classes; }
  int condition_index(Condition condition) const;

  Eigen::VectorXd& parameters() { return params_; }
  const Eigen::VectorXd& parameters() const { return params_; }
  std::size_t embedding_rows() const { return static_cast<std::size_t>(arch_.num_classes) + 1; }

  static std::size_t parameter_count(const Architecture& arch);

  // Loss (mean over the batch of the squared eps error) and its gradient
  // with respect to parameters(). gradient must have parameter_count() entries.
  double loss_and_gradient(const Points& z, const std::vector<int>& t,
                           const std::vector<int>& condition_index, const Points& eps_target,
                           Eigen::VectorXd& gradient) const;

 private:
  struct Layer {
    std::size_t weight_offset;
    std::size_t bias_offset;
    int in;
    int out;
  };

  Eigen::MatrixXd features(const Points& z, const std::vector<int>& t,
                           const std::vector<int>& condition_index) const;

  Architecture arch_;
  std::uint64_t rng_seed_;
  std::size_t iterations_ = 0;
  std::vector<Layer> layers_;
  Eigen::VectorXd params_;
};

MlpDenoiser init_mlp(int hidden_dim, int num_hidden_layers, int num_classes, std::uint64_t rng_seed,
                     int time_steps = 128);

struct TrainConfig {
  std::size_t iterations = 4096;
  std::size_t batch_size = 512;
  double learning_rate = 3e-3;
  double p_uncond = 0.1;
  std::uint64_t rng_seed = 1;
  NoiseSchedule schedule = make_cosine_schedule(128);

  void validate() const;
};

struct TrainingBatch {
  Points z_t;
  Points eps;
  std::vector<int> t;
  std::vector<int> condition_index;  // num_classes marks the null condition
};

// Draws one batch: (z0, c) from the family, t uniform in 1..T, eps ~ N(0, I),
// and c replaced by the null condition with probability p_uncond.
TrainingBatch draw_training_batch(const LabeledMixtureFamily& family,
                                  const std::vector<MixtureSampler>& samplers,
                                  const TrainConfig& config, Rng& rng);

struct TrainResult {
  MlpDenoiser model;
  std::vector<double> loss;  // one entry per iteration
};

// Adam on the squared eps error. Throws TrainingDivergedError on a
// non-finite loss.
TrainResult train(MlpDenoiser model, const LabeledMixtureFamily& family, const TrainConfig& config);

Vec2 predict_eps(const MlpDenoiser& model, const Vec2& z, int t, Condition condition);

// Layout: "MOG1", a one-line JSON header, then the raw little-endian float64
// parameter blob.
void save_checkpoint(const MlpDenoiser& model, const std::filesystem::path& path);
MlpDenoiser load_checkpoint(const std::filesystem::path& path);

}  // namespace mog
