#include "mog/mlp.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <string>

#include <nlohmann/json.hpp>

#include "mog/errors.hpp"

namespace mog {

namespace {

constexpr char kMagic[4] = {'M', 'O', 'G', '1'};
constexpr int kFormatVersion = 1;

double silu(double a) { return a / (1.0 + std::exp(-a)); }

double silu_grad(double a) {
  const double s = 1.0 / (1.0 + std::exp(-a));
  return s * (1.0 + a * (1.0 - s));
}

double time_frequency(int j) { return std::numbers::pi * std::ldexp(0.5, j); }

void check_step(int t, int steps) {
  if (t < 1 || t > steps)
    throw IndexError("denoiser step " + std::to_string(t) + " outside [1, " +
                     std::to_string(steps) + "]");
}

}  // namespace

std::size_t MlpDenoiser::parameter_count(const Architecture& a) {
  const std::size_t d = static_cast<std::size_t>(a.hidden_dim);
  std::size_t n = kEmbedDim * (static_cast<std::size_t>(a.num_classes) + 1);
  n += d * kInputDim + d;
  n += static_cast<std::size_t>(a.num_hidden_layers - 1) * (d * d + d);
  n += 2 * d + 2;
  return n;
}

MlpDenoiser::MlpDenoiser(Architecture arch, std::uint64_t rng_seed)
    : arch_(arch), rng_seed_(rng_seed) {
  if (arch.hidden_dim < 1) throw ParameterError("hidden_dim must be >= 1");
  if (arch.num_hidden_layers < 1) throw ParameterError("num_hidden_layers must be >= 1");
  if (arch.num_classes < 1) throw ParameterError("num_classes must be >= 1");
  if (arch.time_steps < 2) throw ParameterError("time_steps must be >= 2");

  std::size_t offset = kEmbedDim * embedding_rows();
  int in = kInputDim;
  for (int l = 0; l <= arch.num_hidden_layers; ++l) {
    const int out = l == arch.num_hidden_layers ? 2 : arch.hidden_dim;
    layers_.push_back({offset, offset + static_cast<std::size_t>(out) * in, in, out});
    offset += static_cast<std::size_t>(out) * in + out;
    in = out;
  }
  params_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(offset));

  Rng rng = make_rng(rng_seed, {0x696e6974ULL});
  std::normal_distribution<double> normal;
  for (std::size_t i = 0; i < kEmbedDim * embedding_rows(); ++i) params_[i] = normal(rng);
  for (std::size_t l = 0; l + 1 < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer.in));
    std::uniform_real_distribution<double> uniform(-bound, bound);
    for (std::size_t i = layer.weight_offset; i < layer.bias_offset + layer.out; ++i)
      params_[i] = uniform(rng);
  }
  // output layer stays zero
}

int MlpDenoiser::condition_index(Condition condition) const {
  if (condition.is_null()) return null_index();
  if (condition.label() >= arch_.num_classes)
    throw LookupError("unknown class label " + std::to_string(condition.label()));
  return condition.label();
}

Eigen::MatrixXd MlpDenoiser::features(const Points& z, const std::vector<int>& t,
                                      const std::vector<int>& condition_index) const {
  const Eigen::Index n = z.cols();
  Eigen::MatrixXd x(kInputDim, n);
  const Eigen::Map<const Eigen::MatrixXd> embedding(params_.data(), kEmbedDim,
                                                    static_cast<Eigen::Index>(embedding_rows()));
  for (Eigen::Index i = 0; i < n; ++i) {
    check_step(t[i], arch_.time_steps);
    x(0, i) = z(0, i);
    x(1, i) = z(1, i);
    const double u = static_cast<double>(t[i]) / arch_.time_steps;
    for (int j = 0; j < kTimeFrequencies; ++j) {
      x(2 + j, i) = std::sin(time_frequency(j) * u);
      x(2 + kTimeFrequencies + j, i) = std::cos(time_frequency(j) * u);
    }
    x.block<kEmbedDim, 1>(2 + 2 * kTimeFrequencies, i) = embedding.col(condition_index[i]);
  }
  return x;
}

void MlpDenoiser::forward(const Points& z, const std::vector<int>& t,
                          const std::vector<int>& condition_index, Points& out) const {
  Eigen::MatrixXd h = features(z, t, condition_index);
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    const Eigen::Map<const Eigen::MatrixXd> w(params_.data() + layer.weight_offset, layer.out,
                                              layer.in);
    const Eigen::Map<const Eigen::VectorXd> b(params_.data() + layer.bias_offset, layer.out);
    Eigen::MatrixXd a = w * h;
    a.colwise() += b;
    if (l + 1 < layers_.size()) a = a.unaryExpr(&silu);
    h = std::move(a);
  }
  out = h;
  if (!out.allFinite()) throw NumericError("denoiser produced a non-finite prediction");
}

void MlpDenoiser::predict_batch(const Points& z, int t, Condition condition, Points& out) const {
  const std::size_t n = static_cast<std::size_t>(z.cols());
  forward(z, std::vector<int>(n, t), std::vector<int>(n, condition_index(condition)), out);
}

double MlpDenoiser::loss_and_gradient(const Points& z, const std::vector<int>& t,
                                      const std::vector<int>& condition_index,
                                      const Points& eps_target, Eigen::VectorXd& gradient) const {
  const Eigen::Index n = z.cols();
  gradient.setZero(params_.size());

  std::vector<Eigen::MatrixXd> inputs;  // input to each layer
  std::vector<Eigen::MatrixXd> pre;     // pre-activation of each hidden layer
  inputs.push_back(features(z, t, condition_index));
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    const Eigen::Map<const Eigen::MatrixXd> w(params_.data() + layer.weight_offset, layer.out,
                                              layer.in);
    const Eigen::Map<const Eigen::VectorXd> b(params_.data() + layer.bias_offset, layer.out);
    Eigen::MatrixXd a = w * inputs.back();
    a.colwise() += b;
    if (l + 1 < layers_.size()) {
      inputs.push_back(a.unaryExpr(&silu));
      pre.push_back(std::move(a));
    } else {
      pre.push_back(std::move(a));
    }
  }

  const Eigen::MatrixXd residual = pre.back() - eps_target;
  const double loss = residual.squaredNorm() / static_cast<double>(n);
  Eigen::MatrixXd delta = (2.0 / static_cast<double>(n)) * residual;

  for (std::size_t l = layers_.size(); l-- > 0;) {
    const auto& layer = layers_[l];
    if (l + 1 < layers_.size()) delta.array() *= pre[l].unaryExpr(&silu_grad).array();
    Eigen::Map<Eigen::MatrixXd> gw(gradient.data() + layer.weight_offset, layer.out, layer.in);
    Eigen::Map<Eigen::VectorXd> gb(gradient.data() + layer.bias_offset, layer.out);
    gw.noalias() = delta * inputs[l].transpose();
    gb = delta.rowwise().sum();
    const Eigen::Map<const Eigen::MatrixXd> w(params_.data() + layer.weight_offset, layer.out,
                                              layer.in);
    delta = w.transpose() * delta;
  }

  Eigen::Map<Eigen::MatrixXd> gembed(gradient.data(), kEmbedDim,
                                     static_cast<Eigen::Index>(embedding_rows()));
  for (Eigen::Index i = 0; i < n; ++i)
    gembed.col(condition_index[i]) += delta.block<kEmbedDim, 1>(2 + 2 * kTimeFrequencies, i);
  return loss;
}

MlpDenoiser init_mlp(int hidden_dim, int num_hidden_layers, int num_classes,
                     std::uint64_t rng_seed, int time_steps) {
  return MlpDenoiser({hidden_dim, num_hidden_layers, num_classes, time_steps}, rng_seed);
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw ParameterError("batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw ParameterError("learning_rate must be positive");
  if (!(p_uncond >= 0.0 && p_uncond < 1.0)) throw ParameterError("p_uncond must lie in [0, 1)");
}

TrainingBatch draw_training_batch(const LabeledMixtureFamily& family,
                                  const std::vector<MixtureSampler>& samplers,
                                  const TrainConfig& config, Rng& rng) {
  const std::size_t n = config.batch_size;
  const int steps = config.schedule.steps();
  const int null_index = static_cast<int>(family.num_classes());
  std::discrete_distribution<int> pick_class(family.class_prior.begin(), family.class_prior.end());
  std::uniform_int_distribution<int> pick_step(1, steps);
  std::bernoulli_distribution drop(config.p_uncond);
  std::normal_distribution<double> normal;

  TrainingBatch batch;
  batch.z_t.resize(2, static_cast<Eigen::Index>(n));
  batch.eps.resize(2, static_cast<Eigen::Index>(n));
  batch.t.resize(n);
  batch.condition_index.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int c = pick_class(rng);
    const Vec2 z0 = samplers[static_cast<std::size_t>(c)](rng);
    const int t = pick_step(rng);
    const double e0 = normal(rng);
    const double e1 = normal(rng);
    const Vec2 eps(e0, e1);
    const bool dropped = drop(rng);
    batch.z_t.col(static_cast<Eigen::Index>(i)) = forward_diffuse(z0, t, eps, config.schedule);
    batch.eps.col(static_cast<Eigen::Index>(i)) = eps;
    batch.t[i] = t;
    batch.condition_index[i] = dropped ? null_index : c;
  }
  return batch;
}

TrainResult train(MlpDenoiser model, const LabeledMixtureFamily& family, const TrainConfig& config) {
  config.validate();
  validate(family);
  if (model.architecture().num_classes != static_cast<int>(family.num_classes()))
    throw ParameterError("model class count does not match the family");
  if (model.architecture().time_steps != config.schedule.steps())
    throw ParameterError("model time_steps does not match the training schedule");

  std::vector<MixtureSampler> samplers;
  for (const auto& cls : family.classes) samplers.emplace_back(cls);

  constexpr double beta1 = 0.9;
  constexpr double beta2 = 0.999;
  constexpr double adam_eps = 1e-8;

  Rng rng = make_rng(config.rng_seed, {0x747261696eULL});
  Eigen::VectorXd& theta = model.parameters();
  Eigen::VectorXd grad(theta.size());
  Eigen::VectorXd m = Eigen::VectorXd::Zero(theta.size());
  Eigen::VectorXd v = Eigen::VectorXd::Zero(theta.size());

  TrainResult result{model, {}};
  result.loss.reserve(config.iterations);
  double b1 = 1.0;
  double b2 = 1.0;
  for (std::size_t step = 0; step < config.iterations; ++step) {
    const TrainingBatch batch = draw_training_batch(family, samplers, config, rng);
    const double loss =
        model.loss_and_gradient(batch.z_t, batch.t, batch.condition_index, batch.eps, grad);
    if (!std::isfinite(loss) || !grad.allFinite())
      throw TrainingDivergedError(step, "training diverged at step " + std::to_string(step));
    result.loss.push_back(loss);

    b1 *= beta1;
    b2 *= beta2;
    m = beta1 * m + (1.0 - beta1) * grad;
    v = beta2 * v + (1.0 - beta2) * grad.cwiseAbs2();
    const double lr = config.learning_rate * std::sqrt(1.0 - b2) / (1.0 - b1);
    theta.array() -= lr * m.array() / (v.array().sqrt() + adam_eps);
  }
  model.set_iterations_completed(model.iterations_completed() + config.iterations);
  result.model = std::move(model);
  return result;
}

Vec2 predict_eps(const MlpDenoiser& model, const Vec2& z, int t, Condition condition) {
  return model.predict(z, t, condition);
}

void save_checkpoint(const MlpDenoiser& model, const std::filesystem::path& path) {
  const auto& a = model.architecture();
  const nlohmann::json header = {
      {"format_version", kFormatVersion},
      {"hidden_dim", a.hidden_dim},
      {"num_hidden_layers", a.num_hidden_layers},
      {"num_classes", a.num_classes},
      {"time_steps", a.time_steps},
      {"embed_dim", MlpDenoiser::kEmbedDim},
      {"time_frequencies", MlpDenoiser::kTimeFrequencies},
      {"rng_seed", model.rng_seed()},
      {"iterations", model.iterations_completed()},
      {"param_count", model.parameters().size()},
  };
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FileError("cannot open " + path.string() + " for writing");
  out.write(kMagic, sizeof kMagic);
  const std::string text = header.dump() + "\n";
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (double p : model.parameters()) {
    auto bits = std::bit_cast<std::uint64_t>(p);
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
    char bytes[8];
    std::memcpy(bytes, &bits, 8);
    out.write(bytes, 8);
  }
  if (!out) throw FileError("failed writing " + path.string());
}

MlpDenoiser load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileError("cannot open " + path.string());
  char magic[4] = {};
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw FormatError(path.string() + ": not a checkpoint (bad magic bytes)");
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path.string() + ": truncated header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": corrupt header: " + e.what());
  }
  try {
    if (header.at("format_version").get<int>() != kFormatVersion)
      throw FormatError(path.string() + ": unsupported format_version " +
                        header.at("format_version").dump());
    if (header.at("embed_dim").get<int>() != MlpDenoiser::kEmbedDim ||
        header.at("time_frequencies").get<int>() != MlpDenoiser::kTimeFrequencies)
      throw FormatError(path.string() + ": feature layout mismatch");
    MlpDenoiser::Architecture arch{header.at("hidden_dim").get<int>(),
                                   header.at("num_hidden_layers").get<int>(),
                                   header.at("num_classes").get<int>(),
                                   header.at("time_steps").get<int>()};
    MlpDenoiser model(arch, header.at("rng_seed").get<std::uint64_t>());
    model.set_iterations_completed(header.at("iterations").get<std::size_t>());
    const auto count = header.at("param_count").get<std::size_t>();
    if (count != MlpDenoiser::parameter_count(arch))
      throw FormatError(path.string() + ": parameter count does not match architecture");
    auto& params = model.parameters();
    for (std::size_t i = 0; i < count; ++i) {
      char bytes[8];
      in.read(bytes, 8);
      if (!in) throw FormatError(path.string() + ": truncated parameter blob");
      std::uint64_t bits;
      std::memcpy(&bits, bytes, 8);
      if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
      params[static_cast<Eigen::Index>(i)] = std::bit_cast<double>(bits);
    }
    if (in.peek() != std::char_traits<char>::eof())
      throw FormatError(path.string() + ": trailing bytes after parameter blob");
    if (!params.allFinite()) throw FormatError(path.string() + ": non-finite parameters");
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": malformed header: " + e.what());
  } catch (const ParameterError& e) {
    throw FormatError(path.string() + ": invalid architecture: " + e.what());
  }
}

}  // namespace mog
