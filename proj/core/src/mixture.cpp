#include "mog/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "mog/errors.hpp"

namespace mog {

namespace {

constexpr double kSumTolerance = 1e-12;

double log_sum_exp(const std::vector<double>& terms) {
  const double peak = *std::max_element(terms.begin(), terms.end());
  if (!std::isfinite(peak)) return peak;
  double acc = 0.0;
  for (double v : terms) acc += std::exp(v - peak);
  return peak + std::log(acc);
}

Mat2 oriented_covariance(double angle, double major, double minor) {
  const Vec2 d(std::cos(angle), std::sin(angle));
  const Vec2 n(-d.y(), d.x());
  Mat2 cov = major * d * d.transpose() + minor * n * n.transpose();
  // exact symmetry; the two outer products round independently
  cov(1, 0) = cov(0, 1);
  return cov;
}

struct Builder {
  const FractalConfig& config;
  Rng& rng;
  std::vector<GaussianComponent>& out;

  void grow(const Vec2& position, double direction, int level, double weight) {
    if (level == config.depth) {
      const double major = config.root_major_variance * std::pow(config.scale_decay, level);
      out.push_back({weight, position,
                     oriented_covariance(direction, major, major * config.anisotropy_ratio)});
      return;
    }
    std::uniform_real_distribution<double> jitter(-1.0, 1.0);
    std::uniform_real_distribution<double> mass(0.5, 1.5);
    const double length = config.branch_length * std::pow(config.scale_decay, level + 1);
    for (int j = 0; j < config.branching; ++j) {
      const double angle = direction + 2.0 * std::numbers::pi * j / config.branching +
                           config.rotation_jitter * jitter(rng);
      const double share = mass(rng);
      grow(position + length * Vec2(std::cos(angle), std::sin(angle)), angle, level + 1,
           weight * share);
    }
  }
};

}  // namespace

const ClassMixture& LabeledMixtureFamily::by_label(int label) const {
  return classes[index_of(label)];
}

std::size_t LabeledMixtureFamily::index_of(int label) const {
  for (std::size_t i = 0; i < classes.size(); ++i)
    if (classes[i].label == label) return i;
  throw LookupError("unknown class label " + std::to_string(label));
}

ClassMixture LabeledMixtureFamily::marginal() const {
  ClassMixture all;
  all.label = -1;
  for (std::size_t c = 0; c < classes.size(); ++c) {
    if (class_prior[c] == 0.0) continue;
    for (const auto& comp : classes[c].components)
      all.components.push_back({comp.weight * class_prior[c], comp.mean, comp.cov});
  }
  return all;
}

void validate(const FractalConfig& c) {
  if (c.num_classes < 1) throw ParameterError("num_classes must be >= 1");
  if (c.base_components_per_class < 1)
    throw ParameterError("base_components_per_class must be >= 1");
  if (c.branching < 1) throw ParameterError("branching must be >= 1");
  if (c.depth < 0) throw ParameterError("depth must be >= 0");
  if (!(c.scale_decay > 0.0 && c.scale_decay < 1.0))
    throw ParameterError("scale_decay must lie in (0, 1)");
  if (!(c.anisotropy_ratio > 0.0 && c.anisotropy_ratio <= 1.0))
    throw ParameterError("anisotropy_ratio must lie in (0, 1]");
  if (!(c.root_major_variance > 0.0) || !std::isfinite(c.root_major_variance))
    throw ParameterError("root_major_variance must be positive");
  if (!std::isfinite(c.rotation_jitter) || !std::isfinite(c.root_radius) ||
      !std::isfinite(c.branch_length))
    throw ParameterError("geometry parameters must be finite");
}

LabeledMixtureFamily build_fractal_family(const FractalConfig& config) {
  validate(config);
  Rng rng = make_rng(config.rng_seed, {0x66726163ULL});
  LabeledMixtureFamily family;
  const int roots = config.num_classes * config.base_components_per_class;
  for (int c = 0; c < config.num_classes; ++c) {
    ClassMixture mixture;
    mixture.label = c;
    Builder builder{config, rng, mixture.components};
    for (int b = 0; b < config.base_components_per_class; ++b) {
      // classes interleave around the circle
      const double angle = 2.0 * std::numbers::pi * (b * config.num_classes + c) / roots;
      builder.grow(config.root_radius * Vec2(std::cos(angle), std::sin(angle)), angle, 0, 1.0);
    }
    double total = 0.0;
    for (const auto& comp : mixture.components) total += comp.weight;
    for (auto& comp : mixture.components) comp.weight /= total;
    family.classes.push_back(std::move(mixture));
  }
  family.class_prior.assign(config.num_classes, 1.0 / config.num_classes);
  validate(family);
  return family;
}

void validate(const GaussianComponent& comp) {
  if (!(comp.weight > 0.0) || !std::isfinite(comp.weight))
    throw ParameterError("component weight must be positive and finite");
  if (!comp.mean.allFinite()) throw ParameterError("component mean must be finite");
  if (!comp.cov.allFinite() || comp.cov(0, 1) != comp.cov(1, 0))
    throw ParameterError("component covariance must be finite and symmetric");
  const Eigen::SelfAdjointEigenSolver<Mat2> eig(comp.cov, Eigen::EigenvaluesOnly);
  if (!(eig.eigenvalues().minCoeff() > 0.0))
    throw ParameterError("component covariance must be positive-definite");
}

void validate(const ClassMixture& mixture) {
  if (mixture.components.empty()) throw ParameterError("mixture has no components");
  if (mixture.label < 0) throw ParameterError("class label must be >= 0");
  double total = 0.0;
  for (const auto& comp : mixture.components) {
    validate(comp);
    total += comp.weight;
  }
  if (std::abs(total - 1.0) > kSumTolerance)
    throw ParameterError("class " + std::to_string(mixture.label) +
                         " component weights sum to " + std::to_string(total));
}

void validate(const LabeledMixtureFamily& family) {
  if (family.classes.empty()) throw ParameterError("family has no classes");
  if (family.class_prior.size() != family.classes.size())
    throw ParameterError("class_prior length does not match class count");
  double total = 0.0;
  for (double p : family.class_prior) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw ParameterError("class_prior entries must be >= 0");
    total += p;
  }
  if (std::abs(total - 1.0) > kSumTolerance) throw ParameterError("class_prior must sum to 1");
  for (std::size_t i = 0; i < family.classes.size(); ++i) {
    validate(family.classes[i]);
    for (std::size_t j = 0; j < i; ++j)
      if (family.classes[j].label == family.classes[i].label)
        throw ParameterError("duplicate class label " + std::to_string(family.classes[i].label));
  }
}

MixtureSampler::MixtureSampler(const ClassMixture& mixture) {
  if (mixture.components.empty()) throw ParameterError("cannot sample an empty mixture");
  double acc = 0.0;
  for (const auto& comp : mixture.components) {
    acc += comp.weight;
    cdf_.push_back(acc);
    means_.push_back(comp.mean);
    factors_.push_back(Eigen::LLT<Mat2>(comp.cov).matrixL().toDenseMatrix());
  }
  for (auto& c : cdf_) c /= acc;
}

Vec2 MixtureSampler::operator()(Rng& rng) const {
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const double u = uniform(rng);
  auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  if (it == cdf_.end()) it = std::lower_bound(cdf_.begin(), cdf_.end(), cdf_.back());
  const auto k = static_cast<std::size_t>(it - cdf_.begin());
  std::normal_distribution<double> normal;
  const double e0 = normal(rng);
  const double e1 = normal(rng);
  return means_[k] + factors_[k] * Vec2(e0, e1);
}

Vec2 sample_point(const ClassMixture& mixture, Rng& rng) {
  return MixtureSampler(mixture)(rng);
}

Vec2 sample_point(const LabeledMixtureFamily& family, int label, Rng& rng) {
  return sample_point(family.by_label(label), rng);
}

double log_gaussian_density(const Vec2& z, const Vec2& mean, const Mat2& cov) {
  const double det = cov(0, 0) * cov(1, 1) - cov(0, 1) * cov(1, 0);
  const Vec2 d = z - mean;
  // closed-form 2x2 inverse quadratic form
  const double quad =
      (cov(1, 1) * d.x() * d.x() - 2.0 * cov(0, 1) * d.x() * d.y() + cov(0, 0) * d.y() * d.y()) /
      det;
  return -0.5 * quad - 0.5 * std::log(det) - std::log(2.0 * std::numbers::pi);
}

double log_density(const ClassMixture& mixture, const Vec2& z) {
  std::vector<double> terms;
  terms.reserve(mixture.components.size());
  for (const auto& comp : mixture.components)
    terms.push_back(std::log(comp.weight) + log_gaussian_density(z, comp.mean, comp.cov));
  return log_sum_exp(terms);
}

std::vector<double> class_posterior(const LabeledMixtureFamily& family, const Vec2& z) {
  const std::size_t n = family.classes.size();
  std::vector<double> logits(n, -std::numeric_limits<double>::infinity());
  for (std::size_t c = 0; c < n; ++c)
    if (family.class_prior[c] > 0.0)
      logits[c] = std::log(family.class_prior[c]) + log_density(family.classes[c], z);
  const double norm = log_sum_exp(logits);
  std::vector<double> post(n);
  for (std::size_t c = 0; c < n; ++c) post[c] = std::exp(logits[c] - norm);
  return post;
}

BoundingBox default_bounding_box(const LabeledMixtureFamily& family) {
  Vec2 lo = Vec2::Constant(std::numeric_limits<double>::infinity());
  Vec2 hi = -lo;
  double max_var = 0.0;
  for (const auto& cls : family.classes) {
    for (const auto& comp : cls.components) {
      lo = lo.cwiseMin(comp.mean);
      hi = hi.cwiseMax(comp.mean);
      const Eigen::SelfAdjointEigenSolver<Mat2> eig(comp.cov, Eigen::EigenvaluesOnly);
      max_var = std::max(max_var, eig.eigenvalues().maxCoeff());
    }
  }
  const double pad = 5.0 * std::sqrt(max_var);
  return {lo.array() - pad, hi.array() + pad};
}

void to_json(nlohmann::json& j, const GaussianComponent& c) {
  j = {{"weight", c.weight},
       {"mean", {c.mean.x(), c.mean.y()}},
       {"cov", {{c.cov(0, 0), c.cov(0, 1)}, {c.cov(1, 0), c.cov(1, 1)}}}};
}

void from_json(const nlohmann::json& j, GaussianComponent& c) {
  c.weight = j.at("weight").get<double>();
  const auto& m = j.at("mean");
  c.mean = Vec2(m.at(0).get<double>(), m.at(1).get<double>());
  const auto& s = j.at("cov");
  c.cov << s.at(0).at(0).get<double>(), s.at(0).at(1).get<double>(),
      s.at(1).at(0).get<double>(), s.at(1).at(1).get<double>();
}

void to_json(nlohmann::json& j, const ClassMixture& m) {
  j = {{"label", m.label}, {"components", m.components}};
}

void from_json(const nlohmann::json& j, ClassMixture& m) {
  m.label = j.at("label").get<int>();
  m.components = j.at("components").get<std::vector<GaussianComponent>>();
}

void to_json(nlohmann::json& j, const LabeledMixtureFamily& f) {
  j = {{"classes", f.classes}, {"class_prior", f.class_prior}};
}

void from_json(const nlohmann::json& j, LabeledMixtureFamily& f) {
  f.classes = j.at("classes").get<std::vector<ClassMixture>>();
  f.class_prior = j.at("class_prior").get<std::vector<double>>();
}

void to_json(nlohmann::json& j, const FractalConfig& c) {
  j = {{"num_classes", c.num_classes},
       {"base_components_per_class", c.base_components_per_class},
       {"branching", c.branching},
       {"depth", c.depth},
       {"scale_decay", c.scale_decay},
       {"anisotropy_ratio", c.anisotropy_ratio},
       {"rotation_jitter", c.rotation_jitter},
       {"root_radius", c.root_radius},
       {"branch_length", c.branch_length},
       {"root_major_variance", c.root_major_variance},
       {"rng_seed", c.rng_seed}};
}

void from_json(const nlohmann::json& j, FractalConfig& c) {
  FractalConfig d;
  c.num_classes = j.value("num_classes", d.num_classes);
  c.base_components_per_class = j.value("base_components_per_class", d.base_components_per_class);
  c.branching = j.value("branching", d.branching);
  c.depth = j.value("depth", d.depth);
  c.scale_decay = j.value("scale_decay", d.scale_decay);
  c.anisotropy_ratio = j.value("anisotropy_ratio", d.anisotropy_ratio);
  c.rotation_jitter = j.value("rotation_jitter", d.rotation_jitter);
  c.root_radius = j.value("root_radius", d.root_radius);
  c.branch_length = j.value("branch_length", d.branch_length);
  c.root_major_variance = j.value("root_major_variance", d.root_major_variance);
  c.rng_seed = j.value("rng_seed", d.rng_seed);
}

}  // namespace mog
