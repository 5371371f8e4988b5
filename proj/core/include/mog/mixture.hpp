#pragma once

#include <cstdint>
#include <vector>

#include <nlohmann/json.hpp>

#include "mog/rng.hpp"
#include "mog/types.hpp"

namespace mog {

struct GaussianComponent {
  double weight = 1.0;
  Vec2 mean = Vec2::Zero();
  Mat2 cov = Mat2::Identity();
};

struct ClassMixture {
  int label = 0;
  std::vector<GaussianComponent> components;
};

struct LabeledMixtureFamily {
  std::vector<ClassMixture> classes;
  std::vector<double> class_prior;

  std::size_t num_classes() const { return classes.size(); }
  // Throws LookupError for an unknown label.
  const ClassMixture& by_label(int label) const;
  std::size_t index_of(int label) const;
  // All components of all classes, weights multiplied by the class prior.
  ClassMixture marginal() const;
};

// Parameters of the recursive construction. Each node spawns `branching`
// children offset by branch_length * scale_decay^level along rotated unit
// vectors; only leaves (level == depth) become components.
struct FractalConfig {
  int num_classes = 2;
  int base_components_per_class = 2;
  int branching = 3;
  int depth = 4;
  double scale_decay = 0.35;
  double anisotropy_ratio = 0.05;
  double rotation_jitter = 0.3;  // radians, uniform in [-j, j]
  double root_radius = 1.0;
  double branch_length = 1.0;
  // Largest covariance eigenvalue at level k is root_major_variance * scale_decay^k.
  double root_major_variance = 0.64;
  std::uint64_t rng_seed = 7;
};

void validate(const FractalConfig& config);
LabeledMixtureFamily build_fractal_family(const FractalConfig& config);

// Structural checks; throw ParameterError describing the first violation.
void validate(const GaussianComponent& component);
void validate(const ClassMixture& mixture);
void validate(const LabeledMixtureFamily& family);

// Precomputed component CDF and Cholesky factors for repeated draws.
class MixtureSampler {
 public:
  explicit MixtureSampler(const ClassMixture& mixture);
  Vec2 operator()(Rng& rng) const;

 private:
  std::vector<double> cdf_;
  std::vector<Vec2> means_;
  std::vector<Mat2> factors_;
};

Vec2 sample_point(const ClassMixture& mixture, Rng& rng);
Vec2 sample_point(const LabeledMixtureFamily& family, int label, Rng& rng);

double log_gaussian_density(const Vec2& z, const Vec2& mean, const Mat2& cov);
double log_density(const ClassMixture& mixture, const Vec2& z);
std::vector<double> class_posterior(const LabeledMixtureFamily& family, const Vec2& z);

// Axis-aligned box: ground-truth means +/- 5 times the largest component std.
struct BoundingBox {
  Vec2 lo;
  Vec2 hi;
};
BoundingBox default_bounding_box(const LabeledMixtureFamily& family);

void to_json(nlohmann::json& j, const GaussianComponent& c);
void from_json(const nlohmann::json& j, GaussianComponent& c);
void to_json(nlohmann::json& j, const ClassMixture& m);
void from_json(const nlohmann::json& j, ClassMixture& m);
void to_json(nlohmann::json& j, const LabeledMixtureFamily& f);
void from_json(const nlohmann::json& j, LabeledMixtureFamily& f);
void to_json(nlohmann::json& j, const FractalConfig& c);
void from_json(const nlohmann::json& j, FractalConfig& c);

}  // namespace mog
