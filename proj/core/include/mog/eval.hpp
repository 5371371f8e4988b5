#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mog/mixture.hpp"
#include "mog/sampler.hpp"

namespace mog {

// Fraction of samples whose Mahalanobis distance to every component
// (under that component's own covariance) exceeds `threshold`.
double outlier_fraction(const Points& samples, const ClassMixture& mixture, double threshold);

// Fraction of components with at least one sample within Mahalanobis `radius`.
double mode_coverage(const Points& samples, const ClassMixture& mixture, double radius);

struct HistogramKl {
  double kl = 0.0;         // nats
  double box_mass = 1.0;   // model mass captured by the grid before renormalization
  std::size_t clamped = 0; // samples outside the box, counted in the nearest edge cell
  std::string warning;     // set when the box misses more than 1% of the model mass
};

// KL(empirical || model) over a grid_size x grid_size histogram on `box`.
// Model cell mass is center density times cell area, renormalized over the
// grid. Both histograms receive `pseudo_count` per cell, the model side as
// if it were n expected counts.
HistogramKl histogram_kl(const Points& samples, const ClassMixture& mixture, int grid_size,
                         const BoundingBox& box, double pseudo_count = 0.5);

struct MetricOptions {
  double outlier_threshold = 4.0;
  double coverage_radius = 3.0;
  int grid_size = 128;
  double pseudo_count = 0.5;
};

struct MetricReport {
  double outlier_fraction = 0.0;
  double mode_coverage = 0.0;
  double hist_kl = 0.0;
  std::size_t n_samples = 0;
  long long nfe = 0;
  std::string warning;
};

MetricReport compute_metrics(const Points& samples, const ClassMixture& mixture,
                             const BoundingBox& box, const MetricOptions& options);

struct SweepCell {
  std::vector<double> weights;
  MetricReport metrics;
};

struct SweepResult {
  std::string method;
  std::vector<std::vector<double>> axes;
  std::vector<SweepCell> cells;  // row-major over axes, last axis fastest
};

// Everything held fixed across a sweep. Every cell samples with the same
// sampler seed, so cells differ only through their weights.
struct SweepSetup {
  const RoleMap* denoisers = nullptr;
  const LabeledMixtureFamily* family = nullptr;
  const NoiseSchedule* schedule = nullptr;
  int label = 0;
  std::size_t n_samples = 0;
  SamplerConfig sampler;
  MetricOptions metrics;
  BoundingBox box;
};

// One axis per method weight (cfg/ag: 1, pg: 2, hg: 3, none: 0).
SweepResult sweep_grid(GuidanceMethod::Kind method, const std::vector<std::vector<double>>& axes,
                       const SweepSetup& setup);

std::string sweep_csv(const SweepResult& result);
void to_json(nlohmann::json& j, const MetricReport& m);
void to_json(nlohmann::json& j, const SweepResult& s);

struct SvgOptions {
  int width = 640;
  int height = 640;
  double point_radius = 1.2;
  std::string point_color = "#d9731a";
  std::string ellipse_color = "#2b5d9c";
  std::string title;
};

// Deterministic SVG: 1-sigma ellipses for every component plus the samples.
std::string scatter_svg(const Points& samples, const ClassMixture& mixture,
                        const BoundingBox& box, const SvgOptions& options = {});
void render_scatter_svg(const Points& samples, const ClassMixture& mixture,
                        const BoundingBox& box, const std::filesystem::path& path,
                        const SvgOptions& options = {});

}  // namespace mog
