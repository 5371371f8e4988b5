#include "mog/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include <Eigen/LU>

#include "mog/errors.hpp"

namespace mog {

namespace {

struct Whitener {
  Vec2 mean;
  Mat2 precision;

  double distance_sq(const Vec2& x) const {
    const Vec2 d = x - mean;
    return d.dot(precision * d);
  }
};

std::vector<Whitener> whiteners(const ClassMixture& mixture) {
  std::vector<Whitener> out;
  out.reserve(mixture.components.size());
  for (const auto& c : mixture.components) out.push_back({c.mean, c.cov.inverse()});
  return out;
}

void require_samples(const Points& samples) {
  if (samples.cols() == 0) throw ContractError("metric needs at least one sample");
}

}  // namespace

double outlier_fraction(const Points& samples, const ClassMixture& mixture, double threshold) {
  require_samples(samples);
  if (!(threshold > 0.0)) throw ParameterError("outlier threshold must be positive");
  const auto w = whiteners(mixture);
  const double limit = threshold * threshold;
  std::size_t outliers = 0;
  for (Eigen::Index i = 0; i < samples.cols(); ++i) {
    const Vec2 x = samples.col(i);
    const bool near = std::any_of(w.begin(), w.end(),
                                  [&](const Whitener& c) { return c.distance_sq(x) <= limit; });
    if (!near) ++outliers;
  }
  return static_cast<double>(outliers) / static_cast<double>(samples.cols());
}

double mode_coverage(const Points& samples, const ClassMixture& mixture, double radius) {
  require_samples(samples);
  if (!(radius > 0.0)) throw ParameterError("coverage radius must be positive");
  const auto w = whiteners(mixture);
  const double limit = radius * radius;
  std::size_t covered = 0;
  for (const auto& c : w) {
    for (Eigen::Index i = 0; i < samples.cols(); ++i) {
      if (c.distance_sq(samples.col(i)) <= limit) {
        ++covered;
        break;
      }
    }
  }
  return static_cast<double>(covered) / static_cast<double>(w.size());
}

HistogramKl histogram_kl(const Points& samples, const ClassMixture& mixture, int grid_size,
                         const BoundingBox& box, double pseudo_count) {
  require_samples(samples);
  if (grid_size < 16) throw ParameterError("histogram grid_size must be >= 16");
  if (!(pseudo_count > 0.0)) throw ParameterError("pseudo_count must be positive");
  if (!((box.hi.array() > box.lo.array()).all())) throw ParameterError("degenerate bounding box");

  const auto g = static_cast<std::size_t>(grid_size);
  const Vec2 cell = (box.hi - box.lo) / grid_size;
  const double area = cell.x() * cell.y();

  HistogramKl result;
  std::vector<double> counts(g * g, 0.0);
  for (Eigen::Index i = 0; i < samples.cols(); ++i) {
    const Vec2 u = (samples.col(i) - box.lo).cwiseQuotient(cell);
    long ix = static_cast<long>(std::floor(u.x()));
    long iy = static_cast<long>(std::floor(u.y()));
    if (ix < 0 || iy < 0 || ix >= grid_size || iy >= grid_size || !u.allFinite()) {
      ++result.clamped;
      if (!std::isfinite(u.x())) ix = 0;
      if (!std::isfinite(u.y())) iy = 0;
      ix = std::clamp(ix, 0L, static_cast<long>(grid_size) - 1);
      iy = std::clamp(iy, 0L, static_cast<long>(grid_size) - 1);
    }
    counts[static_cast<std::size_t>(ix) * g + static_cast<std::size_t>(iy)] += 1.0;
  }

  std::vector<double> model(g * g);
  double mass = 0.0;
  for (std::size_t ix = 0; ix < g; ++ix) {
    for (std::size_t iy = 0; iy < g; ++iy) {
      const Vec2 center = box.lo + Vec2((ix + 0.5) * cell.x(), (iy + 0.5) * cell.y());
      const double m = std::exp(log_density(mixture, center)) * area;
      model[ix * g + iy] = m;
      mass += m;
    }
  }
  if (!(mass > 0.0)) throw NumericError("model assigns no mass to the histogram grid");
  result.box_mass = mass;
  if (mass < 0.99) {
    char msg[128];
    std::snprintf(msg, sizeof msg, "bounding box holds only %.4f of the model mass", mass);
    result.warning = msg;
  }

  const double n = static_cast<double>(samples.cols());
  const double total = n + pseudo_count * static_cast<double>(g * g);
  double kl = 0.0;
  for (std::size_t k = 0; k < g * g; ++k) {
    const double p = (counts[k] + pseudo_count) / total;
    const double q = (n * model[k] / mass + pseudo_count) / total;
    kl += p * std::log(p / q);
  }
  result.kl = std::max(kl, 0.0);
  return result;
}

MetricReport compute_metrics(const Points& samples, const ClassMixture& mixture,
                             const BoundingBox& box, const MetricOptions& options) {
  MetricReport r;
  r.n_samples = static_cast<std::size_t>(samples.cols());
  r.outlier_fraction = outlier_fraction(samples, mixture, options.outlier_threshold);
  r.mode_coverage = mode_coverage(samples, mixture, options.coverage_radius);
  const auto kl = histogram_kl(samples, mixture, options.grid_size, box, options.pseudo_count);
  r.hist_kl = kl.kl;
  r.warning = kl.warning;
  return r;
}

void to_json(nlohmann::json& j, const MetricReport& m) {
  j = {{"outlier_fraction", m.outlier_fraction},
       {"mode_coverage", m.mode_coverage},
       {"hist_kl", m.hist_kl},
       {"n_samples", m.n_samples},
       {"nfe", m.nfe}};
  if (!m.warning.empty()) j["warning"] = m.warning;
}

}  // namespace mog
