#pragma once

// Test-only reference computations. These deliberately avoid the library's
// evaluation paths (no log-sum-exp, no precomputed tables, no coefficient
// expansion) so they can serve as independent checks.

#include <atomic>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/LU>

#include "mog/guidance.hpp"
#include "mog/mixture.hpp"
#include "mog/oracle.hpp"
#include "mog/rng.hpp"
#include "mog/types.hpp"

namespace mog::testing {

inline double gaussian_pdf(const Vec2& z, const Vec2& mean, const Mat2& cov) {
  const double det = cov(0, 0) * cov(1, 1) - cov(0, 1) * cov(0, 1);
  const double dx = z.x() - mean.x();
  const double dy = z.y() - mean.y();
  const double q = (cov(1, 1) * dx * dx - 2 * cov(0, 1) * dx * dy + cov(0, 0) * dy * dy) / det;
  return std::exp(-0.5 * q) / (2 * std::numbers::pi * std::sqrt(det));
}

// Plain weighted sum of component densities.
inline double direct_density(const ClassMixture& m, const Vec2& z) {
  double p = 0;
  for (const auto& c : m.components) p += c.weight * gaussian_pdf(z, c.mean, c.cov);
  return p;
}

// Components of a mixture pushed through the forward process at level a.
inline ClassMixture noisy_copy(const ClassMixture& m, double a) {
  ClassMixture out{m.label, {}};
  for (const auto& c : m.components)
    out.components.push_back({c.weight, std::sqrt(a) * c.mean, a * c.cov + (1 - a) * Mat2::Identity()});
  return out;
}

// Score of a weighted mixture of densities, by direct summation.
inline Vec2 direct_score(const ClassMixture& m, const Vec2& z) {
  double p = 0;
  Vec2 g = Vec2::Zero();
  for (const auto& c : m.components) {
    const double d = c.weight * gaussian_pdf(z, c.mean, c.cov);
    p += d;
    g += d * (-(c.cov.inverse() * (z - c.mean)));
  }
  return g / p;
}

// Central finite-difference gradient.
inline Vec2 fd_gradient(const std::function<double(const Vec2&)>& f, const Vec2& z, double h) {
  const Vec2 ex(h, 0), ey(0, h);
  return Vec2((f(z + ex) - f(z - ex)) / (2 * h), (f(z + ey) - f(z - ey)) / (2 * h));
}

struct McEstimate {
  Vec2 mean;
  Vec2 standard_error;
};

// E[eps | z_t] by self-normalized importance weighting of prior draws z0:
// weight N(z_t; sqrt(a) z0, (1-a) I), eps_j = (z_t - sqrt(a) z0_j) / sqrt(1-a).
inline McEstimate mc_posterior_eps(const ClassMixture& m, const Vec2& z_t, double a, int draws,
                                   Rng& rng) {
  MixtureSampler sampler(m);
  std::vector<double> logw(draws);
  std::vector<Vec2> eps(draws);
  double peak = -1e300;
  for (int j = 0; j < draws; ++j) {
    const Vec2 z0 = sampler(rng);
    eps[j] = (z_t - std::sqrt(a) * z0) / std::sqrt(1 - a);
    logw[j] = -0.5 * eps[j].squaredNorm();
    peak = std::max(peak, logw[j]);
  }
  double sw = 0;
  Vec2 acc = Vec2::Zero();
  std::vector<double> w(draws);
  for (int j = 0; j < draws; ++j) {
    w[j] = std::exp(logw[j] - peak);
    sw += w[j];
    acc += w[j] * eps[j];
  }
  const Vec2 mean = acc / sw;
  Vec2 var = Vec2::Zero();
  for (int j = 0; j < draws; ++j) var += (w[j] * w[j]) * (eps[j] - mean).cwiseAbs2();
  return {mean, (var / (sw * sw)).cwiseSqrt()};
}

// The two nested hierarchical-guidance forms written out literally, on scalars.
inline double nested_hg(double c, double u, double bc, double bu, const HgWeights& w, HgOrder order) {
  if (order == HgOrder::cfg_inner) {
    const double cfg = u + w.w1 * (c - u);
    const double bad_cfg = bu + w.w2 * (bc - bu);
    return bad_cfg + w.w3 * (cfg - bad_cfg);
  }
  const double cond_ag = bc + w.w1 * (c - bc);
  const double uncond_ag = bu + w.w2 * (u - bu);
  return uncond_ag + w.w3 * (cond_ag - uncond_ag);
}

// Coefficients of nested_hg recovered by probing with basis inputs.
inline CoefficientVector probe_coefficients(const HgWeights& w, HgOrder order) {
  return {nested_hg(1, 0, 0, 0, w, order), nested_hg(0, 1, 0, 0, w, order),
          nested_hg(0, 0, 1, 0, w, order), nested_hg(0, 0, 0, 1, w, order)};
}

inline Vec2 random_vec(Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  const double x = n(rng);
  const double y = n(rng);
  return {x, y};
}

inline double rel_diff(double a, double b) {
  return std::abs(a - b) / std::max(std::abs(b), 1e-300);
}

inline double rel_diff(const Vec2& a, const Vec2& b) {
  return (a - b).norm() / std::max(b.norm(), 1e-300);
}

inline Points to_points(const std::vector<Vec2>& v) {
  Points p(2, static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) p.col(static_cast<Eigen::Index>(i)) = v[i];
  return p;
}

inline Points draw(const ClassMixture& m, std::size_t n, Rng& rng) {
  MixtureSampler s(m);
  Points p(2, static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) p.col(static_cast<Eigen::Index>(i)) = s(rng);
  return p;
}

// Predicts a fixed linear map of z and counts calls and evaluated points.
class CountingDenoiser final : public Denoiser {
 public:
  explicit CountingDenoiser(double gain = 0.1, double nan_below_t = -1)
      : gain_(gain), nan_below_t_(nan_below_t) {}

  void predict_batch(const Points& z, int t, Condition, Points& out) const override {
    calls_ += 1;
    points_ += z.cols();
    out = gain_ * z;
    if (t < nan_below_t_) out.setConstant(std::numeric_limits<double>::quiet_NaN());
  }

  long calls() const { return calls_; }
  long points() const { return points_; }

 private:
  double gain_;
  double nan_below_t_;
  mutable std::atomic<long> calls_{0};
  mutable std::atomic<long> points_{0};
};

// Mean squared eps error of `model` against the oracle over a fixed grid:
// 16 x 16 points on the family's bounding box, six noise levels, every
// class plus the null condition.
inline double validation_mse(const Denoiser& model, const AnalyticDenoiser& oracle) {
  const auto& family = oracle.family();
  const BoundingBox box = default_bounding_box(family);
  const int g = 16;
  Points z(2, g * g);
  for (int i = 0; i < g; ++i)
    for (int j = 0; j < g; ++j)
      z.col(i * g + j) = box.lo + Vec2((i + 0.5) / g * (box.hi.x() - box.lo.x()),
                                       (j + 0.5) / g * (box.hi.y() - box.lo.y()));
  const int steps = oracle.schedule().steps();
  std::vector<Condition> conditions{Condition::null()};
  for (const auto& cls : family.classes) conditions.push_back(Condition::label(cls.label));
  double total = 0.0;
  long count = 0;
  Points a, b;
  for (int t : {steps / 32, steps / 8, steps / 4, steps / 2, 3 * steps / 4, steps}) {
    for (Condition c : conditions) {
      model.predict_batch(z, std::max(t, 1), c, a);
      oracle.predict_batch(z, std::max(t, 1), c, b);
      total += (a - b).squaredNorm();
      count += z.cols();
    }
  }
  return total / static_cast<double>(count);
}

}  // namespace mog::testing
