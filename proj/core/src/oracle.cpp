#include "mog/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include <Eigen/LU>

#include "mog/errors.hpp"

namespace mog {

namespace {

void require_positive_step(int t) {
  if (t < 1) throw UndefinedConversionError("oracle eps undefined at t = 0");
}

}  // namespace

NoisyMixtureParams noisy_marginal_at(const ClassMixture& mixture, double alpha_bar) {
  NoisyMixtureParams out;
  out.components.reserve(mixture.components.size());
  const double scale = std::sqrt(alpha_bar);
  for (const auto& c : mixture.components) {
    Mat2 cov = alpha_bar * c.cov;
    cov.diagonal().array() += 1.0 - alpha_bar;
    out.components.push_back({c.weight, scale * c.mean, cov});
  }
  return out;
}

NoisyMixtureParams noisy_marginal(const ClassMixture& mixture, int t,
                                  const NoiseSchedule& schedule) {
  if (t == 0) return {mixture.components};
  return noisy_marginal_at(mixture, schedule.alpha_bar(t));
}

double log_noisy_density(const ClassMixture& mixture, const Vec2& z, double alpha_bar) {
  ClassMixture noisy{mixture.label, noisy_marginal_at(mixture, alpha_bar).components};
  return log_density(noisy, z);
}

double log_noisy_density(const LabeledMixtureFamily& family, Condition condition, const Vec2& z,
                         int t, const NoiseSchedule& schedule) {
  const double a = schedule.alpha_bar(t);
  if (condition.is_null()) return log_noisy_density(family.marginal(), z, a);
  return log_noisy_density(family.by_label(condition.label()), z, a);
}

Vec2 noisy_score(const ClassMixture& mixture, const Vec2& z, double alpha_bar) {
  const auto noisy = noisy_marginal_at(mixture, alpha_bar);
  const std::size_t n = noisy.components.size();
  std::vector<double> logr(n);
  std::vector<Vec2> grads(n);
  double peak = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& c = noisy.components[i];
    logr[i] = std::log(c.weight) + log_gaussian_density(z, c.mean, c.cov);
    grads[i] = -c.cov.inverse() * (z - c.mean);
    peak = std::max(peak, logr[i]);
  }
  double norm = 0.0;
  Vec2 acc = Vec2::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    const double r = std::exp(logr[i] - peak);
    norm += r;
    acc += r * grads[i];
  }
  return acc / norm;
}

Vec2 analytic_eps(const ClassMixture& mixture, const Vec2& z, int t,
                  const NoiseSchedule& schedule) {
  require_positive_step(t);
  return eps_from_score(noisy_score(mixture, z, schedule.alpha_bar(t)), t, schedule);
}

Vec2 analytic_eps(const LabeledMixtureFamily& family, Condition condition, const Vec2& z, int t,
                  const NoiseSchedule& schedule) {
  if (condition.is_null()) return analytic_eps(family.marginal(), z, t, schedule);
  return analytic_eps(family.by_label(condition.label()), z, t, schedule);
}

AnalyticDenoiser::AnalyticDenoiser(LabeledMixtureFamily family, NoiseSchedule schedule)
    : family_(std::move(family)), schedule_(std::move(schedule)) {
  validate(family_);
  for (const auto& cls : family_.classes) per_class_.push_back(build_table(cls));
  marginal_ = build_table(family_.marginal());
}

AnalyticDenoiser::Table AnalyticDenoiser::build_table(const ClassMixture& mixture) const {
  Table table;
  table.count = mixture.components.size();
  const int steps = schedule_.steps();
  const std::size_t total = table.count * static_cast<std::size_t>(steps + 1);
  table.log_weight.resize(total);
  table.mean.resize(total);
  table.precision.resize(total);
  for (int t = 0; t <= steps; ++t) {
    const auto noisy = noisy_marginal_at(mixture, schedule_.alpha_bar(t));
    for (std::size_t i = 0; i < table.count; ++i) {
      const auto& c = noisy.components[i];
      const std::size_t k = static_cast<std::size_t>(t) * table.count + i;
      table.log_weight[k] = std::log(c.weight) - 0.5 * std::log(c.cov.determinant());
      table.mean[k] = c.mean;
      table.precision[k] = c.cov.inverse();
    }
  }
  return table;
}

const AnalyticDenoiser::Table& AnalyticDenoiser::table_for(Condition condition) const {
  if (condition.is_null()) return marginal_;
  return per_class_[family_.index_of(condition.label())];
}

void AnalyticDenoiser::predict_batch(const Points& z, int t, Condition condition,
                                     Points& out) const {
  require_positive_step(t);
  const double a = schedule_.alpha_bar(t);
  const double eps_scale = -std::sqrt(1.0 - a);
  const Table& table = table_for(condition);
  const std::size_t offset = static_cast<std::size_t>(t) * table.count;
  out.resize(2, z.cols());
  std::vector<double> logr(table.count);
  for (Eigen::Index col = 0; col < z.cols(); ++col) {
    const Vec2 x = z.col(col);
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < table.count; ++i) {
      const Vec2 d = x - table.mean[offset + i];
      logr[i] = table.log_weight[offset + i] - 0.5 * d.dot(table.precision[offset + i] * d);
      peak = std::max(peak, logr[i]);
    }
    double norm = 0.0;
    Vec2 score = Vec2::Zero();
    for (std::size_t i = 0; i < table.count; ++i) {
      const double r = std::exp(logr[i] - peak);
      norm += r;
      score -= r * (table.precision[offset + i] * (x - table.mean[offset + i]));
    }
    out.col(col) = eps_scale * (score / norm);
  }
}

CfgDecomposition decompose_cfg_direction(const LabeledMixtureFamily& family, int label,
                                         const Vec2& uncond_eps, const Vec2& z, int t,
                                         const NoiseSchedule& schedule) {
  const Vec2 cond = analytic_eps(family, Condition::label(label), z, t, schedule);
  const Vec2 marginal = analytic_eps(family, Condition::null(), z, t, schedule);
  CfgDecomposition d;
  d.total = cond - uncond_eps;
  d.score_correction = marginal - uncond_eps;
  d.condition_alignment = cond - marginal;
  return d;
}

}  // namespace mog
