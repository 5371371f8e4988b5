#include "mog/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "mog/errors.hpp"

namespace mog {

NoiseSchedule::NoiseSchedule(std::vector<double> alpha_bar) : alpha_bar_(std::move(alpha_bar)) {
  if (alpha_bar_.size() < 3) throw ParameterError("schedule needs T >= 2");
  if (alpha_bar_.front() != 1.0) throw ParameterError("schedule must start at alpha_bar = 1");
  if (!(alpha_bar_.back() <= 1e-3)) throw ParameterError("schedule must end at alpha_bar <= 1e-3");
  for (std::size_t t = 1; t < alpha_bar_.size(); ++t) {
    if (!(alpha_bar_[t] < alpha_bar_[t - 1]) || !(alpha_bar_[t] > 0.0))
      throw ParameterError("schedule must be strictly decreasing and positive at t = " +
                           std::to_string(t));
  }
}

double NoiseSchedule::alpha_bar(int t) const {
  if (t < 0 || t > steps())
    throw IndexError("step " + std::to_string(t) + " outside [0, " + std::to_string(steps()) + "]");
  return alpha_bar_[static_cast<std::size_t>(t)];
}

double NoiseSchedule::alpha_bar_ratio(int t, int s) const {
  return alpha_bar(t) / alpha_bar(s);
}

NoiseSchedule make_cosine_schedule(int steps) {
  if (steps < 2) throw ParameterError("cosine schedule needs T >= 2");
  const auto f = [steps](int t) {
    const double u = (static_cast<double>(t) / steps + kCosineOffset) / (1.0 + kCosineOffset);
    const double c = std::cos(u * std::numbers::pi / 2.0);
    return c * c;
  };
  const double f0 = f(0);
  std::vector<double> table(static_cast<std::size_t>(steps) + 1);
  table[0] = 1.0;
  for (int t = 1; t <= steps; ++t) {
    const double raw = f(t) / f0;
    // the closed form reaches 0 at t = T; bound each step's retention instead
    table[t] = std::max(raw, table[t - 1] * kMinStepRetention);
  }
  return NoiseSchedule(std::move(table));
}

Vec2 forward_diffuse(const Vec2& z0, int t, const Vec2& eps, const NoiseSchedule& schedule) {
  return forward_diffuse_at(z0, schedule.alpha_bar(t), eps);
}

Vec2 forward_diffuse_at(const Vec2& z0, double alpha_bar, const Vec2& eps) {
  if (!(alpha_bar >= 0.0 && alpha_bar <= 1.0)) throw ParameterError("alpha_bar outside [0, 1]");
  return std::sqrt(alpha_bar) * z0 + std::sqrt(1.0 - alpha_bar) * eps;
}

Vec2 eps_from_score(const Vec2& score, int t, const NoiseSchedule& schedule) {
  if (t == 0) throw UndefinedConversionError("eps/score conversion undefined at t = 0");
  return -std::sqrt(1.0 - schedule.alpha_bar(t)) * score;
}

Vec2 score_from_eps(const Vec2& eps, int t, const NoiseSchedule& schedule) {
  if (t == 0) throw UndefinedConversionError("eps/score conversion undefined at t = 0");
  return -eps / std::sqrt(1.0 - schedule.alpha_bar(t));
}

void to_json(nlohmann::json& j, const NoiseSchedule& s) { j = s.table(); }

NoiseSchedule schedule_from_json(const nlohmann::json& j) {
  return NoiseSchedule(j.get<std::vector<double>>());
}

}  // namespace mog
