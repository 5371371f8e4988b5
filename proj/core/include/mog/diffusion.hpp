#pragma once

#include <vector>

#include <nlohmann/json.hpp>

#include "mog/types.hpp"

namespace mog {

// Discrete cumulative signal-retention table alpha_bar[t], t = 0..T.
class NoiseSchedule {
 public:
  // Throws ParameterError unless alpha_bar[0] == 1, alpha_bar[T] <= 1e-3 and
  // the table is strictly decreasing with at least three entries.
  explicit NoiseSchedule(std::vector<double> alpha_bar);

  int steps() const { return static_cast<int>(alpha_bar_.size()) - 1; }
  double alpha_bar(int t) const;
  // alpha_bar_{t|s} = alpha_bar_t / alpha_bar_s for s < t.
  double alpha_bar_ratio(int t, int s) const;
  const std::vector<double>& table() const { return alpha_bar_; }

 private:
  std::vector<double> alpha_bar_;
};

inline constexpr double kCosineOffset = 0.008;
// Per-step retention ratio floor (beta <= 0.999) near t = T.
inline constexpr double kMinStepRetention = 1e-3;

NoiseSchedule make_cosine_schedule(int steps);

Vec2 forward_diffuse(const Vec2& z0, int t, const Vec2& eps, const NoiseSchedule& schedule);
// Same map at an explicit retention level alpha_bar in [0, 1].
Vec2 forward_diffuse_at(const Vec2& z0, double alpha_bar, const Vec2& eps);

// eps = -sqrt(1 - alpha_bar_t) * score; undefined at t = 0.
Vec2 eps_from_score(const Vec2& score, int t, const NoiseSchedule& schedule);
Vec2 score_from_eps(const Vec2& eps, int t, const NoiseSchedule& schedule);

void to_json(nlohmann::json& j, const NoiseSchedule& s);
NoiseSchedule schedule_from_json(const nlohmann::json& j);

}  // namespace mog
