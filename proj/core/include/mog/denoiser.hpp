#pragma once

#include <compare>
#include <string>

#include "mog/types.hpp"

namespace mog {

// Conditioning input of an eps-predictor: a class label or the null condition.
class Condition {
 public:
  static Condition null() { return Condition(); }
  static Condition label(int c) { return Condition(c); }

  bool is_null() const { return label_ < 0; }
  int label() const { return label_; }

  friend bool operator==(const Condition&, const Condition&) = default;

 private:
  Condition() = default;
  explicit Condition(int c) : label_(c) {}
  int label_ = -1;
};

enum class Quality { good, bad };
enum class Conditioning { conditional, unconditional };

struct DenoiserRole {
  Quality quality = Quality::good;
  Conditioning conditioning = Conditioning::conditional;

  friend auto operator<=>(const DenoiserRole&, const DenoiserRole&) = default;
};

inline constexpr DenoiserRole kGoodCond{Quality::good, Conditioning::conditional};
inline constexpr DenoiserRole kGoodUncond{Quality::good, Conditioning::unconditional};
inline constexpr DenoiserRole kBadCond{Quality::bad, Conditioning::conditional};
inline constexpr DenoiserRole kBadUncond{Quality::bad, Conditioning::unconditional};

std::string to_string(const DenoiserRole& role);
// Accepts "good"/"bad" and "cond"/"uncond".
DenoiserRole parse_role(const std::string& quality, const std::string& conditioning);

// Uniform eps-prediction contract. Implementations must be read-only during
// prediction so one instance can serve several sampling threads.
class Denoiser {
 public:
  virtual ~Denoiser() = default;

  // out.col(i) = eps_hat(z.col(i), t, condition). Requires t >= 1.
  virtual void predict_batch(const Points& z, int t, Condition condition, Points& out) const = 0;

  Vec2 predict(const Vec2& z, int t, Condition condition) const;
};

}  // namespace mog
