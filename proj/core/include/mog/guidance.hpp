#pragma once

#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mog/denoiser.hpp"
#include "mog/types.hpp"

namespace mog {

// Guidance combinators. Every combinator is evaluated as an affine
// combination sum_i w_i * eps_i with weights summing to one, so the
// reductions (w = 1, w = 0, w3 = 1, ...) return their operand bit-for-bit.

// eps_uncond + w * (eps_cond - eps_uncond)
Vec2 cfg_combine(const Vec2& eps_cond, const Vec2& eps_uncond, double w);

// eps_bad + w * (eps_good - eps_bad)
Vec2 ag_combine(const Vec2& eps_good, const Vec2& eps_bad, double w);

// eps_uncond + w1 * (eps_cond - eps_uncond) + w2 * (eps_cond - eps_bad_cond)
Vec2 pg_combine(const Vec2& eps_cond, const Vec2& eps_uncond, const Vec2& eps_bad_cond, double w1,
                double w2);

struct HgWeights {
  double w1 = 1.0;
  double w2 = 1.0;
  double w3 = 1.0;

  friend bool operator==(const HgWeights&, const HgWeights&) = default;
};

// Which combinator is nested inside.
//   cfg_inner: CFG on good and bad models, then AG between the two results.
//   ag_inner:  AG on conditional and unconditional branches, then CFG between them.
enum class HgOrder { cfg_inner, ag_inner };

Vec2 hg_combine(const Vec2& eps_cond, const Vec2& eps_uncond, const Vec2& eps_bad_cond,
                const Vec2& eps_bad_uncond, const HgWeights& weights,
                HgOrder order = HgOrder::cfg_inner);

// Coefficients on the four base predictions
// (good/cond, good/uncond, bad/cond, bad/uncond).
struct CoefficientVector {
  double good_cond = 0.0;
  double good_uncond = 0.0;
  double bad_cond = 0.0;
  double bad_uncond = 0.0;

  double sum() const { return good_cond + good_uncond + bad_cond + bad_uncond; }
};

CoefficientVector expand_hg_to_coefficients(const HgWeights& weights, HgOrder order);

// Weights in `to` order whose expansion equals that of `weights` in `from`
// order. Throws DegenerateMappingError when w3 or the mapped w3 is 0 or 1.
HgWeights map_hg_order(const HgWeights& weights, HgOrder from, HgOrder to);

struct GuidanceTerm {
  double weight = 0.0;
  DenoiserRole role;
};

// A mixture-of-guidance: affine weights over denoiser roles.
struct GuidanceSpec {
  std::string name;
  std::vector<GuidanceTerm> terms;

  static GuidanceSpec none();
  static GuidanceSpec cfg(double w);
  static GuidanceSpec ag(double w);
  static GuidanceSpec pg(double w1, double w2);
  static GuidanceSpec hg(const HgWeights& weights, HgOrder order = HgOrder::cfg_inner);
  static GuidanceSpec from_coefficients(const CoefficientVector& c, std::string name = "mog");

  // Throws ContractError on an empty term list or a weight sum off 1 by > 1e-9.
  void validate() const;
  double weight_sum() const;
  std::vector<DenoiserRole> distinct_roles() const;
  // Number of guiding principles present: a quality contrast (AG-like)
  // and/or a conditioning contrast (CFG-like).
  int num_principles() const;
};

Vec2 mog_combine(std::span<const Vec2> predictions, const GuidanceSpec& spec);

std::string to_string(HgOrder order);
HgOrder parse_hg_order(const std::string& s);

void to_json(nlohmann::json& j, const GuidanceSpec& spec);
void from_json(const nlohmann::json& j, GuidanceSpec& spec);
void to_json(nlohmann::json& j, const HgWeights& w);

}  // namespace mog
