#include "mog/guidance.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "mog/errors.hpp"

namespace mog {

namespace {

constexpr double kWeightSumTolerance = 1e-9;

bool degenerate(double w3) { return w3 == 0.0 || w3 == 1.0; }

}  // namespace

Vec2 cfg_combine(const Vec2& eps_cond, const Vec2& eps_uncond, double w) {
  return w * eps_cond + (1.0 - w) * eps_uncond;
}

Vec2 ag_combine(const Vec2& eps_good, const Vec2& eps_bad, double w) {
  return w * eps_good + (1.0 - w) * eps_bad;
}

Vec2 pg_combine(const Vec2& eps_cond, const Vec2& eps_uncond, const Vec2& eps_bad_cond, double w1,
                double w2) {
  return (w1 + w2) * eps_cond + (1.0 - w1) * eps_uncond - w2 * eps_bad_cond;
}

Vec2 hg_combine(const Vec2& eps_cond, const Vec2& eps_uncond, const Vec2& eps_bad_cond,
                const Vec2& eps_bad_uncond, const HgWeights& w, HgOrder order) {
  if (order == HgOrder::cfg_inner) {
    const Vec2 good = cfg_combine(eps_cond, eps_uncond, w.w1);
    const Vec2 bad = cfg_combine(eps_bad_cond, eps_bad_uncond, w.w2);
    return ag_combine(good, bad, w.w3);
  }
  const Vec2 cond = ag_combine(eps_cond, eps_bad_cond, w.w1);
  const Vec2 uncond = ag_combine(eps_uncond, eps_bad_uncond, w.w2);
  return cfg_combine(cond, uncond, w.w3);
}

CoefficientVector expand_hg_to_coefficients(const HgWeights& w, HgOrder order) {
  if (order == HgOrder::cfg_inner)
    return {w.w1 * w.w3, w.w3 * (1.0 - w.w1), w.w2 * (1.0 - w.w3), (1.0 - w.w2) * (1.0 - w.w3)};
  return {w.w1 * w.w3, w.w2 * (1.0 - w.w3), w.w3 * (1.0 - w.w1), (1.0 - w.w2) * (1.0 - w.w3)};
}

HgWeights map_hg_order(const HgWeights& w, HgOrder from, HgOrder to) {
  if (from == to) return w;
  if (degenerate(w.w3))
    throw DegenerateMappingError("w3 = " + std::to_string(w.w3) +
                                 ": hierarchical guidance reduces to a single method");
  // The coefficient correspondence is symmetric, so one formula serves both directions.
  const double w3 = w.w1 * w.w3 + w.w2 * (1.0 - w.w3);
  if (degenerate(w3))
    throw DegenerateMappingError("mapped w3 = " + std::to_string(w3) +
                                 ": hierarchical guidance reduces to a single method");
  return {w.w1 * w.w3 / w3, w.w3 * (1.0 - w.w1) / (1.0 - w3), w3};
}

GuidanceSpec GuidanceSpec::none() { return {"none", {{1.0, kGoodCond}}}; }

GuidanceSpec GuidanceSpec::cfg(double w) {
  return {"cfg", {{w, kGoodCond}, {1.0 - w, kGoodUncond}}};
}

GuidanceSpec GuidanceSpec::ag(double w) { return {"ag", {{w, kGoodCond}, {1.0 - w, kBadCond}}}; }

GuidanceSpec GuidanceSpec::pg(double w1, double w2) {
  return {"pg", {{w1 + w2, kGoodCond}, {1.0 - w1, kGoodUncond}, {-w2, kBadCond}}};
}

GuidanceSpec GuidanceSpec::hg(const HgWeights& weights, HgOrder order) {
  return from_coefficients(expand_hg_to_coefficients(weights, order), "hg");
}

GuidanceSpec GuidanceSpec::from_coefficients(const CoefficientVector& c, std::string name) {
  return {std::move(name),
          {{c.good_cond, kGoodCond},
           {c.good_uncond, kGoodUncond},
           {c.bad_cond, kBadCond},
           {c.bad_uncond, kBadUncond}}};
}

double GuidanceSpec::weight_sum() const {
  double s = 0.0;
  for (const auto& term : terms) s += term.weight;
  return s;
}

void GuidanceSpec::validate() const {
  if (terms.empty()) throw ContractError("guidance spec has no terms");
  for (const auto& term : terms)
    if (!std::isfinite(term.weight)) throw ContractError("guidance weight is not finite");
  const double s = weight_sum();
  if (std::abs(s - 1.0) > kWeightSumTolerance) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "guidance weights must sum to 1, got " << s;
    throw ContractError(msg.str());
  }
}

std::vector<DenoiserRole> GuidanceSpec::distinct_roles() const {
  std::set<DenoiserRole> roles;
  for (const auto& term : terms) roles.insert(term.role);
  return {roles.begin(), roles.end()};
}

int GuidanceSpec::num_principles() const {
  const auto roles = distinct_roles();
  bool quality_contrast = false;
  bool condition_contrast = false;
  for (const auto& a : roles) {
    for (const auto& b : roles) {
      if (a.conditioning == b.conditioning && a.quality != b.quality) quality_contrast = true;
      if (a.quality == b.quality && a.conditioning != b.conditioning) condition_contrast = true;
    }
  }
  return int(quality_contrast) + int(condition_contrast);
}

Vec2 mog_combine(std::span<const Vec2> predictions, const GuidanceSpec& spec) {
  if (predictions.size() != spec.terms.size())
    throw ContractError("mog_combine: " + std::to_string(predictions.size()) +
                        " predictions for " + std::to_string(spec.terms.size()) + " terms");
  spec.validate();
  Vec2 out = Vec2::Zero();
  for (std::size_t i = 0; i < predictions.size(); ++i)
    out += spec.terms[i].weight * predictions[i];
  return out;
}

std::string to_string(HgOrder order) {
  return order == HgOrder::cfg_inner ? "cfg_inner" : "ag_inner";
}

HgOrder parse_hg_order(const std::string& s) {
  if (s == "cfg_inner") return HgOrder::cfg_inner;
  if (s == "ag_inner") return HgOrder::ag_inner;
  throw ConfigError("unknown hg order '" + s + "' (expected cfg_inner or ag_inner)");
}

void to_json(nlohmann::json& j, const GuidanceSpec& spec) {
  j = nlohmann::json{{"name", spec.name}, {"terms", nlohmann::json::array()}};
  for (const auto& term : spec.terms) {
    j["terms"].push_back(
        {{"weight", term.weight},
         {"quality", term.role.quality == Quality::good ? "good" : "bad"},
         {"conditioning",
          term.role.conditioning == Conditioning::conditional ? "cond" : "uncond"}});
  }
}

void from_json(const nlohmann::json& j, GuidanceSpec& spec) {
  spec.name = j.value("name", std::string("mog"));
  spec.terms.clear();
  for (const auto& t : j.at("terms")) {
    spec.terms.push_back({t.at("weight").get<double>(),
                          parse_role(t.at("quality").get<std::string>(),
                                     t.at("conditioning").get<std::string>())});
  }
}

void to_json(nlohmann::json& j, const HgWeights& w) { j = {w.w1, w.w2, w.w3}; }

}  // namespace mog
