#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mog/denoiser.hpp"
#include "mog/diffusion.hpp"
#include "mog/guidance.hpp"

namespace mog {

// Ancestral reverse transition z_t -> z_s (s < t):
//   mu      = sqrt(a_s / a_t) * (z_t - (1 - a_t / a_s) / sqrt(1 - a_t) * eps_hat)
//   sigma^2 = (1 - a_t / a_s) * (1 - a_s) / (1 - a_t)
// returning mu + sigma * noise. sigma is exactly 0 when s = 0.
Vec2 reverse_step(const Vec2& z_t, int t, int s, const Vec2& eps_hat,
                  const NoiseSchedule& schedule, const Vec2& noise);
Vec2 reverse_step_at(const Vec2& z_t, double alpha_bar_t, double alpha_bar_s, const Vec2& eps_hat,
                     const Vec2& noise);
double reverse_variance_at(double alpha_bar_t, double alpha_bar_s);

// Uniform stride from T down to 0: round(T * j / num_steps) for j = num_steps..0.
std::vector<int> make_step_indices(int steps, int num_steps);

struct SamplerConfig {
  std::vector<int> step_indices;
  bool stochastic = true;
  std::uint64_t rng_seed = 0;

  int num_steps() const { return static_cast<int>(step_indices.size()) - 1; }
  // Throws ParameterError unless indices start at T, end at 0 and strictly decrease.
  void validate(int steps) const;
};

SamplerConfig make_sampler_config(int steps, int num_steps, std::uint64_t rng_seed,
                                  bool stochastic = true);

// A guidance method bound to its weights.
class GuidanceMethod {
 public:
  enum class Kind { none, cfg, ag, pg, hg, mog };

  static GuidanceMethod none();
  static GuidanceMethod cfg(double w);
  static GuidanceMethod ag(double w);
  static GuidanceMethod pg(double w1, double w2);
  static GuidanceMethod hg(const HgWeights& weights, HgOrder order = HgOrder::cfg_inner);
  static GuidanceMethod mog(GuidanceSpec spec);
  // kind name plus weights in the natural order (cfg: w, pg: w1 w2, hg: w1 w2 w3).
  static GuidanceMethod from_name(const std::string& kind, const std::vector<double>& weights);

  Kind kind() const { return kind_; }
  std::string name() const;
  const std::vector<double>& weights() const { return weights_; }
  const GuidanceSpec& spec() const { return spec_; }
  HgOrder hg_order() const { return order_; }

  // Roles evaluated every step, in the order combine() expects them.
  const std::vector<DenoiserRole>& roles() const { return roles_; }
  int evaluations_per_step() const { return static_cast<int>(roles_.size()); }

  Vec2 combine(std::span<const Vec2> predictions) const;

 private:
  GuidanceMethod(Kind kind, std::vector<double> weights);

  Kind kind_;
  std::vector<double> weights_;
  GuidanceSpec spec_;
  HgOrder order_ = HgOrder::cfg_inner;
  std::vector<DenoiserRole> roles_;
  std::vector<std::size_t> term_slot_;  // mog: role slot of each spec term
};

std::size_t arity(GuidanceMethod::Kind kind);
std::string to_string(GuidanceMethod::Kind kind);

using RoleMap = std::map<DenoiserRole, const Denoiser*>;
// good/cond and good/uncond map to `good`; bad/* to `bad` (which may be null).
RoleMap make_role_map(const Denoiser* good, const Denoiser* bad);

struct RunReport {
  Points samples;
  std::vector<int> labels;
  std::vector<int> chains;
  long long nfe = 0;
  std::string method;
  std::vector<double> weights;
  int num_steps = 0;
  bool stochastic = true;
  std::uint64_t rng_seed = 0;
  double wall_time = 0.0;  // seconds
};

// Draws n independent chains of the guided reverse process for `label`.
// The initial state of chain i and its noise at transition k are drawn from
// seeds derived from (rng_seed, i, k), so the result does not depend on how
// chains are scheduled across threads.
RunReport sample_batch(const GuidanceMethod& method, const RoleMap& denoisers, int label,
                       std::size_t n, const SamplerConfig& config, const NoiseSchedule& schedule);

long long expected_nfe(const GuidanceMethod& method, int num_steps);

void to_json(nlohmann::json& j, const RunReport& report);
// Columns: x, y, label, chain_index. Values printed with 17 significant digits.
std::string samples_csv(const RunReport& report);

}  // namespace mog
