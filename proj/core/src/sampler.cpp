#include "mog/sampler.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <set>
#include <string>

#include "mog/errors.hpp"
#include "mog/parallel.hpp"
#include "mog/rng.hpp"

namespace mog {

namespace {

constexpr std::size_t kChainsPerTask = 256;

}  // namespace

double reverse_variance_at(double alpha_bar_t, double alpha_bar_s) {
  if (alpha_bar_s == 1.0) return 0.0;
  return (1.0 - alpha_bar_t / alpha_bar_s) * (1.0 - alpha_bar_s) / (1.0 - alpha_bar_t);
}

Vec2 reverse_step_at(const Vec2& z_t, double alpha_bar_t, double alpha_bar_s, const Vec2& eps_hat,
                     const Vec2& noise) {
  if (!(alpha_bar_s > alpha_bar_t))
    throw ContractError("reverse step requires alpha_bar_s > alpha_bar_t");
  const double ratio = alpha_bar_t / alpha_bar_s;
  const Vec2 mean = std::sqrt(alpha_bar_s / alpha_bar_t) *
                    (z_t - ((1.0 - ratio) / std::sqrt(1.0 - alpha_bar_t)) * eps_hat);
  const double var = reverse_variance_at(alpha_bar_t, alpha_bar_s);
  if (var == 0.0) return mean;
  return mean + std::sqrt(var) * noise;
}

Vec2 reverse_step(const Vec2& z_t, int t, int s, const Vec2& eps_hat,
                  const NoiseSchedule& schedule, const Vec2& noise) {
  if (!(0 <= s && s < t && t <= schedule.steps()))
    throw ContractError("reverse step needs 0 <= s < t <= T, got t = " + std::to_string(t) +
                        ", s = " + std::to_string(s));
  return reverse_step_at(z_t, schedule.alpha_bar(t), schedule.alpha_bar(s), eps_hat, noise);
}

std::vector<int> make_step_indices(int steps, int num_steps) {
  if (steps < 1) throw ParameterError("T must be >= 1");
  if (num_steps < 1 || num_steps > steps)
    throw ParameterError("num_steps must lie in [1, " + std::to_string(steps) + "], got " +
                         std::to_string(num_steps));
  std::vector<int> idx;
  idx.reserve(static_cast<std::size_t>(num_steps) + 1);
  for (long long j = num_steps; j >= 0; --j)
    idx.push_back(static_cast<int>((static_cast<long long>(steps) * j * 2 + num_steps) /
                                   (2LL * num_steps)));
  return idx;
}

void SamplerConfig::validate(int steps) const {
  if (step_indices.size() < 2) throw ParameterError("sampler needs at least one transition");
  if (step_indices.front() != steps) throw ParameterError("step_indices must start at T");
  if (step_indices.back() != 0) throw ParameterError("step_indices must end at 0");
  for (std::size_t k = 1; k < step_indices.size(); ++k)
    if (!(step_indices[k] < step_indices[k - 1]))
      throw ParameterError("step_indices must be strictly decreasing");
}

SamplerConfig make_sampler_config(int steps, int num_steps, std::uint64_t rng_seed,
                                  bool stochastic) {
  return {make_step_indices(steps, num_steps), stochastic, rng_seed};
}

GuidanceMethod::GuidanceMethod(Kind kind, std::vector<double> weights)
    : kind_(kind), weights_(std::move(weights)) {
  for (double w : weights_)
    if (!std::isfinite(w)) throw ParameterError("guidance weights must be finite");
}

GuidanceMethod GuidanceMethod::none() {
  GuidanceMethod m(Kind::none, {});
  m.roles_ = {kGoodCond};
  return m;
}

GuidanceMethod GuidanceMethod::cfg(double w) {
  GuidanceMethod m(Kind::cfg, {w});
  m.roles_ = {kGoodCond, kGoodUncond};
  return m;
}

GuidanceMethod GuidanceMethod::ag(double w) {
  GuidanceMethod m(Kind::ag, {w});
  m.roles_ = {kGoodCond, kBadCond};
  return m;
}

GuidanceMethod GuidanceMethod::pg(double w1, double w2) {
  GuidanceMethod m(Kind::pg, {w1, w2});
  m.roles_ = {kGoodCond, kGoodUncond, kBadCond};
  return m;
}

GuidanceMethod GuidanceMethod::hg(const HgWeights& weights, HgOrder order) {
  GuidanceMethod m(Kind::hg, {weights.w1, weights.w2, weights.w3});
  m.order_ = order;
  m.roles_ = {kGoodCond, kGoodUncond, kBadCond, kBadUncond};
  return m;
}

GuidanceMethod GuidanceMethod::mog(GuidanceSpec spec) {
  spec.validate();
  GuidanceMethod m(Kind::mog, {});
  for (const auto& term : spec.terms) m.weights_.push_back(term.weight);
  m.roles_ = spec.distinct_roles();
  for (const auto& term : spec.terms) {
    const auto it = std::find(m.roles_.begin(), m.roles_.end(), term.role);
    m.term_slot_.push_back(static_cast<std::size_t>(it - m.roles_.begin()));
  }
  m.spec_ = std::move(spec);
  return m;
}

std::size_t arity(GuidanceMethod::Kind kind) {
  switch (kind) {
    case GuidanceMethod::Kind::none: return 0;
    case GuidanceMethod::Kind::cfg:
    case GuidanceMethod::Kind::ag: return 1;
    case GuidanceMethod::Kind::pg: return 2;
    case GuidanceMethod::Kind::hg: return 3;
    case GuidanceMethod::Kind::mog: return 0;
  }
  return 0;
}

std::string to_string(GuidanceMethod::Kind kind) {
  switch (kind) {
    case GuidanceMethod::Kind::none: return "none";
    case GuidanceMethod::Kind::cfg: return "cfg";
    case GuidanceMethod::Kind::ag: return "ag";
    case GuidanceMethod::Kind::pg: return "pg";
    case GuidanceMethod::Kind::hg: return "hg";
    case GuidanceMethod::Kind::mog: return "mog";
  }
  return "?";
}

GuidanceMethod GuidanceMethod::from_name(const std::string& kind,
                                         const std::vector<double>& w) {
  const auto need = [&](std::size_t n) {
    if (w.size() != n)
      throw ConfigError("method '" + kind + "' takes " + std::to_string(n) + " weight(s), got " +
                        std::to_string(w.size()));
  };
  if (kind == "none") return need(0), none();
  if (kind == "cfg") return need(1), cfg(w[0]);
  if (kind == "ag") return need(1), ag(w[0]);
  if (kind == "pg") return need(2), pg(w[0], w[1]);
  if (kind == "hg") return need(3), hg({w[0], w[1], w[2]});
  throw ConfigError("unknown guidance method '" + kind + "'");
}

std::string GuidanceMethod::name() const {
  if (kind_ == Kind::mog && !spec_.name.empty()) return spec_.name;
  return to_string(kind_);
}

Vec2 GuidanceMethod::combine(std::span<const Vec2> p) const {
  switch (kind_) {
    case Kind::none: return p[0];
    case Kind::cfg: return cfg_combine(p[0], p[1], weights_[0]);
    case Kind::ag: return ag_combine(p[0], p[1], weights_[0]);
    case Kind::pg: return pg_combine(p[0], p[1], p[2], weights_[0], weights_[1]);
    case Kind::hg:
      return hg_combine(p[0], p[1], p[2], p[3], {weights_[0], weights_[1], weights_[2]}, order_);
    case Kind::mog: {
      Vec2 out = Vec2::Zero();
      for (std::size_t i = 0; i < spec_.terms.size(); ++i)
        out += spec_.terms[i].weight * p[term_slot_[i]];
      return out;
    }
  }
  return p[0];
}

RoleMap make_role_map(const Denoiser* good, const Denoiser* bad) {
  RoleMap map;
  if (good) {
    map[kGoodCond] = good;
    map[kGoodUncond] = good;
  }
  if (bad) {
    map[kBadCond] = bad;
    map[kBadUncond] = bad;
  }
  return map;
}

long long expected_nfe(const GuidanceMethod& method, int num_steps) {
  return static_cast<long long>(num_steps) * method.evaluations_per_step();
}

RunReport sample_batch(const GuidanceMethod& method, const RoleMap& denoisers, int label,
                       std::size_t n, const SamplerConfig& config, const NoiseSchedule& schedule) {
  config.validate(schedule.steps());
  std::vector<const Denoiser*> evaluators;
  for (const auto& role : method.roles()) {
    const auto it = denoisers.find(role);
    if (it == denoisers.end() || it->second == nullptr)
      throw ConfigError("method '" + method.name() + "' needs denoiser role " + to_string(role));
    evaluators.push_back(it->second);
  }
  const std::size_t roles = evaluators.size();
  const auto start = std::chrono::steady_clock::now();

  RunReport report;
  report.samples.resize(2, static_cast<Eigen::Index>(n));
  report.labels.assign(n, label);
  report.chains.resize(n);
  for (std::size_t i = 0; i < n; ++i) report.chains[i] = static_cast<int>(i);

  const std::size_t tasks = (n + kChainsPerTask - 1) / kChainsPerTask;
  parallel_for(tasks, [&](std::size_t task) {
    const std::size_t first = task * kChainsPerTask;
    const std::size_t count = std::min(kChainsPerTask, n - first);
    const auto cols = static_cast<Eigen::Index>(count);

    Points z(2, cols);
    for (Eigen::Index c = 0; c < cols; ++c) {
      const auto e = normal_pair(derive_seed(config.rng_seed, {first + static_cast<std::size_t>(c), 0}));
      z.col(c) = Vec2(e[0], e[1]);
    }

    std::vector<Points> preds(roles, Points(2, cols));
    std::vector<Vec2> column(roles);
    for (std::size_t k = 0; k + 1 < config.step_indices.size(); ++k) {
      const int t = config.step_indices[k];
      const int s = config.step_indices[k + 1];
      for (std::size_t r = 0; r < roles; ++r) {
        const auto& role = method.roles()[r];
        const Condition cond = role.conditioning == Conditioning::conditional
                                   ? Condition::label(label)
                                   : Condition::null();
        evaluators[r]->predict_batch(z, t, cond, preds[r]);
      }
      const double a_t = schedule.alpha_bar(t);
      const double a_s = schedule.alpha_bar(s);
      for (Eigen::Index c = 0; c < cols; ++c) {
        for (std::size_t r = 0; r < roles; ++r) column[r] = preds[r].col(c);
        const Vec2 eps = method.combine(column);
        Vec2 noise = Vec2::Zero();
        if (config.stochastic && s > 0) {
          const auto e = normal_pair(derive_seed(config.rng_seed, {first + static_cast<std::size_t>(c), k + 1}));
          noise = Vec2(e[0], e[1]);
        }
        const Vec2 next = reverse_step_at(z.col(c), a_t, a_s, eps, noise);
        if (!next.allFinite())
          throw NumericError("non-finite state in chain " + std::to_string(first + c) +
                             " at step " + std::to_string(k) + " (t = " + std::to_string(t) + ")");
        z.col(c) = next;
      }
    }
    report.samples.middleCols(static_cast<Eigen::Index>(first), cols) = z;
  });

  report.nfe = expected_nfe(method, config.num_steps());
  report.method = method.name();
  report.weights = method.weights();
  report.num_steps = config.num_steps();
  report.stochastic = config.stochastic;
  report.rng_seed = config.rng_seed;
  report.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

void to_json(nlohmann::json& j, const RunReport& r) {
  nlohmann::json samples = nlohmann::json::array();
  for (Eigen::Index i = 0; i < r.samples.cols(); ++i)
    samples.push_back({{"x", r.samples(0, i)},
                       {"y", r.samples(1, i)},
                       {"label", r.labels[static_cast<std::size_t>(i)]},
                       {"chain_index", r.chains[static_cast<std::size_t>(i)]}});
  j = {{"schema_version", 1},
       {"method", r.method},
       {"weights", r.weights},
       {"num_steps", r.num_steps},
       {"stochastic", r.stochastic},
       {"rng_seed", r.rng_seed},
       {"nfe", r.nfe},
       {"n_samples", r.samples.cols()},
       {"wall_time", r.wall_time},
       {"samples", std::move(samples)}};
}

std::string samples_csv(const RunReport& r) {
  std::string out = "x,y,label,chain_index\n";
  char line[128];
  for (Eigen::Index i = 0; i < r.samples.cols(); ++i) {
    std::snprintf(line, sizeof line, "%.17g,%.17g,%d,%d\n", r.samples(0, i), r.samples(1, i),
                  r.labels[static_cast<std::size_t>(i)], r.chains[static_cast<std::size_t>(i)]);
    out += line;
  }
  return out;
}

}  // namespace mog
