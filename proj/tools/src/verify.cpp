#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>

#include "mog/cli.hpp"
#include "mog/errors.hpp"
#include "mog/guidance.hpp"
#include "mog/oracle.hpp"

namespace mog::cli {
namespace {

struct SuiteResult {
  std::string name;
  std::size_t checked = 0;
  std::size_t failed = 0;
  double worst = 0.0;  // largest error seen, in the suite's own units
};

std::array<double, 4> as_array(const CoefficientVector& c) {
  return {c.good_cond, c.good_uncond, c.bad_cond, c.bad_uncond};
}

SuiteResult equivalence_suite() {
  SuiteResult r{"order equivalence"};
  Rng rng = make_rng(20250101);
  std::uniform_real_distribution<double> u(-3.0, 4.0);
  while (r.checked < 1000) {
    const HgWeights w{u(rng), u(rng), u(rng)};
    if (std::abs(w.w3) <= 0.05 || std::abs(w.w3 - 1) <= 0.05) continue;
    ++r.checked;
    bool ok = true;
    try {
      for (auto [from, to] : {std::pair{HgOrder::ag_inner, HgOrder::cfg_inner},
                              std::pair{HgOrder::cfg_inner, HgOrder::ag_inner}}) {
        const HgWeights m = map_hg_order(w, from, to);
        const auto a = as_array(expand_hg_to_coefficients(w, from));
        const auto b = as_array(expand_hg_to_coefficients(m, to));
        for (int i = 0; i < 4; ++i) {
          const double err = std::abs(a[i] - b[i]) / std::max(1.0, std::abs(a[i]));
          r.worst = std::max(r.worst, err);
          ok = ok && err <= 1e-9;
        }
        const HgWeights back = map_hg_order(m, to, from);
        for (auto [x, y] : {std::pair{back.w1, w.w1}, std::pair{back.w2, w.w2},
                            std::pair{back.w3, w.w3}})
          ok = ok && std::abs(x - y) <= 1e-12 * std::max(1.0, std::abs(y));
      }
    } catch (const DegenerateMappingError&) {
      ok = false;
    }
    if (!ok) ++r.failed;
  }
  return r;
}

SuiteResult lattice_suite() {
  SuiteResult r{"reduction lattice"};
  Rng rng = make_rng(20250102);
  std::uniform_real_distribution<double> u(-3.0, 4.0);
  std::normal_distribution<double> n(0.0, 2.0);
  const auto vec = [&] { return Vec2(n(rng), n(rng)); };
  for (int k = 0; k < 1000; ++k) {
    const Vec2 c = vec(), un = vec(), bc = vec(), bu = vec();
    const double w1 = u(rng), w2 = u(rng), w3 = u(rng);
    const std::pair<Vec2, Vec2> pairs[] = {
        {hg_combine(c, un, bc, bu, {w1, w2, 1.0}), cfg_combine(c, un, w1)},
        {hg_combine(c, un, bc, bu, {1.0, 1.0, w3}), ag_combine(c, bc, w3)},
        {hg_combine(c, un, bc, bu, {1.0, w2, 1.0}), c},
        {cfg_combine(c, un, 1.0), c},
        {ag_combine(c, bc, 1.0), c},
        {pg_combine(c, un, bc, w1, 0.0), cfg_combine(c, un, w1)},
        {hg_combine(c, un, bc, bu, {w1, 1.0, w3}), pg_combine(c, un, bc, 1 - w3 + w1 * w3, w3 - 1)},
    };
    for (const auto& [got, want] : pairs) {
      ++r.checked;
      const double err = (got - want).norm() / std::max(1.0, want.norm());
      r.worst = std::max(r.worst, err);
      if (err > 1e-12) ++r.failed;
    }
  }
  return r;
}

SuiteResult oracle_suite() {
  SuiteResult r{"oracle finite differences"};
  const LabeledMixtureFamily family = build_fractal_family(FractalConfig{});
  const NoiseSchedule schedule = make_cosine_schedule(128);
  Rng rng = make_rng(20250103);
  const double h = 1e-4;
  for (int t : {1, 8, 32, 64, 128}) {
    for (int k = 0; k < 48; ++k) {
      const int label = k % 2;
      const Condition cond = k % 6 == 5 ? Condition::null() : Condition::label(label);
      Vec2 z = sample_point(family, label, rng);
      std::normal_distribution<double> n(0.0, 1.0);
      z = forward_diffuse(z, t, Vec2(n(rng), n(rng)), schedule);
      const auto logp = [&](const Vec2& x) {
        return log_noisy_density(family, cond, x, t, schedule);
      };
      Vec2 grad;
      for (int i = 0; i < 2; ++i) {
        Vec2 e = Vec2::Zero();
        e[i] = h;
        grad[i] = (logp(z + e) - logp(z - e)) / (2 * h);
      }
      const Vec2 want = -std::sqrt(1 - schedule.alpha_bar(t)) * grad;
      const Vec2 got = analytic_eps(family, cond, z, t, schedule);
      const double err = (got - want).norm() / std::max(want.norm(), 1e-8);
      ++r.checked;
      r.worst = std::max(r.worst, err);
      if (!(err <= 1e-4)) ++r.failed;
    }
  }
  return r;
}

}  // namespace

int cmd_verify(std::ostream& log) {
  bool ok = true;
  for (const auto& suite : {equivalence_suite, lattice_suite, oracle_suite}) {
    const SuiteResult r = suite();
    const bool pass = r.failed == 0 && r.checked > 0;
    ok = ok && pass;
    log << (pass ? "PASS " : "FAIL ") << r.name << ": " << r.checked - r.failed << "/"
        << r.checked << " checks, worst error " << r.worst << '\n';
  }
  return ok ? kOk : kPropertyFailure;
}

}  // namespace mog::cli
