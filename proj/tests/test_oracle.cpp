#include <cmath>

#include <gtest/gtest.h>

#include "mog/diffusion.hpp"
#include "mog/errors.hpp"
#include "mog/oracle.hpp"
#include "oracles.hpp"

namespace mog {
namespace {

const LabeledMixtureFamily& toy_family() {
  static const auto family = build_fractal_family({});
  return family;
}

const NoiseSchedule& toy_schedule() {
  static const auto schedule = make_cosine_schedule(128);
  return schedule;
}

// A point drawn from the noisy marginal of class `label` at step t.
Vec2 noisy_draw(int label, int t, Rng& rng) {
  const Vec2 z0 = sample_point(toy_family(), label, rng);
  return forward_diffuse(z0, t, testing::random_vec(rng), toy_schedule());
}

TEST(NoisyMarginal, IdentityAtFullRetention) {
  const auto& m = toy_family().classes[0];
  const auto noisy = noisy_marginal_at(m, 1.0);
  ASSERT_EQ(noisy.components.size(), m.components.size());
  for (std::size_t i = 0; i < m.components.size(); ++i) {
    EXPECT_EQ(noisy.components[i].weight, m.components[i].weight);
    EXPECT_EQ(noisy.components[i].mean, m.components[i].mean);
    EXPECT_EQ(noisy.components[i].cov, m.components[i].cov);
  }
  const auto at_zero = noisy_marginal(m, 0, toy_schedule());
  EXPECT_EQ(at_zero.components[3].cov, m.components[3].cov);
}

TEST(NoisyMarginal, TendsToStandardNormal) {
  const auto noisy = noisy_marginal_at(toy_family().classes[1], 1e-14);
  for (const auto& c : noisy.components) {
    EXPECT_LT(c.mean.norm(), 1e-6);
    EXPECT_LT((c.cov - Mat2::Identity()).norm(), 1e-12);
  }
}

TEST(NoisyMarginal, WorkedExample) {
  ClassMixture m{0, {{1.0, Vec2(2, 0), Mat2::Identity()}}};
  const auto noisy = noisy_marginal_at(m, 0.25);
  EXPECT_NEAR(noisy.components[0].mean.x(), 1.0, 1e-15);
  EXPECT_NEAR(noisy.components[0].mean.y(), 0.0, 1e-15);
  EXPECT_LT((noisy.components[0].cov - Mat2::Identity()).norm(), 1e-15);
}

TEST(AnalyticEps, SingleGaussianClosedForm) {
  ClassMixture m{0, {{1.0, Vec2::Zero(), Mat2::Identity()}}};
  const NoiseSchedule sched({1.0, 0.75, 0.0005});
  const Vec2 eps = analytic_eps(m, Vec2(2, 0), 1, sched);
  EXPECT_NEAR(eps.x(), 1.0, 1e-14);
  EXPECT_NEAR(eps.y(), 0.0, 1e-14);
  EXPECT_THROW(analytic_eps(m, Vec2(2, 0), 0, sched), UndefinedConversionError);
}

TEST(AnalyticEps, UnknownLabelThrows) {
  EXPECT_THROW(analytic_eps(toy_family(), Condition::label(5), Vec2::Zero(), 3, toy_schedule()),
               LookupError);
}

TEST(AnalyticEps, MatchesFiniteDifferenceGradient) {
  const auto& sched = toy_schedule();
  Rng rng = make_rng(101);
  int checked = 0;
  for (int t : {1, 32, 64, 128}) {
    for (int k = 0; k < 60; ++k) {
      const int label = k % 2;
      const Vec2 z = noisy_draw(label, t, rng);
      const auto& cls = toy_family().classes[label];
      const double a = sched.alpha_bar(t);
      const auto f = [&](const Vec2& x) { return log_noisy_density(cls, x, a); };
      const Vec2 expected = -std::sqrt(1 - a) * testing::fd_gradient(f, z, 1e-4);
      const Vec2 got = analytic_eps(toy_family(), Condition::label(label), z, t, sched);
      EXPECT_LT(testing::rel_diff(got, expected), 1e-4) << "t=" << t << " z=" << z.transpose();
      ++checked;
    }
  }
  EXPECT_GE(checked, 200);
}

TEST(AnalyticEps, MatchesMonteCarloPosteriorMean) {
  const auto& sched = toy_schedule();
  Rng rng = make_rng(202);
  const int ts[] = {24, 48, 80, 128};
  for (int k = 0; k < 20; ++k) {
    const int t = ts[k % 4];
    const int label = k % 2;
    const Vec2 z = noisy_draw(label, t, rng);
    const auto est = testing::mc_posterior_eps(toy_family().classes[label], z,
                                               sched.alpha_bar(t), 100000, rng);
    const Vec2 got = analytic_eps(toy_family(), Condition::label(label), z, t, sched);
    for (int d = 0; d < 2; ++d)
      EXPECT_LE(std::abs(got(d) - est.mean(d)), 3 * est.standard_error(d))
          << "t=" << t << " coord " << d;
  }
}

TEST(AnalyticEps, NullConditionIsPriorWeightedMixtureScore) {
  const auto& sched = toy_schedule();
  Rng rng = make_rng(303);
  for (int k = 0; k < 200; ++k) {
    const int t = 1 + k % 128;
    const double a = sched.alpha_bar(t);
    const Vec2 z = noisy_draw(k % 2, t, rng);
    // p(z) = sum_c prior_c p(z|c), built here from the per-class noisy copies
    ClassMixture joint{-1, {}};
    for (std::size_t c = 0; c < toy_family().num_classes(); ++c)
      for (auto comp : testing::noisy_copy(toy_family().classes[c], a).components) {
        comp.weight *= toy_family().class_prior[c];
        joint.components.push_back(comp);
      }
    if (testing::direct_density(joint, z) < 1e-250) continue;
    const Vec2 expected = -std::sqrt(1 - a) * testing::direct_score(joint, z);
    const Vec2 got = analytic_eps(toy_family(), Condition::null(), z, t, sched);
    EXPECT_LT((got - expected).norm(), 1e-9 * std::max(1.0, expected.norm()));
  }
}

TEST(AnalyticDenoiser, BatchMatchesScalarOracle) {
  const auto& sched = toy_schedule();
  const AnalyticDenoiser oracle(toy_family(), sched);
  Rng rng = make_rng(404);
  Points z(2, 64);
  for (Eigen::Index i = 0; i < z.cols(); ++i) z.col(i) = testing::random_vec(rng);
  Points out;
  for (int t : {1, 7, 64, 128}) {
    for (Condition cond : {Condition::label(0), Condition::label(1), Condition::null()}) {
      oracle.predict_batch(z, t, cond, out);
      for (Eigen::Index i = 0; i < z.cols(); ++i) {
        const Vec2 ref = analytic_eps(toy_family(), cond, z.col(i), t, sched);
        EXPECT_LT((out.col(i) - ref).norm(), 1e-9 * std::max(1.0, ref.norm()));
      }
    }
  }
  EXPECT_THROW(oracle.predict_batch(z, 0, Condition::null(), out), UndefinedConversionError);
}

TEST(Decomposition, IdentityAtRandomPoints) {
  const auto& sched = toy_schedule();
  Rng rng = make_rng(505);
  for (int k = 0; k < 1000; ++k) {
    const int t = 1 + k % 128;
    const Vec2 z = testing::random_vec(rng, 1.2);
    const Vec2 uncond = testing::random_vec(rng);
    const auto d = decompose_cfg_direction(toy_family(), k % 2, uncond, z, t, sched);
    EXPECT_LT((d.score_correction + d.condition_alignment - d.total).norm(), 1e-10);
  }
}

TEST(Decomposition, PerfectUnconditionalModel) {
  const auto& sched = toy_schedule();
  Rng rng = make_rng(606);
  for (int k = 0; k < 200; ++k) {
    const int t = 1 + k % 128;
    const Vec2 z = testing::random_vec(rng, 1.2);
    const Vec2 uncond = analytic_eps(toy_family(), Condition::null(), z, t, sched);
    const auto d = decompose_cfg_direction(toy_family(), 0, uncond, z, t, sched);
    EXPECT_LT(d.score_correction.norm(), 1e-10);
    EXPECT_EQ(d.total, d.condition_alignment);
  }
}

TEST(Decomposition, OneClassFamilyHasNoAlignment) {
  LabeledMixtureFamily one{{toy_family().classes[0]}, {1.0}};
  const auto& sched = toy_schedule();
  Rng rng = make_rng(707);
  for (int k = 0; k < 100; ++k) {
    const auto d = decompose_cfg_direction(one, 0, Vec2::Zero(), testing::random_vec(rng),
                                           1 + k % 128, sched);
    EXPECT_LT(d.condition_alignment.norm(), 1e-12);
  }
}

TEST(Decomposition, AlignmentIsPosteriorGradient) {
  const auto& sched = toy_schedule();
  Rng rng = make_rng(808);
  int checked = 0;
  for (int t : {16, 48, 96, 128}) {
    const double a = sched.alpha_bar(t);
    LabeledMixtureFamily noisy = toy_family();
    for (auto& cls : noisy.classes) cls = testing::noisy_copy(cls, a);
    for (int k = 0; k < 25; ++k) {
      const int label = k % 2;
      const Vec2 z = noisy_draw(1 - label, t, rng);
      const auto f = [&](const Vec2& x) { return std::log(class_posterior(noisy, x)[label]); };
      const Vec2 expected = -std::sqrt(1 - a) * testing::fd_gradient(f, z, 1e-4);
      if (expected.norm() < 1e-6) continue;
      const auto d = decompose_cfg_direction(toy_family(), label, Vec2::Zero(), z, t, sched);
      EXPECT_LT(testing::rel_diff(d.condition_alignment, expected), 1e-4) << "t=" << t;
      ++checked;
    }
  }
  EXPECT_GT(checked, 50);
}

}  // namespace
}  // namespace mog
