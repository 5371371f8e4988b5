#include <array>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "mog/errors.hpp"
#include "mog/guidance.hpp"
#include "oracles.hpp"

namespace mog {
namespace {

using testing::nested_hg;
using testing::probe_coefficients;

std::array<double, 4> as_array(const CoefficientVector& c) {
  return {c.good_cond, c.good_uncond, c.bad_cond, c.bad_uncond};
}

void expect_coefficients(const CoefficientVector& got, const std::array<double, 4>& want,
                         double tol) {
  const auto g = as_array(got);
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(g[i], want[i], tol) << "coefficient " << i;
}

HgWeights random_weights(Rng& rng) {
  std::uniform_real_distribution<double> u(-3.0, 4.0);
  HgWeights w;
  do {
    w = {u(rng), u(rng), u(rng)};
  } while (std::abs(w.w3) <= 0.05 || std::abs(w.w3 - 1) <= 0.05);
  return w;
}

bool mapped_is_degenerate(const HgWeights& w) {
  const double w3 = w.w1 * w.w3 + w.w2 * (1 - w.w3);
  return w3 == 0.0 || w3 == 1.0;
}

TEST(Cfg, Examples) {
  const Vec2 c(0.3, -2.0), u(1.7, 0.4);
  EXPECT_EQ(cfg_combine(c, u, 1.0), c);
  EXPECT_EQ(cfg_combine(c, u, 0.0), u);
  EXPECT_EQ(cfg_combine(Vec2(1, 0), Vec2(0, 0), 3.0), Vec2(3, 0));
}

TEST(Ag, Examples) {
  const Vec2 g(0.3, -2.0), b(1.7, 0.4);
  EXPECT_EQ(ag_combine(g, b, 1.0), g);
  EXPECT_EQ(ag_combine(Vec2(1, 0), Vec2(0.5, 0), 3.0), Vec2(2, 0));
  for (double w : {-4.0, 0.0, 0.5, 3.0, 17.0}) EXPECT_LT((ag_combine(g, g, w) - g).norm(), 1e-14);
}

TEST(Pg, Examples) {
  Rng rng = make_rng(1);
  const Vec2 c = testing::random_vec(rng), u = testing::random_vec(rng),
             bc = testing::random_vec(rng);
  EXPECT_EQ(pg_combine(c, u, bc, 2.5, 0.0), cfg_combine(c, u, 2.5));
  EXPECT_LT((pg_combine(c, u, bc, 0.0, 1.3) - (u + 1.3 * (c - bc))).norm(), 1e-14);
  const Vec2 r = pg_combine(Vec2(1, 0), Vec2(0, 0), Vec2(0.8, 0), 4.6, 0.2);
  EXPECT_NEAR(r.x(), 4.64, 1e-12);
  EXPECT_EQ(r.y(), 0.0);
}

TEST(Hg, WorkedExample) {
  const Vec2 c(1, 0), u(0, 0), bc(0.8, 0), bu(0.1, 0);
  const HgWeights w{4, 3.3, 1.2};
  EXPECT_NEAR(cfg_combine(c, u, w.w1).x(), 4.0, 1e-12);
  EXPECT_NEAR(cfg_combine(bc, bu, w.w2).x(), 2.41, 1e-12);
  const Vec2 r = hg_combine(c, u, bc, bu, w);
  EXPECT_NEAR(r.x(), 4.318, 1e-12);
  EXPECT_EQ(r.y(), 0.0);
}

TEST(Hg, MatchesNestedFormula) {
  Rng rng = make_rng(2);
  for (int k = 0; k < 1000; ++k) {
    const HgWeights w = random_weights(rng);
    const Vec2 c = testing::random_vec(rng), u = testing::random_vec(rng),
               bc = testing::random_vec(rng), bu = testing::random_vec(rng);
    for (HgOrder order : {HgOrder::cfg_inner, HgOrder::ag_inner}) {
      const Vec2 got = hg_combine(c, u, bc, bu, w, order);
      for (int d = 0; d < 2; ++d) {
        const double want = nested_hg(c(d), u(d), bc(d), bu(d), w, order);
        EXPECT_NEAR(got(d), want, 1e-12 * std::max(1.0, std::abs(want)));
      }
    }
  }
}

TEST(Expand, WorkedExamples) {
  expect_coefficients(expand_hg_to_coefficients({1.5, 1.5, 2}, HgOrder::ag_inner),
                      {3, -1.5, -1, 0.5}, 1e-15);
  expect_coefficients(expand_hg_to_coefficients({2.7, -0.4, 1}, HgOrder::cfg_inner),
                      {2.7, -1.7, 0, 0}, 1e-15);
  expect_coefficients(expand_hg_to_coefficients({2.7, -0.4, 0}, HgOrder::cfg_inner),
                      {0, 0, -0.4, 1.4}, 1e-15);
}

TEST(Expand, MatchesProbedNestedForm) {
  Rng rng = make_rng(3);
  for (int k = 0; k < 1000; ++k) {
    const HgWeights w = random_weights(rng);
    for (HgOrder order : {HgOrder::cfg_inner, HgOrder::ag_inner})
      expect_coefficients(expand_hg_to_coefficients(w, order),
                          as_array(probe_coefficients(w, order)), 1e-12);
  }
}

TEST(Expand, CoefficientsSumToOne) {
  Rng rng = make_rng(4);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  for (int k = 0; k < 10000; ++k) {
    const HgWeights w{u(rng), u(rng), u(rng)};
    for (HgOrder order : {HgOrder::cfg_inner, HgOrder::ag_inner}) {
      const auto c = expand_hg_to_coefficients(w, order);
      const double scale = std::abs(c.good_cond) + std::abs(c.good_uncond) +
                           std::abs(c.bad_cond) + std::abs(c.bad_uncond);
      EXPECT_NEAR(c.sum(), 1.0, 1e-9 * std::max(1.0, scale / 100));
    }
  }
}

TEST(MapOrder, WorkedExample) {
  const HgWeights mapped = map_hg_order({1.5, 1.5, 2}, HgOrder::ag_inner, HgOrder::cfg_inner);
  EXPECT_NEAR(mapped.w1, 2.0, 1e-15);
  EXPECT_NEAR(mapped.w2, 2.0, 1e-15);
  EXPECT_NEAR(mapped.w3, 1.5, 1e-15);
  expect_coefficients(expand_hg_to_coefficients(mapped, HgOrder::cfg_inner), {3, -1.5, -1, 0.5},
                      1e-14);
}

TEST(MapOrder, SameOrderIsIdentity) {
  const HgWeights w{0.3, 1.7, -2};
  EXPECT_EQ(map_hg_order(w, HgOrder::cfg_inner, HgOrder::cfg_inner), w);
}

TEST(MapOrder, EquivalenceAndRoundTrip) {
  Rng rng = make_rng(5);
  int checked = 0;
  for (int k = 0; k < 1000; ++k) {
    const HgWeights w = random_weights(rng);
    if (mapped_is_degenerate(w)) continue;
    for (auto [from, to] : {std::pair{HgOrder::ag_inner, HgOrder::cfg_inner},
                            std::pair{HgOrder::cfg_inner, HgOrder::ag_inner}}) {
      const HgWeights m = map_hg_order(w, from, to);
      const auto a = as_array(expand_hg_to_coefficients(w, from));
      const auto b = as_array(expand_hg_to_coefficients(m, to));
      for (int i = 0; i < 4; ++i)
        EXPECT_NEAR(a[i], b[i], 1e-9 * std::max(1.0, std::abs(a[i])));
      const HgWeights back = map_hg_order(m, to, from);
      EXPECT_NEAR(back.w1, w.w1, 1e-12 * std::max(1.0, std::abs(w.w1)));
      EXPECT_NEAR(back.w2, w.w2, 1e-12 * std::max(1.0, std::abs(w.w2)));
      EXPECT_NEAR(back.w3, w.w3, 1e-12 * std::max(1.0, std::abs(w.w3)));
    }
    ++checked;
  }
  EXPECT_GT(checked, 990);
}

TEST(MapOrder, DegenerateCases) {
  for (double w3 : {0.0, 1.0})
    EXPECT_THROW(map_hg_order({2, 3, w3}, HgOrder::cfg_inner, HgOrder::ag_inner),
                 DegenerateMappingError);
  // mapped w3 = w1 w3 + w2 (1 - w3) = 2 - 1 = 1
  EXPECT_THROW(map_hg_order({1, 1, 2}, HgOrder::ag_inner, HgOrder::cfg_inner),
               DegenerateMappingError);
  // mapped w3 = 0
  EXPECT_THROW(map_hg_order({1, 2, 2}, HgOrder::ag_inner, HgOrder::cfg_inner),
               DegenerateMappingError);
}

TEST(Reductions, Lattice) {
  Rng rng = make_rng(6);
  std::uniform_real_distribution<double> u(-3.0, 4.0);
  const auto close = [](const Vec2& a, const Vec2& b) {
    return (a - b).norm() <= 1e-12 * std::max(1.0, b.norm());
  };
  for (int k = 0; k < 1000; ++k) {
    const Vec2 c = testing::random_vec(rng), un = testing::random_vec(rng),
               bc = testing::random_vec(rng), bu = testing::random_vec(rng);
    const double w1 = u(rng), w2 = u(rng), w3 = u(rng);
    EXPECT_TRUE(close(hg_combine(c, un, bc, bu, {w1, w2, 1.0}), cfg_combine(c, un, w1)));
    EXPECT_TRUE(close(hg_combine(c, un, bc, bu, {1.0, 1.0, w3}), ag_combine(c, bc, w3)));
    EXPECT_TRUE(close(hg_combine(c, un, bc, bu, {1.0, w2, 1.0}), c));
    EXPECT_TRUE(close(cfg_combine(c, un, 1.0), c));
    EXPECT_TRUE(close(ag_combine(c, bc, 1.0), c));
    EXPECT_TRUE(close(pg_combine(c, un, bc, w1, 0.0), cfg_combine(c, un, w1)));
    EXPECT_TRUE(close(hg_combine(c, un, bc, bu, {w1, 1.0, w3}),
                      pg_combine(c, un, bc, 1 - w3 + w1 * w3, w3 - 1)));
  }
}

TEST(Spec, Constructors) {
  EXPECT_EQ(GuidanceSpec::none().terms.size(), 1u);
  EXPECT_EQ(GuidanceSpec::cfg(3).terms.size(), 2u);
  EXPECT_EQ(GuidanceSpec::ag(3).terms.size(), 2u);
  EXPECT_EQ(GuidanceSpec::pg(2, 2).terms.size(), 3u);
  EXPECT_EQ(GuidanceSpec::hg({1.5, 1.5, 2}).terms.size(), 4u);
  for (const auto& s : {GuidanceSpec::none(), GuidanceSpec::cfg(3), GuidanceSpec::ag(-2),
                        GuidanceSpec::pg(4.6, 0.2), GuidanceSpec::hg({4, 3.3, 1.2})}) {
    EXPECT_NO_THROW(s.validate()) << s.name;
    EXPECT_NEAR(s.weight_sum(), 1.0, 1e-12);
  }
}

TEST(Spec, NumPrinciples) {
  EXPECT_EQ(GuidanceSpec::none().num_principles(), 0);
  EXPECT_EQ(GuidanceSpec::cfg(3).num_principles(), 1);
  EXPECT_EQ(GuidanceSpec::ag(3).num_principles(), 1);
  EXPECT_EQ(GuidanceSpec::pg(2, 2).num_principles(), 2);
  EXPECT_EQ(GuidanceSpec::hg({1.5, 1.5, 2}).num_principles(), 2);
  EXPECT_EQ(GuidanceSpec::hg({1.5, 1.5, 2}).distinct_roles().size(), 4u);
}

TEST(Spec, ValidateNamesTheSum) {
  GuidanceSpec s{"broken", {{0.5, kGoodCond}, {0.6, kGoodUncond}}};
  try {
    s.validate();
    FAIL() << "expected ContractError";
  } catch (const ContractError& e) {
    EXPECT_NE(std::string(e.what()).find("1.1"), std::string::npos) << e.what();
  }
  EXPECT_THROW(GuidanceSpec{}.validate(), ContractError);
}

TEST(MogCombine, Properties) {
  Rng rng = make_rng(7);
  const Vec2 v = testing::random_vec(rng);
  const std::array<Vec2, 4> same{v, v, v, v};
  for (const auto& w : {HgWeights{1.5, 1.5, 2}, HgWeights{4, 3.3, 1.2}}) {
    const auto spec = GuidanceSpec::from_coefficients(expand_hg_to_coefficients(w, HgOrder::cfg_inner));
    EXPECT_LT((mog_combine(same, spec) - v).norm(), 1e-14);
  }
  const std::array<Vec2, 1> one{v};
  EXPECT_EQ(mog_combine(one, GuidanceSpec::none()), v);
  EXPECT_THROW(mog_combine(one, GuidanceSpec::cfg(2)), ContractError);
  GuidanceSpec broken{"x", {{0.7, kGoodCond}}};
  EXPECT_THROW(mog_combine(one, broken), ContractError);

  for (int k = 0; k < 200; ++k) {
    const HgWeights w = random_weights(rng);
    const std::array<Vec2, 4> base{testing::random_vec(rng), testing::random_vec(rng),
                                   testing::random_vec(rng), testing::random_vec(rng)};
    const auto spec = GuidanceSpec::from_coefficients(expand_hg_to_coefficients(w, HgOrder::cfg_inner));
    const Vec2 ref = hg_combine(base[0], base[1], base[2], base[3], w);
    EXPECT_LT((mog_combine(base, spec) - ref).norm(), 1e-12 * std::max(1.0, ref.norm()));
  }
}

TEST(Spec, JsonRoundTrip) {
  const auto spec = GuidanceSpec::hg({1.5, 1.5, 2});
  const nlohmann::json j = spec;
  EXPECT_EQ(j["terms"][0]["quality"], "good");
  EXPECT_EQ(j["terms"][1]["conditioning"], "uncond");
  const auto back = j.get<GuidanceSpec>();
  EXPECT_EQ(back.name, spec.name);
  ASSERT_EQ(back.terms.size(), spec.terms.size());
  for (std::size_t i = 0; i < spec.terms.size(); ++i) {
    EXPECT_EQ(back.terms[i].weight, spec.terms[i].weight);
    EXPECT_EQ(back.terms[i].role, spec.terms[i].role);
  }
  EXPECT_THROW(nlohmann::json::parse(R"({"name":"x","terms":[{"weight":1,"quality":"great","conditioning":"cond"}]})")
                   .get<GuidanceSpec>(),
               ConfigError);
}

TEST(HgOrderNames, RoundTrip) {
  for (HgOrder o : {HgOrder::cfg_inner, HgOrder::ag_inner}) EXPECT_EQ(parse_hg_order(to_string(o)), o);
  EXPECT_THROW(parse_hg_order("sideways"), ConfigError);
}

}  // namespace
}  // namespace mog
