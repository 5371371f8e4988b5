#pragma once

#include <vector>

#include "mog/denoiser.hpp"
#include "mog/diffusion.hpp"
#include "mog/mixture.hpp"

namespace mog {

// Exact marginal of z_t = sqrt(a) z0 + sqrt(1-a) eps when z0 is a Gaussian
// mixture: weights unchanged, means sqrt(a) mu, covariances a Sigma + (1-a) I.
struct NoisyMixtureParams {
  std::vector<GaussianComponent> components;
};

NoisyMixtureParams noisy_marginal_at(const ClassMixture& mixture, double alpha_bar);
// At t = 0 the original parameters are returned unchanged.
NoisyMixtureParams noisy_marginal(const ClassMixture& mixture, int t, const NoiseSchedule& schedule);

double log_noisy_density(const ClassMixture& mixture, const Vec2& z, double alpha_bar);
double log_noisy_density(const LabeledMixtureFamily& family, Condition condition, const Vec2& z,
                         int t, const NoiseSchedule& schedule);

// grad_z log p_t(z) of the noisy mixture.
Vec2 noisy_score(const ClassMixture& mixture, const Vec2& z, double alpha_bar);

// Bayes-optimal eps-prediction E[eps | z_t, condition]. A null condition uses
// the class-prior-weighted marginal of all classes.
Vec2 analytic_eps(const ClassMixture& mixture, const Vec2& z, int t, const NoiseSchedule& schedule);
Vec2 analytic_eps(const LabeledMixtureFamily& family, Condition condition, const Vec2& z, int t,
                  const NoiseSchedule& schedule);

// Oracle denoiser with the per-step noisy-marginal parameters precomputed.
class AnalyticDenoiser final : public Denoiser {
 public:
  AnalyticDenoiser(LabeledMixtureFamily family, NoiseSchedule schedule);

  void predict_batch(const Points& z, int t, Condition condition, Points& out) const override;

  const LabeledMixtureFamily& family() const { return family_; }
  const NoiseSchedule& schedule() const { return schedule_; }

 private:
  struct Table {
    // one entry per component, row-major over steps
    std::vector<double> log_weight;  // log phi + log-normalizer
    std::vector<Vec2> mean;
    std::vector<Mat2> precision;
    std::size_t count = 0;
  };
  Table build_table(const ClassMixture& mixture) const;
  const Table& table_for(Condition condition) const;

  LabeledMixtureFamily family_;
  NoiseSchedule schedule_;
  std::vector<Table> per_class_;
  Table marginal_;
};

// CFG direction split into the score-correction and condition-alignment
// terms, all in eps space.
struct CfgDecomposition {
  Vec2 score_correction = Vec2::Zero();
  Vec2 condition_alignment = Vec2::Zero();
  Vec2 total = Vec2::Zero();
};

CfgDecomposition decompose_cfg_direction(const LabeledMixtureFamily& family, int label,
                                         const Vec2& uncond_eps, const Vec2& z, int t,
                                         const NoiseSchedule& schedule);

}  // namespace mog
