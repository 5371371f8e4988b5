#include <benchmark/benchmark.h>

#include "mog/guidance.hpp"
#include "mog/mlp.hpp"
#include "mog/oracle.hpp"
#include "mog/sampler.hpp"

using namespace mog;

namespace {

const LabeledMixtureFamily& family() {
  static const LabeledMixtureFamily f = build_fractal_family(FractalConfig{});
  return f;
}

Points random_points(Eigen::Index n) {
  Rng rng = make_rng(1);
  std::normal_distribution<double> d(0.0, 1.0);
  Points z(2, n);
  for (Eigen::Index i = 0; i < n; ++i) z.col(i) = Vec2(d(rng), d(rng));
  return z;
}

}  // namespace

static void BM_OraclePredictBatch(benchmark::State& state) {
  const AnalyticDenoiser oracle(family(), make_cosine_schedule(128));
  const Points z = random_points(state.range(0));
  Points out;
  for (auto _ : state) {
    oracle.predict_batch(z, 32, Condition::label(0), out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_OraclePredictBatch)->Arg(256)->Arg(4096);

static void BM_MlpForward(benchmark::State& state) {
  const MlpDenoiser model = init_mlp(static_cast<int>(state.range(0)), 3, 2, 11);
  const Points z = random_points(256);
  Points out;
  for (auto _ : state) {
    model.predict_batch(z, 32, Condition::label(0), out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * 256);
}
BENCHMARK(BM_MlpForward)->Arg(32)->Arg(64);

// One Adam step at the training batch size.
static void BM_TrainStep(benchmark::State& state) {
  TrainConfig config;
  config.iterations = 1;
  config.batch_size = static_cast<std::size_t>(state.range(0));
  const MlpDenoiser model = init_mlp(64, 3, 2, 11);
  for (auto _ : state) {
    auto r = train(model, family(), config);
    benchmark::DoNotOptimize(r.loss.data());
  }
}
BENCHMARK(BM_TrainStep)->Arg(512)->Unit(benchmark::kMillisecond);

static void BM_HgExpansion(benchmark::State& state) {
  HgWeights w{1.5, 1.5, 2.0};
  for (auto _ : state) {
    const auto c = expand_hg_to_coefficients(w, HgOrder::ag_inner);
    const auto m = map_hg_order(w, HgOrder::cfg_inner, HgOrder::ag_inner);
    benchmark::DoNotOptimize(c);
    benchmark::DoNotOptimize(m);
    w.w1 += 1e-12;
  }
}
BENCHMARK(BM_HgExpansion);

static void BM_SampleHgOracle(benchmark::State& state) {
  const NoiseSchedule sched = make_cosine_schedule(128);
  const AnalyticDenoiser oracle(family(), sched);
  const RoleMap roles = make_role_map(&oracle, &oracle);
  const GuidanceMethod method = GuidanceMethod::hg({1.5, 1.5, 2});
  const SamplerConfig config = make_sampler_config(128, 32, 5);
  for (auto _ : state) {
    auto r = sample_batch(method, roles, 0, static_cast<std::size_t>(state.range(0)), config, sched);
    benchmark::DoNotOptimize(r.samples.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SampleHgOracle)->Arg(1024)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
