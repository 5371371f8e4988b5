#include <cstdio>

#include "mog/errors.hpp"
#include "mog/eval.hpp"

namespace mog {

namespace {

constexpr std::size_t kMaxCells = 10000;

GuidanceMethod bind(GuidanceMethod::Kind kind, const std::vector<double>& w) {
  switch (kind) {
    case GuidanceMethod::Kind::none: return GuidanceMethod::none();
    case GuidanceMethod::Kind::cfg: return GuidanceMethod::cfg(w[0]);
    case GuidanceMethod::Kind::ag: return GuidanceMethod::ag(w[0]);
    case GuidanceMethod::Kind::pg: return GuidanceMethod::pg(w[0], w[1]);
    case GuidanceMethod::Kind::hg: return GuidanceMethod::hg({w[0], w[1], w[2]});
    case GuidanceMethod::Kind::mog: break;
  }
  throw ParameterError("sweeps over general mixture specs are not supported");
}

}  // namespace

SweepResult sweep_grid(GuidanceMethod::Kind method, const std::vector<std::vector<double>>& axes,
                       const SweepSetup& setup) {
  if (method == GuidanceMethod::Kind::mog)
    throw ParameterError("sweeps over general mixture specs are not supported");
  if (axes.size() > 3) throw ParameterError("at most 3 sweep axes");
  if (axes.size() != arity(method))
    throw ParameterError("method " + to_string(method) + " needs " +
                         std::to_string(arity(method)) + " axes, got " +
                         std::to_string(axes.size()));
  std::size_t total = 1;
  for (const auto& axis : axes) {
    if (axis.empty()) throw ParameterError("sweep axis is empty");
    total *= axis.size();
    if (total > kMaxCells) throw ParameterError("sweep grid exceeds 10^4 cells");
  }
  if (!setup.denoisers || !setup.family || !setup.schedule)
    throw ParameterError("sweep setup is incomplete");

  const ClassMixture& target = setup.family->by_label(setup.label);
  SweepResult result;
  result.method = to_string(method);
  result.axes = axes;
  result.cells.reserve(total);
  for (std::size_t flat = 0; flat < total; ++flat) {
    std::vector<double> w(axes.size());
    std::size_t rest = flat;
    for (std::size_t a = axes.size(); a-- > 0;) {
      w[a] = axes[a][rest % axes[a].size()];
      rest /= axes[a].size();
    }
    const GuidanceMethod bound = bind(method, w);
    const RunReport run = sample_batch(bound, *setup.denoisers, setup.label, setup.n_samples,
                                       setup.sampler, *setup.schedule);
    SweepCell cell{w, compute_metrics(run.samples, target, setup.box, setup.metrics)};
    cell.metrics.nfe = run.nfe;
    result.cells.push_back(std::move(cell));
  }
  return result;
}

std::string sweep_csv(const SweepResult& result) {
  static const char* names[] = {"w1", "w2", "w3"};
  std::string out;
  if (result.axes.size() == 1) {
    out += "w,";
  } else {
    for (std::size_t a = 0; a < result.axes.size(); ++a) out += std::string(names[a]) + ",";
  }
  out += "outlier_fraction,mode_coverage,hist_kl,nfe\n";
  char buf[64];
  for (const auto& cell : result.cells) {
    for (double w : cell.weights) {
      std::snprintf(buf, sizeof buf, "%.17g,", w);
      out += buf;
    }
    std::snprintf(buf, sizeof buf, "%.17g,", cell.metrics.outlier_fraction);
    out += buf;
    std::snprintf(buf, sizeof buf, "%.17g,", cell.metrics.mode_coverage);
    out += buf;
    std::snprintf(buf, sizeof buf, "%.17g,", cell.metrics.hist_kl);
    out += buf;
    out += std::to_string(cell.metrics.nfe) + "\n";
  }
  return out;
}

void to_json(nlohmann::json& j, const SweepResult& s) {
  j = {{"schema_version", 1}, {"method", s.method}, {"axes", s.axes}, {"cells", nlohmann::json::array()}};
  for (const auto& cell : s.cells) j["cells"].push_back({{"weights", cell.weights}, {"metrics", cell.metrics}});
}

}  // namespace mog
