#include <fstream>
#include <ostream>

#include <CLI11.hpp>

#include "mog/cli.hpp"
#include "mog/errors.hpp"

namespace mog::cli {
namespace {

struct Common {
  std::string config_path;
  std::string out;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("-c,--config", c.config_path, "experiment config (JSON)")->check(CLI::ExistingFile);
  cmd->add_option("-o,--out", c.out, "output directory, overrides output_dir");
  cmd->add_option("--set", c.overrides, "override a field, e.g. --set sample.method=cfg")
      ->allow_extra_args(false);
}

ExperimentConfig resolve(const Common& c) {
  nlohmann::json doc = nlohmann::json::object();
  if (!c.config_path.empty()) {
    std::ifstream in(c.config_path);
    if (!in) throw ConfigError("cannot open config file " + c.config_path);
    doc = nlohmann::json::parse(in, nullptr, false);
    if (doc.is_discarded()) throw ConfigError(c.config_path + ": invalid JSON");
  }
  for (const auto& o : c.overrides) apply_override(doc, o);
  if (!c.out.empty()) apply_override(doc, "output_dir=" + nlohmann::json(c.out).dump());
  return config_from_json(doc);
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Guided diffusion sampling on 2D Gaussian-mixture toys"};
  app.name("mogctl");
  app.require_subcommand(1);

  Common common;
  std::string plot_csv, plot_svg;
  std::map<CLI::App*, std::function<int(const ExperimentConfig&)>> commands;
  const auto add = [&](const char* name, const char* help, auto fn) {
    CLI::App* cmd = app.add_subcommand(name, help);
    add_common(cmd, common);
    commands[cmd] = fn;
    return cmd;
  };
  add("dataset", "build the mixture family and write family.json + dataset.svg",
      [&](const ExperimentConfig& c) { return cmd_dataset(c, out); });
  add("train", "train the good and bad denoisers",
      [&](const ExperimentConfig& c) { return cmd_train(c, out); });
  add("sample", "draw guided samples and score them",
      [&](const ExperimentConfig& c) { return cmd_sample(c, out); });
  add("sweep", "metrics over a grid of guidance weights",
      [&](const ExperimentConfig& c) { return cmd_sweep(c, out); });
  add("decompose", "split the CFG direction into its two terms on a grid",
      [&](const ExperimentConfig& c) { return cmd_decompose(c, out); });
  CLI::App* plot = add("plot", "render a samples CSV as SVG", [&](const ExperimentConfig& c) {
    return cmd_plot(c, plot_csv, plot_svg.empty() ? std::filesystem::path(plot_csv).replace_extension(".svg")
                                                   : std::filesystem::path(plot_svg),
                    out);
  });
  plot->add_option("--samples", plot_csv, "samples CSV")->required();
  plot->add_option("--svg", plot_svg, "output SVG (default: next to the CSV)");
  CLI::App* verify = app.add_subcommand("verify", "run the built-in property suites");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfigFailure;
  }

  try {
    if (verify->parsed()) return cmd_verify(out);
    for (const auto& [cmd, fn] : commands)
      if (cmd->parsed()) return fn(resolve(common));
    return kConfigFailure;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << '\n';
    return kNumericFailure;
  } catch (const UndefinedConversionError& e) {
    err << "numeric failure: " << e.what() << '\n';
    return kNumericFailure;
  } catch (const ContractError& e) {
    err << "numeric failure: " << e.what() << '\n';
    return kNumericFailure;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kConfigFailure;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kConfigFailure;
  }
}

}  // namespace mog::cli
