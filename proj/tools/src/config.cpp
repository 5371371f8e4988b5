#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "mog/cli.hpp"
#include "mog/errors.hpp"
#include "mog/guidance.hpp"

namespace mog::cli {
namespace {

using nlohmann::json;

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

[[noreturn]] void type_error(const std::string& path, const char* expected, const json& got) {
  throw ConfigError(path + ": expected " + expected + ", got " + std::string(got.type_name()));
}

void read(const json& j, const std::string& path, double& out) {
  if (!j.is_number()) type_error(path, "a number", j);
  out = j.get<double>();
}

void read(const json& j, const std::string& path, int& out) {
  if (!j.is_number_integer()) type_error(path, "an integer", j);
  const auto v = j.get<std::int64_t>();
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max())
    throw ConfigError(path + ": integer out of range");
  out = static_cast<int>(v);
}

void read(const json& j, const std::string& path, std::uint64_t& out) {
  if (!j.is_number_integer()) type_error(path, "a non-negative integer", j);
  if (!j.is_number_unsigned()) throw ConfigError(path + ": must be non-negative");
  out = j.get<std::uint64_t>();
}

void read(const json& j, const std::string& path, bool& out) {
  if (!j.is_boolean()) type_error(path, "a boolean", j);
  out = j.get<bool>();
}

void read(const json& j, const std::string& path, std::string& out) {
  if (!j.is_string()) type_error(path, "a string", j);
  out = j.get<std::string>();
}

void read(const json& j, const std::string& path, std::filesystem::path& out) {
  std::string s;
  read(j, path, s);
  out = s;
}

template <class T>
void read(const json& j, const std::string& path, std::vector<T>& out) {
  if (!j.is_array()) type_error(path, "an array", j);
  out.assign(j.size(), T{});
  for (std::size_t i = 0; i < j.size(); ++i)
    read(j[i], path + "[" + std::to_string(i) + "]", out[i]);
}

json write(const std::filesystem::path& p) { return p.string(); }
template <class T>
json write(const T& v) { return v; }

class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) type_error(path_.empty() ? "<root>" : path_, "an object", j_);
  }

  template <class T>
  void operator()(const char* key, T& value) {
    seen_.insert(key);
    if (auto it = j_.find(key); it != j_.end()) read(*it, join(path_, key), value);
  }

  template <class F>
  void section(const char* key, F&& fill) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    Reader sub(*it, join(path_, key));
    fill(sub);
    sub.finish();
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError(join(path_, it.key()) + ": unknown field");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

class Writer {
 public:
  explicit Writer(json& j) : j_(j) { j_ = json::object(); }

  template <class T>
  void operator()(const char* key, const T& value) { j_[key] = write(value); }

  template <class F>
  void section(const char* key, F&& fill) {
    Writer sub(j_[key]);
    fill(sub);
  }

 private:
  json& j_;
};

template <class V>
void visit(V& v, FractalConfig& c) {
  v("num_classes", c.num_classes);
  v("base_components_per_class", c.base_components_per_class);
  v("branching", c.branching);
  v("depth", c.depth);
  v("scale_decay", c.scale_decay);
  v("anisotropy_ratio", c.anisotropy_ratio);
  v("rotation_jitter", c.rotation_jitter);
  v("root_radius", c.root_radius);
  v("branch_length", c.branch_length);
  v("root_major_variance", c.root_major_variance);
  v("rng_seed", c.rng_seed);
}

template <class V>
void visit(V& v, ModelRecipe& r) {
  v("hidden_dim", r.hidden_dim);
  v("num_hidden_layers", r.num_hidden_layers);
  v("init_seed", r.init_seed);
  v("iterations", r.iterations);
  v("batch_size", r.batch_size);
  v("learning_rate", r.learning_rate);
  v("p_uncond", r.p_uncond);
  v("rng_seed", r.train_seed);
}

template <class V>
void visit(V& v, SampleSettings& s) {
  v("method", s.method);
  v("weights", s.weights);
  v("hg_order", s.hg_order);
  v("label", s.label);
  v("n", s.n);
  v("num_steps", s.num_steps);
  v("stochastic", s.stochastic);
  v("rng_seed", s.rng_seed);
  v("denoiser", s.denoiser);
}

template <class V>
void visit(V& v, MetricOptions& m) {
  v("outlier_threshold", m.outlier_threshold);
  v("coverage_radius", m.coverage_radius);
  v("grid_size", m.grid_size);
  v("pseudo_count", m.pseudo_count);
}

template <class V>
void visit(V& v, SweepSettings& s) {
  v("method", s.method);
  v("axes", s.axes);
  v("n", s.n);
}

template <class V>
void visit(V& v, DecomposeSettings& d) {
  v("t", d.t);
  v("grid", d.grid);
  v("label", d.label);
  v("uncond", d.uncond);
}

template <class V>
void visit(V& v, ExperimentConfig& c) {
  v("schema_version", c.schema_version);
  v("output_dir", c.output_dir);
  v.section("family", [&](V& s) { visit(s, c.family); });
  v.section("schedule", [&](V& s) { s("steps", c.schedule_steps); });
  v.section("train", [&](V& s) {
    s.section("good", [&](V& r) { visit(r, c.good); });
    s.section("bad", [&](V& r) { visit(r, c.bad); });
  });
  v.section("sample", [&](V& s) { visit(s, c.sample); });
  v.section("metrics", [&](V& s) { visit(s, c.metrics); });
  v.section("sweep", [&](V& s) { visit(s, c.sweep); });
  v.section("decompose", [&](V& s) { visit(s, c.decompose); });
}

// Re-raises a module validation failure as a config error under `path`.
template <class F>
void check(const std::string& path, F&& f) {
  try {
    f();
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  } catch (const ParameterError& e) {
    throw ConfigError(path + ": " + e.what());
  } catch (const ContractError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

void validate_recipe(const std::string& path, const ModelRecipe& r, int steps) {
  check(path, [&] {
    if (r.hidden_dim < 1) throw ConfigError("hidden_dim must be >= 1");
    if (r.num_hidden_layers < 1) throw ConfigError("num_hidden_layers must be >= 1");
    train_config(r, make_cosine_schedule(steps)).validate();
  });
}

void validate(const ExperimentConfig& c) {
  if (c.schema_version != kSchemaVersion)
    throw ConfigError("schema_version: expected " + std::to_string(kSchemaVersion) + ", got " +
                      std::to_string(c.schema_version));
  if (c.output_dir.empty()) throw ConfigError("output_dir: must not be empty");
  check("family", [&] { mog::validate(c.family); });
  check("schedule.steps", [&] {
    if (c.schedule_steps < 2) throw ConfigError("must be >= 2");
  });
  validate_recipe("train.good", c.good, c.schedule_steps);
  validate_recipe("train.bad", c.bad, c.schedule_steps);

  const auto& s = c.sample;
  check("sample", [&] {
    make_method(s);
    if (s.label < 0 || s.label >= c.family.num_classes) throw ConfigError("label out of range");
    if (s.n == 0) throw ConfigError("n must be >= 1");
    if (s.num_steps < 1 || s.num_steps > c.schedule_steps)
      throw ConfigError("num_steps must lie in [1, schedule.steps]");
    if (s.denoiser != "mlp" && s.denoiser != "oracle")
      throw ConfigError("denoiser must be \"mlp\" or \"oracle\"");
  });
  check("metrics", [&] {
    const auto& m = c.metrics;
    if (!(m.outlier_threshold > 0) || !(m.coverage_radius > 0))
      throw ConfigError("thresholds must be positive");
    if (m.grid_size < 1) throw ConfigError("grid_size must be >= 1");
    if (!(m.pseudo_count > 0)) throw ConfigError("pseudo_count must be positive");
  });
  check("sweep", [&] {
    const auto kind = parse_method_kind(c.sweep.method);
    if (c.sweep.axes.size() != arity(kind))
      throw ConfigError("axes: " + c.sweep.method + " needs " + std::to_string(arity(kind)) +
                        " axes");
    for (const auto& axis : c.sweep.axes)
      if (axis.empty()) throw ConfigError("axes: empty axis");
    if (c.sweep.n == 0) throw ConfigError("n must be >= 1");
  });
  check("decompose", [&] {
    const auto& d = c.decompose;
    if (d.t < 1 || d.t > c.schedule_steps) throw ConfigError("t must lie in [1, schedule.steps]");
    if (d.grid < 2) throw ConfigError("grid must be >= 2");
    if (d.label < 0 || d.label >= c.family.num_classes) throw ConfigError("label out of range");
    if (d.uncond != "bad" && d.uncond != "good" && d.uncond != "oracle")
      throw ConfigError("uncond must be \"bad\", \"good\" or \"oracle\"");
  });
}

// Splits "a.b.c" into its keys.
std::vector<std::string> split_path(const std::string& key) {
  std::vector<std::string> parts;
  std::stringstream ss(key);
  for (std::string part; std::getline(ss, part, '.');) {
    if (part.empty()) throw ConfigError("--set: malformed key \"" + key + "\"");
    parts.push_back(part);
  }
  if (parts.empty()) throw ConfigError("--set: empty key");
  return parts;
}

}  // namespace

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig config;
  Reader reader(j, "");
  visit(reader, config);
  reader.finish();
  validate(config);
  return config;
}

json config_to_json(const ExperimentConfig& config) {
  json j;
  ExperimentConfig copy = config;
  Writer writer(j);
  visit(writer, copy);
  return j;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("--set: expected key=value, got \"" + assignment + "\"");
  const auto keys = split_path(assignment.substr(0, eq));
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  json* node = &doc;
  for (std::size_t i = 0; i + 1 < keys.size(); ++i) {
    if (!node->is_object()) throw ConfigError("--set: " + keys[i] + " is not an object");
    node = &(*node)[keys[i]];
    if (node->is_null()) *node = json::object();
  }
  if (!node->is_object()) throw ConfigError("--set: parent of " + keys.back() + " is not an object");
  (*node)[keys.back()] = std::move(value);
}

}  // namespace mog::cli
