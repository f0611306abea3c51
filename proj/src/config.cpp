#include "clreg/config.hpp"

#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

#include "clreg/error.hpp"

namespace clreg {

namespace {

using nlohmann::json;

// A JSON object whose unread keys are reported as errors.
class Block {
 public:
  Block(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  bool has(const std::string& key) {
    known_.insert(key);
    return j_.contains(key);
  }

  template <class T>
  void read(const std::string& key, T& out) {
    if (!has(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(path_ + "." + key + ": wrong type");
    }
  }

  template <class T>
  void read(const std::string& key, std::optional<T>& out) {
    if (!has(key) || j_.at(key).is_null()) return;
    T v{};
    read(key, v);
    out = v;
  }

  Block child(const std::string& key) {
    known_.insert(key);
    return Block(j_.at(key), path_ + "." + key);
  }

  void finish() const {
    for (const auto& item : j_.items())
      if (!known_.count(item.key())) throw ConfigError(path_ + ": unknown key '" + item.key() + "'");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> known_;
};

Compounding compounding(const std::string& name) {
  try {
    return compounding_from_string(name);
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }
}

void read_fit_options(Block& b, FitOptions& o) {
  b.read("cop_flag", o.cop_flag);
  b.read("exchangeable", o.exchangeable);
  b.read("quasi_lik", o.quasi_lik);
  b.read("tol", o.tol);
  b.read("grad_tol", o.grad_tol);
  b.read("max_iter", o.max_iter);
  b.read("step_halving_max", o.step_halving_max);
}

void read_model(Block b, ModelConfig& m) {
  std::string h = to_string(m.h);
  b.read("compounding", h);
  m.h = compounding(h);
  b.read("components", m.components);
  b.read("biomarker", m.biomarker);
  b.read("intercept", m.intercept);
  b.finish();
}

void read_fit(Block b, RunConfig& c) {
  read_fit_options(b, c.fit);
  b.read("lambda", c.fit.lambda);
  b.read("seed", c.seed);
  b.finish();
}

void read_data(Block b, DataConfig& d, const std::string& base_dir) {
  b.read("path", d.path);
  b.read("response", d.response);
  b.read("group", d.group);
  b.finish();
  if (!d.path.empty() && !base_dir.empty() && std::filesystem::path(d.path).is_relative())
    d.path = (std::filesystem::path(base_dir) / d.path).string();
}

void read_cv(Block b, CvPlan& cv, std::uint64_t seed) {
  cv.seed = seed;
  b.read("folds", cv.folds);
  b.read("seed", cv.seed);
  b.read("lambda_grid", cv.lambda_grid);
  if (b.has("score")) {
    std::string s;
    b.read("score", s);
    cv.score = gof_score_from_string(s);
  }
  b.finish();
}

void read_curve(Block b, CurveConfig& c) {
  b.read("points", c.points);
  b.read("lower", c.lower);
  b.read("upper", c.upper);
  b.read("level", c.level);
  b.read("profiles", c.profiles);
  b.finish();
  if (c.points < 2) throw ConfigError("curve.points must be at least 2");
  if (!(c.level > 0.0 && c.level < 1.0)) throw ConfigError("curve.level must be in (0, 1)");
  if (c.lower && c.upper && !(*c.lower < *c.upper)) throw ConfigError("curve.lower must be below curve.upper");
}

void read_study(Block b, StudyConfig& s) {
  b.read("n", s.n);
  b.read("group_size", s.group_size);
  b.read("rho", s.rho);
  if (b.has("compounding")) {
    std::string h;
    b.read("compounding", h);
    s.h = compounding(h);
  }
  if (b.has("theta_true")) {
    std::vector<double> t;
    b.read("theta_true", t);
    s.theta_true = Eigen::Map<const VectorXd>(t.data(), static_cast<Index>(t.size()));
  }
  b.read("n_sim", s.n_sim);
  b.read("lambdas", s.lambdas);
  b.read("seed", s.seed);
  b.read("fixed_covariates", s.fixed_covariates);
  b.read("power_param", s.power_param);
  b.read("alpha_level", s.alpha_level);
  read_fit_options(b, s.options);
  b.finish();
}

void read_output(Block b, OutputConfig& o) {
  b.read("directory", o.directory);
  b.read("formats", o.formats);
  b.finish();
  for (const auto& f : o.formats)
    if (f != "csv") throw ConfigError("output.formats: unsupported format '" + f + "'");
}

}  // namespace

RunConfig parse_config(const std::string& text, const std::string& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig c;
  Block root(j, "config");
  if (root.has("model")) read_model(root.child("model"), c.model);
  if (root.has("fit")) read_fit(root.child("fit"), c);
  if (root.has("data")) read_data(root.child("data"), c.data, base_dir);
  if (root.has("cv")) {
    read_cv(root.child("cv"), c.cv, c.seed);
    c.has_cv = true;
  }
  if (root.has("curve")) read_curve(root.child("curve"), c.curve);
  if (root.has("study")) {
    read_study(root.child("study"), c.study);
    c.has_study = true;
  }
  if (root.has("output")) read_output(root.child("output"), c.output);
  root.read("threads", c.threads);
  root.finish();
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), std::filesystem::path(path).parent_path().string());
}

}  // namespace clreg
