#include "clreg/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "clreg/dataset.hpp"
#include "clreg/error.hpp"
#include "clreg/init.hpp"
#include "clreg/selection.hpp"

namespace clreg {

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + "\"";
}

std::string num(double v) { return format_exact(v); }

std::string pad_left(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : std::string(width - s.size(), ' ') + s;
}

std::string pad_right(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

std::filesystem::path output_dir(const RunConfig& c) {
  std::filesystem::path dir(c.output.directory);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory '" + dir.string() + "': " + ec.message());
  return dir;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot write '" + path.string() + "'");
  return f;
}

Dataset load_dataset(const RunConfig& c, const FitOptions& options, std::ostream& err) {
  if (c.data.path.empty()) throw ConfigError("data.path is required");
  Dataset ds = ingest(c.data.path, c.model, c.data, options);
  for (const auto& w : ds.warnings) err << "warning: " << w << "\n";
  return ds;
}

std::vector<WaldRow> unconverged_rows(const ModelSpec& spec, const VectorXd& theta) {
  std::vector<WaldRow> rows;
  for (Index j = 0; j < theta.size(); ++j) {
    WaldRow r;
    r.name = spec.param_names[j];
    r.estimate = theta(j);
    r.se = r.z = r.p_value = std::nan("");
    rows.push_back(r);
  }
  return rows;
}

void write_curve(const RunConfig& c, const Dataset& ds, const ModelFit& mf, const std::filesystem::path& dir,
                 std::ostream& out) {
  const std::string& bname = *c.model.biomarker;
  const VectorXd& zobs = ds.columns.at(bname);
  const double lo = c.curve.lower.value_or(zobs.minCoeff());
  const double hi = c.curve.upper.value_or(zobs.maxCoeff());
  const Index points = c.curve.points;
  const VectorXd grid = VectorXd::LinSpaced(points, lo, hi);

  std::vector<std::string> covariates;
  for (const auto& [name, col] : ds.columns)
    if (name != bname) covariates.push_back(name);
  std::vector<std::map<std::string, double>> profiles = c.curve.profiles;
  if (profiles.empty()) profiles.emplace_back();
  for (const auto& prof : profiles)
    for (const auto& [name, value] : prof)
      if (std::find(covariates.begin(), covariates.end(), name) == covariates.end())
        throw ConfigError("curve.profiles: '" + name + "' is not a covariate of the model");

  std::ofstream pf = open_output(dir / "profiles.csv");
  pf << "profile";
  for (const auto& name : covariates) pf << "," << csv_field(name);
  pf << "\n";
  std::ofstream cf = open_output(dir / "curve.csv");
  cf << "z,profile,pi_hat,lower_marginal,upper_marginal,lower_simultaneous,upper_simultaneous\n";
  for (std::size_t k = 0; k < profiles.size(); ++k) {
    std::map<std::string, VectorXd> cols;
    pf << k;
    for (const auto& name : covariates) {
      const auto it = profiles[k].find(name);
      const double v = it != profiles[k].end() ? it->second : ds.columns.at(name).mean();
      cols[name] = VectorXd::Constant(points, v);
      pf << "," << num(v);
    }
    pf << "\n";
    cols[bname] = grid;
    ModelSpec at = build_spec(c.model, cols, points, c.fit.cop_flag);
    at.biomarker = mf.spec.biomarker;
    const Band marginal = confidence_band(mf.fit, at, c.curve.level, false);
    const Band simultaneous = confidence_band(mf.fit, at, c.curve.level, true);
    for (Index i = 0; i < points; ++i)
      cf << num(grid(i)) << "," << k << "," << num(marginal.pi_hat(i)) << "," << num(marginal.lower(i)) << ","
         << num(marginal.upper(i)) << "," << num(simultaneous.lower(i)) << "," << num(simultaneous.upper(i))
         << "\n";
  }
  out << "curve: " << profiles.size() << " profile(s) x " << points << " points written to "
      << (dir / "curve.csv").string() << "\n";
}

std::string row_label(const std::string& group, const std::string& label) {
  return pad_right(group, 11) + pad_right(label, 12);
}

}  // namespace

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return exit_code::usage;
  if (dynamic_cast<const ConvergenceError*>(&e)) return exit_code::convergence;
  if (dynamic_cast<const Error*>(&e)) return exit_code::data;
  return 1;
}

std::string format_sig6(double v) {
  if (std::isnan(v)) return "NaN";
  if (std::isinf(v)) return v > 0 ? "Inf" : "-Inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string format_coefficient_table(const std::vector<WaldRow>& rows) {
  std::size_t name_width = 0;
  for (const auto& r : rows) name_width = std::max(name_width, r.name.size());
  std::ostringstream os;
  os << std::string(name_width, ' ') << pad_left("Est", 13) << pad_left("SE", 13) << pad_left("Z", 13)
     << pad_left("p-val (Z)", 13) << "\n";
  for (const auto& r : rows)
    os << pad_right(r.name, name_width) << pad_left(format_sig6(r.estimate), 13) << pad_left(format_sig6(r.se), 13)
       << pad_left(format_sig6(r.z), 13) << pad_left(format_sig6(r.p_value), 13) << "\n";
  return os.str();
}

std::string format_study_table(const StudySummary& summary) {
  std::ostringstream os;
  const std::size_t w = 12;
  for (const LambdaSummary& b : summary.blocks) {
    os << "lambda = " << format_sig6(b.lambda) << ": " << b.replications << " replications, " << b.converged
       << " converged, failure rate " << format_sig6(100.0 * b.failure_rate) << "%\n";
    os << row_label("", "");
    for (const auto& p : b.params) os << pad_left(p.name, w);
    os << "\n";
    auto line = [&](const std::string& group, const std::string& label, auto value) {
      os << row_label(group, label);
      for (const auto& p : b.params) os << pad_left(format_sig6(value(p)), w);
      os << "\n";
    };
    line("theta-hat", "True value", [](const ParamSummary& p) { return p.truth; });
    line("", "Mean", [](const ParamSummary& p) { return p.mean; });
    line("", "SD", [](const ParamSummary& p) { return p.sd; });
    const char* q[] = {"Q0.01", "Q0.25", "Q0.5", "Q0.75", "Q0.99"};
    for (std::size_t k = 0; k < 5; ++k)
      line(k == 0 ? "SE" : "", q[k], [k](const ParamSummary& p) { return p.se_quantiles[k]; });
    line("", "Cover.", [](const ParamSummary& p) { return p.coverage; });
    line("", "%|Z|>5", [](const ParamSummary& p) { return p.pct_abs_z_gt5; });
    os << "rho-hat: mean " << format_sig6(b.rho_mean) << ", SD " << format_sig6(b.rho_sd) << "\n";
    os << "power for H0: " << summary.names[static_cast<std::size_t>(summary.power_param)]
       << " = 0 at alpha = " << format_sig6(summary.alpha_level) << ": " << format_sig6(b.power) << "\n\n";
  }
  return os.str();
}

int cmd_fit(const RunConfig& c, std::ostream& out, std::ostream& err) {
  FitOptions options = c.fit;
  options.validate();
  const Dataset ds = load_dataset(c, options, err);
  const ModelFit mf = fit_model(ds.spec, ds.data, options);
  const FitResult& fit = mf.fit;
  const auto dir = output_dir(c);

  out << "model: " << to_string(c.model.h) << ", n = " << ds.size();
  if (ds.data.grouped()) out << ", groups = " << ds.data.groups.size();
  out << ", lambda = " << format_sig6(options.lambda) << "\n";
  if (mf.start && !mf.start->warning.empty()) err << "warning: " << mf.start->warning << "\n";
  if (fit.converged && ds.spec.biomarker && ds.spec.biomarker->reparametrize && mf.spec.biomarker->sign < 0)
    out << "biomarker reversed: the model uses -" << *c.model.biomarker << "\n";

  const std::vector<WaldRow> rows = fit.converged ? fit.wald : unconverged_rows(mf.spec, fit.theta);
  out << format_coefficient_table(rows);
  if (fit.converged && fit.slope)
    out << fit.slope->name << " = " << format_sig6(fit.slope->estimate) << " (SE " << format_sig6(fit.slope->se)
        << ")\n";
  if (fit.rho)
    out << "rho-hat = " << format_sig6(fit.rho->raw) << " (used " << format_sig6(fit.rho->clipped) << ", "
        << fit.rho->pairs << " pairs)\n";
  out << "converged = " << (fit.converged ? "true" : "false") << " (" << to_string(fit.status) << ", "
      << fit.iterations << " iterations, max |G| = " << format_sig6(fit.final_grad_norm) << ")\n";

  std::ofstream cf = open_output(dir / "coefficients.csv");
  cf << "parameter,estimate,se,z,p_value\n";
  for (const auto& r : rows)
    cf << csv_field(r.name) << "," << num(r.estimate) << "," << num(r.se) << "," << num(r.z) << ","
       << num(r.p_value) << "\n";

  std::ofstream rf = open_output(dir / "fit_report.csv");
  rf << "key,value\n";
  rf << "converged," << (fit.converged ? "true" : "false") << "\n";
  rf << "status," << to_string(fit.status) << "\n";
  rf << "iterations," << fit.iterations << "\n";
  rf << "grad_norm," << num(fit.final_grad_norm) << "\n";
  rf << "grad_threshold," << num(fit.grad_threshold) << "\n";
  rf << "lambda," << num(options.lambda) << "\n";
  rf << "n," << ds.size() << "\n";
  if (fit.rho) {
    rf << "rho_hat," << num(fit.rho->raw) << "\n";
    rf << "rho_used," << num(fit.rho->clipped) << "\n";
    rf << "rho_pairs," << fit.rho->pairs << "\n";
  }
  if (mf.spec.biomarker) rf << "biomarker_sign," << num(mf.spec.biomarker->sign) << "\n";

  if (!fit.converged) {
    err << "error: the fit did not converge (" << to_string(fit.status) << ")\n";
    return exit_code::convergence;
  }
  if (c.model.biomarker) write_curve(c, ds, mf, dir, out);
  return exit_code::ok;
}

int cmd_cv(const RunConfig& c, std::ostream& out, std::ostream& err) {
  FitOptions options = c.fit;
  options.validate();
  const Dataset ds = load_dataset(c, options, err);
  CvPlan plan = c.cv;
  plan.threads = c.threads;
  const CvResult res = cv_select(ds.spec, ds.data, options, plan);
  const auto dir = output_dir(c);

  out << "cross-validation: " << plan.folds << " folds, score " << to_string(plan.score) << " ("
      << (larger_is_better(plan.score) ? "maximized" : "minimized") << ")\n";
  out << pad_left("lambda", 12) << pad_left("score", 14) << pad_left("failed folds", 14) << "\n";
  std::ofstream sf = open_output(dir / "cv_scores.csv");
  sf << "lambda,score,failed,failed_folds,selected\n";
  for (std::size_t l = 0; l < res.table.size(); ++l) {
    const CvRow& r = res.table[l];
    const bool chosen = l == res.selected;
    out << pad_left(format_sig6(r.lambda), 12) << pad_left(r.failed ? "failed" : format_sig6(r.score), 14)
        << pad_left(std::to_string(r.failed_folds), 14) << (chosen ? "  *" : "") << "\n";
    sf << num(r.lambda) << "," << num(r.score) << "," << (r.failed ? "true" : "false") << "," << r.failed_folds << ","
       << (chosen ? "true" : "false") << "\n";
  }
  out << "selected lambda = " << format_sig6(res.lambda_gof) << "\n";

  std::ofstream pf = open_output(dir / "cv_predictions.csv");
  pf << "row,y,yhat_star\n";
  const VectorXd& yhat = res.yhat_star();
  for (Index i = 0; i < ds.size(); ++i) pf << i + 1 << "," << num(ds.data.y(i)) << "," << num(yhat(i)) << "\n";
  return exit_code::ok;
}

int cmd_simulate(const RunConfig& c, std::ostream& out, std::ostream&) {
  StudyConfig study = c.study;
  study.threads = c.threads;
  StudySummary summary;
  try {
    summary = run_study(study);
  } catch (const DomainError& e) {
    throw ConfigError(std::string("study: ") + e.what());
  }
  const auto dir = output_dir(c);
  out << format_study_table(summary);

  std::ofstream sf = open_output(dir / "summary.csv");
  sf << "lambda,param,name,truth,mean,sd,se_q01,se_q25,se_q50,se_q75,se_q99,coverage,pct_abs_z_gt5,"
        "replications,converged,failure_rate,rho_mean,rho_sd,power\n";
  for (const LambdaSummary& b : summary.blocks) {
    for (std::size_t j = 0; j < b.params.size(); ++j) {
      const ParamSummary& p = b.params[j];
      sf << num(b.lambda) << "," << j + 1 << "," << csv_field(p.name) << "," << num(p.truth) << "," << num(p.mean)
         << "," << num(p.sd);
      for (double q : p.se_quantiles) sf << "," << num(q);
      sf << "," << num(p.coverage) << "," << num(p.pct_abs_z_gt5) << "," << b.replications << "," << b.converged
         << "," << num(b.failure_rate) << "," << num(b.rho_mean) << "," << num(b.rho_sd) << "," << num(b.power)
         << "\n";
    }
  }

  const std::size_t p = summary.names.size();
  std::ofstream rf = open_output(dir / "replications.csv");
  rf << "replication,lambda,converged,status,iterations,rho_hat";
  for (const char* prefix : {"est_", "se_", "z_"})
    for (std::size_t j = 1; j <= p; ++j) rf << "," << prefix << j;
  rf << "\n";
  for (const Replication& r : summary.replications) {
    rf << r.index + 1 << "," << num(r.lambda) << "," << (r.converged ? "true" : "false") << "," << to_string(r.status)
       << "," << r.iterations << "," << num(r.rho_hat);
    const bool have = r.estimate.size() == static_cast<Index>(p) && r.se.size() == static_cast<Index>(p);
    for (int part = 0; part < 3; ++part) {
      for (std::size_t j = 0; j < p; ++j) {
        double v = std::nan("");
        if (have) {
          const Index k = static_cast<Index>(j);
          v = part == 0 ? r.estimate(k) : part == 1 ? r.se(k) : (r.estimate(k) - summary.theta_true(k)) / r.se(k);
        }
        rf << "," << num(v);
      }
    }
    rf << "\n";
  }
  return exit_code::ok;
}

void write_study_dataset(const StudyConfig& study, int replication, std::ostream& out) {
  const StudyDataset d = study_dataset(study, replication);
  std::vector<long> group_of(static_cast<std::size_t>(d.y.size()), 0);
  for (std::size_t g = 0; g < d.groups.size(); ++g)
    for (Index i : d.groups[g]) group_of[static_cast<std::size_t>(i)] = static_cast<long>(g) + 1;
  out << "z,x,group,y\n";
  for (Index i = 0; i < d.y.size(); ++i)
    out << num(d.z(i)) << "," << num(d.x(i)) << "," << group_of[static_cast<std::size_t>(i)] << "," << num(d.y(i))
        << "\n";
}

}  // namespace clreg
