#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "clreg/commands.hpp"
#include "clreg/config.hpp"
#include "clreg/error.hpp"

namespace {

// A command-line value that overrides the configuration only when given.
template <class T>
struct Override {
  T value{};
  CLI::Option* option = nullptr;

  void add(CLI::App* app, const std::string& name, const std::string& help) {
    option = app->add_option(name, value, help);
  }
  explicit operator bool() const { return option && option->count() > 0; }
  void apply(T& target) const {
    if (*this) target = value;
  }
};

struct FitFlags {
  std::string config;
  Override<std::string> data, response, group, out;
  Override<double> lambda, tol;
  Override<bool> cop_flag, exchangeable, quasi_lik;
  Override<int> max_iter;
  Override<std::uint64_t> seed;

  void add(CLI::App* app) {
    app->add_option("-c,--config", config, "JSON run configuration")->required();
    data.add(app, "--data", "comma-separated data file");
    response.add(app, "--response", "response column");
    group.add(app, "--group", "group label column");
    lambda.add(app, "--lambda", "ridge constant");
    cop_flag.add(app, "--cop-flag", "reparametrize the biomarker (true/false)");
    exchangeable.add(app, "--exchangeable", "estimate an exchangeable correlation (true/false)");
    quasi_lik.add(app, "--quasi-lik", "refit with the estimated covariance (true/false)");
    max_iter.add(app, "--max-iter", "iteration cap per stage");
    tol.add(app, "--tol", "step tolerance");
    seed.add(app, "--seed", "random seed");
    out.add(app, "-o,--out", "output directory");
  }

  clreg::RunConfig load() const {
    clreg::RunConfig c = clreg::load_config(config);
    data.apply(c.data.path);
    response.apply(c.data.response);
    if (group) c.data.group = group.value;
    out.apply(c.output.directory);
    lambda.apply(c.fit.lambda);
    tol.apply(c.fit.tol);
    cop_flag.apply(c.fit.cop_flag);
    exchangeable.apply(c.fit.exchangeable);
    quasi_lik.apply(c.fit.quasi_lik);
    max_iter.apply(c.fit.max_iter);
    if (seed) c.seed = c.cv.seed = seed.value;
    return c;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Compound logistic regression with estimating equations"};
  app.require_subcommand(1);
  app.fallthrough();
  Override<unsigned> threads;
  threads.add(&app, "--threads", "worker threads (0 = all cores)");

  FitFlags fit_flags;
  auto* fit = app.add_subcommand("fit", "fit a model and export coefficients and curves");
  fit_flags.add(fit);

  FitFlags cv_flags;
  Override<int> folds;
  Override<std::vector<double>> grid;
  Override<std::string> score;
  auto* cv = app.add_subcommand("cv", "choose lambda by K-fold cross-validation");
  cv_flags.add(cv);
  folds.add(cv, "--folds", "number of folds");
  grid.add(cv, "--lambda-grid", "lambda values");
  score.add(cv, "--score", "deviance, auc or sse");

  std::string sim_config;
  Override<std::string> sim_out, write_data;
  Override<int> n_sim, sim_max_iter;
  int replication = 1;
  Override<std::uint64_t> sim_seed;
  Override<double> rho;
  Override<long> n, group_size;
  Override<std::vector<double>> lambdas;
  auto* sim = app.add_subcommand("simulate", "Monte Carlo coverage study");
  sim->add_option("-c,--config", sim_config, "JSON run configuration (study block)");
  n_sim.add(sim, "--n-sim", "replications");
  lambdas.add(sim, "--lambdas", "ridge constants");
  sim_seed.add(sim, "--seed", "random seed");
  rho.add(sim, "--rho", "within-group correlation");
  n.add(sim, "--n", "sample size");
  group_size.add(sim, "--group-size", "group size");
  sim_max_iter.add(sim, "--max-iter", "iteration cap per stage");
  sim_out.add(sim, "-o,--out", "output directory");
  write_data.add(sim, "--write-data", "write one simulated dataset to this file and exit");
  sim->add_option("--replication", replication, "replication written by --write-data (1-based)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : clreg::exit_code::usage;
  }

  try {
    clreg::RunConfig c;
    if (*fit || *cv) {
      c = (*fit ? fit_flags : cv_flags).load();
    } else if (!sim_config.empty()) {
      c = clreg::load_config(sim_config);
    }
    threads.apply(c.threads);

    if (*fit) return clreg::cmd_fit(c, std::cout, std::cerr);
    if (*cv) {
      folds.apply(c.cv.folds);
      grid.apply(c.cv.lambda_grid);
      if (score) c.cv.score = clreg::gof_score_from_string(score.value);
      return clreg::cmd_cv(c, std::cout, std::cerr);
    }

    clreg::StudyConfig& s = c.study;
    n_sim.apply(s.n_sim);
    lambdas.apply(s.lambdas);
    sim_seed.apply(s.seed);
    rho.apply(s.rho);
    if (n) s.n = n.value;
    if (group_size) s.group_size = group_size.value;
    sim_max_iter.apply(s.options.max_iter);
    sim_out.apply(c.output.directory);
    if (write_data) {
      std::ofstream f(write_data.value, std::ios::binary);
      if (!f) throw clreg::ConfigError("cannot write '" + write_data.value + "'");
      clreg::write_study_dataset(s, replication - 1, f);
      return clreg::exit_code::ok;
    }
    return clreg::cmd_simulate(c, std::cout, std::cerr);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return clreg::exit_code_for(e);
  }
}
