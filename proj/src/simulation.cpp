#include "clreg/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "clreg/bvn.hpp"
#include "clreg/error.hpp"
#include "clreg/init.hpp"
#include "clreg/parallel.hpp"
#include "clreg/stats.hpp"

namespace clreg {

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

double fixed_lower_bound(std::size_t g) { return g == 2 ? -1.0 : -1.0 / static_cast<double>(g - 1); }

// Frechet upper / lower bounds on the Pearson correlation of two Bernoullis.
double frechet_max(double p1, double p2) {
  return (std::min(p1, p2) - p1 * p2) / std::sqrt(p1 * (1 - p1) * p2 * (1 - p2));
}
double frechet_min(double p1, double p2) {
  return (std::max(0.0, p1 + p2 - 1.0) - p1 * p2) / std::sqrt(p1 * (1 - p1) * p2 * (1 - p2));
}

double mean_pair_correlation(const std::vector<double>& pi, double r) {
  double sum = 0.0;
  double pairs = 0.0;
  for (std::size_t i = 0; i < pi.size(); ++i)
    for (std::size_t j = i + 1; j < pi.size(); ++j) {
      sum += binary_correlation(pi[i], pi[j], r);
      pairs += 1.0;
    }
  return sum / pairs;
}

double solve_latent(const std::vector<double>& pi, const std::vector<Index>& labels, double rho, double tol) {
  const std::size_t g = pi.size();
  if (g < 2 || rho == 0.0) return 0.0;
  auto describe = [&](std::size_t i, std::size_t j, double bound, const char* which) {
    return "rho = " + fmt(rho) + " is infeasible: observations " + std::to_string(labels[i]) + " and " +
           std::to_string(labels[j]) + " (pi = " + fmt(pi[i]) + ", " + fmt(pi[j]) + ") allow a " + which +
           " correlation of " + fmt(bound);
  };

  double lo = fixed_lower_bound(g);
  double hi = 1.0;
  if (mean_pair_correlation(pi, hi) < rho) {
    std::size_t bi = 0, bj = 1;
    double worst = INFINITY;
    for (std::size_t i = 0; i < g; ++i)
      for (std::size_t j = i + 1; j < g; ++j)
        if (const double m = frechet_max(pi[i], pi[j]); m < worst) {
          worst = m;
          bi = i;
          bj = j;
        }
    throw DomainError(describe(bi, bj, worst, "maximum"));
  }
  if (mean_pair_correlation(pi, lo) > rho) {
    std::size_t bi = 0, bj = 1;
    double worst = -INFINITY;
    for (std::size_t i = 0; i < g; ++i)
      for (std::size_t j = i + 1; j < g; ++j)
        if (const double m = std::max(frechet_min(pi[i], pi[j]), binary_correlation(pi[i], pi[j], lo));
            m > worst) {
          worst = m;
          bi = i;
          bj = j;
        }
    throw DomainError(describe(bi, bj, worst, "minimum"));
  }
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    (mean_pair_correlation(pi, mid) < rho ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

void check_probabilities(const VectorXd& pi) {
  for (Index i = 0; i < pi.size(); ++i)
    if (!(pi(i) > 0.0 && pi(i) < 1.0))
      throw DomainError("observation " + std::to_string(i) + ": probability " + fmt(pi(i)) +
                        " outside (0, 1)");
}

}  // namespace

double binary_correlation(double p1, double p2, double r) {
  const double p11 = bivariate_normal_cdf(stats::normal_quantile(p1), stats::normal_quantile(p2), r);
  return (p11 - p1 * p2) / std::sqrt(p1 * (1 - p1) * p2 * (1 - p2));
}

double latent_correlation(const std::vector<double>& pi, double rho, double tol) {
  for (double p : pi)
    if (!(p > 0.0 && p < 1.0)) throw DomainError("latent_correlation: probability outside (0, 1)");
  std::vector<Index> labels(pi.size());
  for (std::size_t i = 0; i < pi.size(); ++i) labels[i] = static_cast<Index>(i);
  return solve_latent(pi, labels, rho, tol);
}

ExchangeableBinarySampler::ExchangeableBinarySampler(const VectorXd& pi, const GroupIndex& groups,
                                                     double rho) {
  check_probabilities(pi);
  if (!(rho > -1.0 && rho < 1.0)) throw DomainError("rho must lie in (-1, 1)");
  const Index n = pi.size();
  thresholds_.resize(n);
  for (Index i = 0; i < n; ++i) thresholds_(i) = stats::normal_quantile(1.0 - pi(i));

  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  for (const auto& grp : groups) {
    for (Index i : grp) {
      if (i < 0 || i >= n) throw DimensionError("sampler: group member out of range");
      if (seen[i]++) throw DomainError("sampler: observation " + std::to_string(i) + " in two groups");
    }
    groups_.push_back(grp);
  }
  for (Index i = 0; i < n; ++i)
    if (!seen[i]) groups_.push_back({i});

  for (const auto& grp : groups_) {
    const std::size_t g = grp.size();
    if (g >= 2 && rho < exchangeable_lower_bound(static_cast<Index>(g)))
      throw DomainError("rho = " + fmt(rho) + " below the exchangeable bound for a group of " +
                        std::to_string(g));
    std::vector<double> p(g);
    for (std::size_t k = 0; k < g; ++k) p[k] = pi(grp[k]);
    const double r = solve_latent(p, grp, rho, 1e-6);
    latent_.push_back(r);
    MatrixXd factor;
    if (r < 0.0) {
      MatrixXd corr = MatrixXd::Constant(static_cast<Index>(g), static_cast<Index>(g), r);
      corr.diagonal().setOnes();
      Eigen::LLT<MatrixXd> llt(corr);
      if (llt.info() != Eigen::Success) throw NotPositiveDefiniteError("sampler: latent correlation not PD");
      factor = llt.matrixL();
    }
    factors_.push_back(std::move(factor));
  }
}

VectorXd ExchangeableBinarySampler::draw(Philox4x32& rng) const {
  VectorXd y(thresholds_.size());
  for (std::size_t k = 0; k < groups_.size(); ++k) {
    const auto& grp = groups_[k];
    const Index g = static_cast<Index>(grp.size());
    const double r = latent_[k];
    VectorXd latent(g);
    if (r >= 0.0) {
      const double shared = std::sqrt(r) * rng.normal();
      const double own = std::sqrt(1.0 - r);
      for (Index i = 0; i < g; ++i) latent(i) = shared + own * rng.normal();
    } else {
      VectorXd e(g);
      for (Index i = 0; i < g; ++i) e(i) = rng.normal();
      latent = factors_[k] * e;
    }
    for (Index i = 0; i < g; ++i) y(grp[i]) = latent(i) > thresholds_(grp[i]) ? 1.0 : 0.0;
  }
  return y;
}

VectorXd simulate_exchangeable_binary(const VectorXd& pi, const GroupIndex& groups, double rho,
                                      Philox4x32& rng) {
  return ExchangeableBinarySampler(pi, groups, rho).draw(rng);
}

GroupIndex consecutive_groups(Index n, Index size) {
  if (size < 1) throw DomainError("group size must be positive");
  GroupIndex groups;
  for (Index start = 0; start < n; start += size) {
    std::vector<Index> grp;
    for (Index i = start; i < std::min(n, start + size); ++i) grp.push_back(i);
    groups.push_back(std::move(grp));
  }
  return groups;
}

ModelSpec two_covariate_design(Compounding h, const VectorXd& z, const VectorXd& x) {
  if (component_count(h) != 3) throw DomainError("two_covariate_design needs a three-component model");
  if (z.size() != x.size()) throw DimensionError("two_covariate_design: z and x lengths differ");
  const Index n = z.size();
  ModelSpec spec;
  spec.h = h;
  spec.designs.assign(3, MatrixXd::Zero(n, 6));
  spec.designs[0].col(0) = z;
  spec.designs[0].col(1).setOnes();
  spec.designs[1].col(2).setOnes();
  spec.designs[1].col(3) = x;
  spec.designs[2].col(4).setOnes();
  spec.designs[2].col(5) = x;
  spec.biomarker = Biomarker{0, 0, true, 1.0};
  spec.param_names = {"xi[1]", "b*[0,1]", "b[0,2]", "b[1,2]", "b[0,3]", "b[1,3]"};
  spec.validate();
  return spec;
}

void StudyConfig::validate() const {
  if (n < 2) throw ConfigError("study: n must be at least 2");
  if (group_size < 1) throw ConfigError("study: group_size must be positive");
  if (n_sim < 1) throw ConfigError("study: n_sim must be positive");
  if (lambdas.empty()) throw ConfigError("study: empty lambda list");
  for (double l : lambdas)
    if (!(l >= 0.0) || !std::isfinite(l)) throw ConfigError("study: lambda values must be >= 0");
  if (theta_true.size() != 6) throw ConfigError("study: theta_true must have 6 entries");
  if (!theta_true.allFinite()) throw ConfigError("study: theta_true must be finite");
  if (component_count(h) != 3) throw ConfigError("study: compounding must have three components");
  if (power_param < 0 || power_param >= 6) throw ConfigError("study: power_param out of range");
  if (!(alpha_level > 0.0 && alpha_level < 1.0)) throw ConfigError("study: alpha_level must be in (0, 1)");
  if (group_size > 1 && !(rho >= exchangeable_lower_bound(group_size) && rho < 1.0))
    throw ConfigError("study: rho outside the exchangeable range for this group size");
  FitOptions check = options;
  check.lambda = 0.0;
  check.validate();
}

StudyConfig default_study() {
  StudyConfig c;
  c.theta_true.resize(6);
  c.theta_true << 3.0, 0.0, std::log(1.0 / 3.0), 0.0, std::log(3.0), -2.0;
  c.options.cop_flag = true;
  c.options.exchangeable = true;
  c.options.quasi_lik = true;
  return c;
}

namespace {

void draw_covariates(Philox4x32& rng, VectorXd& z, VectorXd& x) {
  for (Index i = 0; i < z.size(); ++i) {
    z(i) = 2.0 * rng.uniform() - 1.0;
    x(i) = rng.uniform() < 0.5 ? 1.0 : 0.0;
  }
}

struct Scenario {
  VectorXd z;
  VectorXd x;
  ModelSpec spec;
  ExchangeableBinarySampler sampler;
};

Scenario make_scenario(const StudyConfig& c, Philox4x32& rng, const GroupIndex& groups) {
  VectorXd z(c.n), x(c.n);
  draw_covariates(rng, z, x);
  ModelSpec spec = two_covariate_design(c.h, z, x);
  const VectorXd pi = mean_state(spec, c.theta_true).pi;
  ExchangeableBinarySampler sampler(pi, groups, c.rho);
  return {std::move(z), std::move(x), std::move(spec), std::move(sampler)};
}

double sample_sd(const std::vector<double>& v, double mean) {
  if (v.size() < 2) return std::nan("");
  double ss = 0.0;
  for (double a : v) ss += (a - mean) * (a - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return std::nan("");
  double s = 0.0;
  for (double a : v) s += a;
  return s / static_cast<double>(v.size());
}

}  // namespace

StudyDataset study_dataset(const StudyConfig& config, int replication) {
  config.validate();
  if (replication < 0 || replication >= config.n_sim) throw ConfigError("study: replication index out of range");
  const GroupIndex groups = consecutive_groups(config.n, config.group_size);
  Philox4x32 rng(config.seed, static_cast<std::uint64_t>(replication) + 1);
  std::optional<Scenario> sc;
  if (config.fixed_covariates) {
    Philox4x32 cov_rng(config.seed, 0);
    sc = make_scenario(config, cov_rng, groups);
  } else {
    sc = make_scenario(config, rng, groups);
  }
  StudyDataset out{sc->z, sc->x, groups, sc->sampler.draw(rng)};
  return out;
}

StudySummary run_study(const StudyConfig& config) {
  config.validate();
  const GroupIndex groups = consecutive_groups(config.n, config.group_size);
  const GroupIndex fit_groups = config.options.exchangeable ? groups : GroupIndex{};

  std::optional<Scenario> fixed;
  if (config.fixed_covariates) {
    Philox4x32 rng(config.seed, 0);
    fixed = make_scenario(config, rng, groups);
  }

  const std::size_t n_lambda = config.lambdas.size();
  const std::size_t reps = static_cast<std::size_t>(config.n_sim);
  std::vector<Replication> records(reps * n_lambda);

  parallel_for(reps, config.threads, [&](std::size_t rep) {
    Philox4x32 rng(config.seed, rep + 1);
    std::optional<Scenario> own;
    if (!fixed) own = make_scenario(config, rng, groups);
    const Scenario& sc = fixed ? *fixed : *own;
    const BinaryData data{sc.sampler.draw(rng), fit_groups};
    for (std::size_t l = 0; l < n_lambda; ++l) {
      Replication& rec = records[rep * n_lambda + l];
      rec.index = static_cast<int>(rep);
      rec.lambda = config.lambdas[l];
      FitOptions opt = config.options;
      opt.lambda = config.lambdas[l];
      try {
        const ModelFit mf = fit_model(sc.spec, data, opt);
        const FitResult& fit = mf.fit;
        rec.status = fit.status;
        rec.iterations = fit.iterations;
        if (fit.rho) rec.rho_hat = fit.rho->raw;
        if (fit.converged) {
          rec.estimate.resize(6);
          rec.se.resize(6);
          for (Index j = 0; j < 6; ++j) {
            rec.estimate(j) = fit.wald[j].estimate;
            rec.se(j) = fit.wald[j].se;
          }
          rec.converged = rec.estimate.allFinite() && rec.se.allFinite() && (rec.se.array() > 0.0).all();
          if (!rec.converged) rec.status = FitStatus::NonFinite;
        }
      } catch (const Error& e) {
        rec.error = e.what();
        rec.status = FitStatus::NonFinite;
      }
    }
  });

  StudySummary out;
  out.names = two_covariate_design(config.h, VectorXd::Zero(1), VectorXd::Zero(1)).param_names;
  out.theta_true = config.theta_true;
  out.power_param = config.power_param;
  out.alpha_level = config.alpha_level;
  out.replications = std::move(records);

  const double z_cover = stats::normal_quantile(0.975);
  for (std::size_t l = 0; l < n_lambda; ++l) {
    LambdaSummary block;
    block.lambda = config.lambdas[l];
    block.replications = config.n_sim;
    std::vector<const Replication*> ok;
    for (std::size_t rep = 0; rep < reps; ++rep) {
      const Replication& r = out.replications[rep * n_lambda + l];
      if (r.converged) ok.push_back(&r);
    }
    block.converged = static_cast<int>(ok.size());
    block.failure_rate = 1.0 - static_cast<double>(ok.size()) / static_cast<double>(reps);
    for (Index j = 0; j < 6; ++j) {
      ParamSummary ps;
      ps.name = out.names[j];
      ps.truth = config.theta_true(j);
      std::vector<double> est, se;
      double covered = 0.0, extreme = 0.0;
      for (const Replication* r : ok) {
        est.push_back(r->estimate(j));
        se.push_back(r->se(j));
        const double z = (r->estimate(j) - ps.truth) / r->se(j);
        covered += std::fabs(z) <= z_cover ? 1.0 : 0.0;
        extreme += std::fabs(z) > 5.0 ? 1.0 : 0.0;
      }
      ps.mean = mean_of(est);
      ps.sd = sample_sd(est, ps.mean);
      const double m = static_cast<double>(ok.size());
      if (!ok.empty()) {
        std::sort(se.begin(), se.end());
        const std::array<double, 5> probs{0.01, 0.25, 0.5, 0.75, 0.99};
        for (std::size_t q = 0; q < probs.size(); ++q) ps.se_quantiles[q] = stats::quantile_sorted(se, probs[q]);
        ps.coverage = covered / m;
        ps.pct_abs_z_gt5 = 100.0 * extreme / m;
      } else {
        ps.se_quantiles.fill(std::nan(""));
        ps.coverage = ps.pct_abs_z_gt5 = std::nan("");
      }
      block.params.push_back(ps);
    }
    std::vector<double> rhos;
    for (const Replication* r : ok)
      if (std::isfinite(r->rho_hat)) rhos.push_back(r->rho_hat);
    block.rho_mean = mean_of(rhos);
    block.rho_sd = sample_sd(rhos, block.rho_mean);
    out.blocks.push_back(std::move(block));
  }
  for (std::size_t l = 0; l < n_lambda; ++l)
    if (out.blocks[l].converged > 0)
      out.blocks[l].power = power_estimate(out, l, config.power_param, config.alpha_level);
  return out;
}

double power_estimate(const StudySummary& summary, std::size_t block, Index param, double alpha_level) {
  if (block >= summary.blocks.size()) throw DimensionError("power_estimate: block out of range");
  if (!(alpha_level > 0.0 && alpha_level < 1.0)) throw DomainError("power_estimate: alpha_level outside (0, 1)");
  const std::size_t n_lambda = summary.blocks.size();
  const double crit = stats::normal_quantile(1.0 - 0.5 * alpha_level);
  double hits = 0.0, used = 0.0;
  for (std::size_t k = block; k < summary.replications.size(); k += n_lambda) {
    const Replication& r = summary.replications[k];
    if (!r.converged) continue;
    if (param < 0 || param >= r.estimate.size()) throw DimensionError("power_estimate: parameter out of range");
    used += 1.0;
    hits += std::fabs(r.estimate(param) / r.se(param)) > crit ? 1.0 : 0.0;
  }
  if (used == 0.0) throw DomainError("power_estimate: no converged replications");
  return hits / used;
}

}  // namespace clreg
