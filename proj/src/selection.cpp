#include "clreg/selection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "clreg/error.hpp"
#include "clreg/init.hpp"
#include "clreg/parallel.hpp"
#include "clreg/rng.hpp"

namespace clreg {

std::string to_string(GofScore s) {
  switch (s) {
    case GofScore::Deviance:
      return "dev_loglik";
    case GofScore::AUC:
      return "auc";
    case GofScore::SSE:
      return "sse";
  }
  return "?";
}

GofScore gof_score_from_string(const std::string& name) {
  if (name == "deviance" || name == "dev_loglik" || name == "dev") return GofScore::Deviance;
  if (name == "auc" || name == "AUC") return GofScore::AUC;
  if (name == "sse" || name == "SSE") return GofScore::SSE;
  throw ConfigError("unknown goodness-of-fit score '" + name + "'");
}

bool larger_is_better(GofScore s) { return s != GofScore::SSE; }

std::vector<int> kfold_split(Index n, int folds, const GroupIndex& groups, std::uint64_t seed) {
  const bool grouped = !groups.empty();
  const std::size_t units = grouped ? groups.size() : static_cast<std::size_t>(n);
  if (folds < 2 || static_cast<std::size_t>(folds) > units)
    throw ConfigError("fold count " + std::to_string(folds) + " outside [2, " +
                      std::to_string(units) + "]");

  std::vector<std::size_t> order(units);
  std::iota(order.begin(), order.end(), 0);
  Philox4x32 rng(seed, 0);
  for (std::size_t i = units - 1; i > 0; --i) {
    const std::size_t j = rng.below(static_cast<std::uint32_t>(i + 1));
    std::swap(order[i], order[j]);
  }

  std::vector<int> fold(static_cast<std::size_t>(n), -1);
  for (std::size_t r = 0; r < units; ++r) {
    const int f = static_cast<int>(r % static_cast<std::size_t>(folds));
    if (grouped) {
      for (Index i : groups[order[r]]) fold[i] = f;
    } else {
      fold[order[r]] = f;
    }
  }
  if (std::find(fold.begin(), fold.end(), -1) != fold.end())
    throw DataError("kfold_split: groups do not cover every observation");
  return fold;
}

double gof_deviance(const VectorXd& y, const VectorXd& yhat) {
  if (y.size() != yhat.size()) throw DimensionError("gof_deviance: length mismatch");
  double dev = 0.0;
  for (Index i = 0; i < y.size(); ++i) {
    const double p = clamp_probability(yhat(i));
    dev += y(i) * std::log(p) + (1.0 - y(i)) * std::log(1.0 - p);
  }
  return dev;
}

double gof_auc(const VectorXd& y, const VectorXd& yhat) {
  const Index n = y.size();
  if (yhat.size() != n) throw DimensionError("gof_auc: length mismatch");
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](Index a, Index b) { return yhat(a) < yhat(b); });

  // Mann-Whitney form with mid-ranks: the numerator is the same half-integer
  // count as the pairwise definition, so the result is identical.
  double rank_sum = 0.0;
  double n1 = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && yhat(order[j + 1]) == yhat(order[i])) ++j;
    const double mid_rank = 0.5 * static_cast<double>(i + j + 2);
    for (std::size_t k = i; k <= j; ++k) {
      if (y(order[k]) > 0.5) {
        rank_sum += mid_rank;
        n1 += 1.0;
      }
    }
    i = j + 1;
  }
  const double n0 = static_cast<double>(n) - n1;
  if (n1 == 0.0 || n0 == 0.0) throw DataError("gof_auc: response has a single class");
  return (rank_sum - n1 * (n1 + 1.0) / 2.0) / (n0 * n1);
}

double gof_sse(const VectorXd& y, const VectorXd& yhat, const WorkingCovariance& v) {
  if (y.size() != yhat.size() || y.size() != v.size()) throw DimensionError("gof_sse: size mismatch");
  return v.inverse_quadratic_form(y - yhat);
}

CvResult cv_select(const ModelSpec& spec, const BinaryData& data, const FitOptions& options,
                   const CvPlan& plan, const std::optional<VectorXd>& theta0) {
  if (plan.lambda_grid.empty()) throw ConfigError("cv: empty lambda grid");
  std::vector<double> grid = plan.lambda_grid;
  for (double l : grid)
    if (!(l >= 0.0) || !std::isfinite(l)) throw ConfigError("cv: lambda values must be >= 0");
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  if (plan.score == GofScore::AUC) {
    const double s = data.y.sum();
    if (s == 0.0 || s == static_cast<double>(data.size()))
      throw DataError("cv: AUC needs both response classes");
  }

  const Index n = data.size();
  const std::vector<int> fold = kfold_split(n, plan.folds, data.groups, plan.seed);
  std::vector<std::vector<Index>> test(static_cast<std::size_t>(plan.folds));
  std::vector<std::vector<Index>> train(static_cast<std::size_t>(plan.folds));
  for (Index i = 0; i < n; ++i) {
    for (int f = 0; f < plan.folds; ++f) (f == fold[i] ? test : train)[f].push_back(i);
  }

  const std::size_t n_lambda = grid.size();
  const std::size_t n_folds = static_cast<std::size_t>(plan.folds);
  const bool need_full = plan.score == GofScore::SSE;
  const std::size_t jobs = n_lambda * n_folds + (need_full ? n_lambda : 0);

  std::vector<CvRow> rows(n_lambda);
  for (std::size_t l = 0; l < n_lambda; ++l) {
    rows[l].lambda = grid[l];
    rows[l].yhat_star = VectorXd::Constant(n, std::nan(""));
  }
  std::vector<char> fold_ok(n_lambda * n_folds, 0);
  std::vector<std::optional<ModelFit>> full(n_lambda);

  parallel_for(jobs, plan.threads, [&](std::size_t job) {
    FitOptions opt = options;
    if (job >= n_lambda * n_folds) {
      const std::size_t l = job - n_lambda * n_folds;
      opt.lambda = grid[l];
      full[l] = fit_model(spec, data, opt, theta0);
      return;
    }
    const std::size_t l = job / n_folds;
    const std::size_t f = job % n_folds;
    opt.lambda = grid[l];
    std::optional<ModelFit> mf;
    try {
      mf = fit_model(spec.subset(train[f]), data.subset(train[f]), opt, theta0);
    } catch (const DataError&) {
      return;  // e.g. a single-class training fold
    }
    if (!mf->fit.converged) return;
    const MeanState pred = mean_state(mf->spec.subset(test[f]), mf->fit.theta);
    for (std::size_t r = 0; r < test[f].size(); ++r) rows[l].yhat_star(test[f][r]) = pred.pi(r);
    fold_ok[job] = 1;
  });

  for (std::size_t l = 0; l < n_lambda; ++l) {
    CvRow& row = rows[l];
    for (std::size_t f = 0; f < n_folds; ++f) row.failed_folds += fold_ok[l * n_folds + f] ? 0 : 1;
    row.failed = row.failed_folds > 0;
    if (need_full && !(full[l] && full[l]->fit.converged)) row.failed = true;
    if (row.failed) {
      row.score = std::nan("");
      continue;
    }
    switch (plan.score) {
      case GofScore::Deviance:
        row.score = gof_deviance(data.y, row.yhat_star);
        break;
      case GofScore::AUC:
        row.score = gof_auc(data.y, row.yhat_star);
        break;
      case GofScore::SSE: {
        const ModelFit& mf = *full[l];
        const MeanState st = mean_state(mf.spec, mf.fit.theta);
        row.score = gof_sse(data.y, row.yhat_star, WorkingCovariance(st.tau, mf.fit.truth));
        break;
      }
    }
  }

  CvResult result;
  result.table = std::move(rows);
  bool found = false;
  const bool maximize = larger_is_better(plan.score);
  for (std::size_t l = 0; l < n_lambda; ++l) {
    const CvRow& row = result.table[l];
    if (row.failed) continue;
    const double best = result.table[result.selected].score;
    // Ascending grid: ">=" sends ties to the larger lambda.
    if (!found || (maximize ? row.score >= best : row.score <= best)) {
      result.selected = l;
      found = true;
    }
  }
  if (!found) throw ConvergenceError("cv: every lambda in the grid failed to fit");
  result.lambda_gof = result.table[result.selected].lambda;
  return result;
}

}  // namespace clreg
