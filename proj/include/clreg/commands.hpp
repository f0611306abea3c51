#pragma once

// fit / cv / simulate subcommands: human tables on a stream, comma-separated
// artifacts in the output directory.

#include <exception>
#include <ostream>
#include <string>
#include <vector>

#include "clreg/config.hpp"
#include "clreg/estimator.hpp"
#include "clreg/simulation.hpp"

namespace clreg {

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int usage = 2;
inline constexpr int convergence = 3;
inline constexpr int data = 4;
}  // namespace exit_code

/// Exit code for an exception escaping a command.
int exit_code_for(const std::exception& e);

/// 6 significant digits.
std::string format_sig6(double v);

/// Columns Est, SE, Z, p-val (Z), one row per parameter.
std::string format_coefficient_table(const std::vector<WaldRow>& rows);

/// One block per lambda: estimate summaries, SE quantiles, coverage and power.
std::string format_study_table(const StudySummary& summary);

/// Writes coefficients.csv, fit_report.csv and (for a converged fit with a
/// biomarker) curve.csv. Returns exit_code::convergence when the fit failed.
int cmd_fit(const RunConfig& config, std::ostream& out, std::ostream& err);

/// Writes cv_scores.csv and cv_predictions.csv.
int cmd_cv(const RunConfig& config, std::ostream& out, std::ostream& err);

/// Writes summary.csv and replications.csv (with Z-scores).
int cmd_simulate(const RunConfig& config, std::ostream& out, std::ostream& err);

/// One simulated response vector of the study design as CSV: z, x, group, y.
void write_study_dataset(const StudyConfig& study, int replication, std::ostream& out);

}  // namespace clreg
