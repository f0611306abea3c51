#pragma once

// Comma-separated data ingestion and model construction from column names.

#include <Eigen/Dense>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "clreg/estimator.hpp"
#include "clreg/model.hpp"

namespace clreg {

/// Raw text table: header row plus string cells.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::string source;  // file name for diagnostics

  std::size_t column(const std::string& name) const;  // throws DataError if absent
  bool has_column(const std::string& name) const;
};

/// RFC 4180 style parsing: double-quoted fields, "" escapes, CRLF tolerated,
/// blank lines skipped. Throws DataError on an empty input or ragged rows.
CsvTable parse_csv(std::istream& in, const std::string& source = "<input>");
CsvTable read_csv(const std::string& path);

/// Strict decimal parsing of a whole cell; nullopt if not a finite number.
std::optional<double> parse_number(const std::string& cell);

/// Shortest representation that parses back to the same double.
std::string format_exact(double v);

/// One logistic component per entry of `components`, each listing covariate
/// columns; an intercept is prepended to every component when `intercept`.
struct ModelConfig {
  Compounding h = Compounding::Logistic;
  std::vector<std::vector<std::string>> components{{}};
  std::optional<std::string> biomarker;
  bool intercept = true;

  void validate() const;
};

struct DataConfig {
  std::string path;
  std::string response = "y";
  std::optional<std::string> group;
};

struct ColumnSummary {
  std::string name;
  double min = 0.0;
  double max = 0.0;
  double mean = 0.0;
};

struct Dataset {
  BinaryData data;
  ModelSpec spec;
  std::map<std::string, VectorXd> columns;  // every covariate used by the model
  std::vector<ColumnSummary> summaries;
  std::vector<std::string> warnings;

  Index size() const { return data.size(); }
};

/// Parameter names: b[0,k] for intercepts and b[<column>,k] for covariates,
/// with k the 1-based component. Under reparametrization the biomarker
/// coefficient becomes xi[k] and the other coefficients of its component are
/// starred.
std::vector<std::string> parameter_names(const ModelConfig& model, bool reparametrize);

/// Builds the compound model from named covariate columns of length n. The
/// biomarker, if any, is reparametrized when `reparametrize` is set.
ModelSpec build_spec(const ModelConfig& model, const std::map<std::string, VectorXd>& columns, Index n,
                     bool reparametrize);

/// Validates the table against the configuration and builds the dataset.
Dataset make_dataset(const CsvTable& table, const ModelConfig& model, const DataConfig& data,
                     const FitOptions& options);

Dataset ingest(const std::string& path, const ModelConfig& model, const DataConfig& data,
               const FitOptions& options);

}  // namespace clreg
