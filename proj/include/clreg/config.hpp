#pragma once

// Run configuration: a JSON document with model, fit, data, cv, curve, study
// and output blocks. Unknown keys are rejected.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "clreg/dataset.hpp"
#include "clreg/estimator.hpp"
#include "clreg/selection.hpp"
#include "clreg/simulation.hpp"

namespace clreg {

/// Fitted-curve export: pi-hat over a biomarker grid for each covariate profile.
struct CurveConfig {
  int points = 200;
  std::optional<double> lower;  // default: observed biomarker range
  std::optional<double> upper;
  double level = 0.95;
  std::vector<std::map<std::string, double>> profiles;  // default: covariate means
};

struct OutputConfig {
  std::string directory = ".";
  std::vector<std::string> formats{"csv"};
};

struct RunConfig {
  ModelConfig model;
  FitOptions fit;
  std::uint64_t seed = 1;
  DataConfig data;
  CvPlan cv;
  bool has_cv = false;
  CurveConfig curve;
  StudyConfig study = default_study();
  bool has_study = false;
  OutputConfig output;
  unsigned threads = 1;
};

/// Parses a JSON document. Relative data paths are resolved against `base_dir`.
RunConfig parse_config(const std::string& text, const std::string& base_dir = "");
RunConfig load_config(const std::string& path);

}  // namespace clreg
