#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "greybox/model.hpp"

namespace greybox {

/// Outcome of one input realization.
struct Realization {
  int index = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  Vector theta;     // raw identified parameters
  Vector physical;  // modal frequencies, damping ratios, averaged coefficients
};

struct EnsembleResult {
  std::vector<std::string> parameter_labels;
  std::vector<std::string> physical_labels;
  std::vector<Realization> realizations;  // ordered by index

  int successes() const;
  int failures() const;
  /// Successful realizations only, one row each.
  Matrix theta_samples() const;
  Matrix physical_samples() const;
};

/// Runs one realization; must fill theta and physical with fixed lengths.
using RealizationFn = std::function<Realization(int index, std::uint64_t seed)>;

/// Realization r = 1..R uses seed seed0 + r. Exceptions thrown by run are
/// recorded on that realization and the ensemble continues.
EnsembleResult monte_carlo(const RealizationFn& run, int R, std::uint64_t seed0,
                           std::vector<std::string> parameter_labels = {},
                           std::vector<std::string> physical_labels = {});

struct ParameterStats {
  std::string label;
  double mean = 0.0;
  double std = 0.0;  // unbiased
  double ratio_percent = 0.0;  // 100 std / |mean|
};

/// Column statistics of samples (rows are realizations).
std::vector<ParameterStats> ensemble_stats(const Matrix& samples, const std::vector<std::string>& labels = {});

struct Correlation {
  Matrix matrix;              // over the included columns
  std::vector<int> included;  // column indices with nonzero variance
  std::vector<int> excluded;  // zero-variance columns
};

Correlation correlation_matrix(const Matrix& samples);

nlohmann::json ensemble_report(const EnsembleResult& ensemble);

}  // namespace greybox
