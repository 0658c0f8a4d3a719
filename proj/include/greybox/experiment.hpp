#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "greybox/fnsi.hpp"
#include "greybox/optimize.hpp"
#include "greybox/physical.hpp"
#include "greybox/signals.hpp"
#include "greybox/simulate.hpp"
#include "greybox/stats.hpp"

namespace greybox {

/// One experiment manifest: where data comes from, how it is excited and
/// which model is fitted. Loaded from JSON; see configs/ for examples.
struct ExperimentConfig {
  // data source
  bool synthetic = true;
  PhysicalSystem system;                   // synthetic truth
  std::filesystem::path data_path;         // measured estimation record
  std::filesystem::path validation_path;   // optional, else the last period is held out

  // excitation and acquisition
  double fs = 2441.0;
  int N = 8192;
  ExcitedBand band;
  int periods = 30;    // total simulated periods
  int transient = 5;   // discarded leading periods
  double rms = 0.1;
  std::optional<double> snr_db;
  std::uint64_t seed = 1;
  std::uint64_t validation_seed = 1001;
  int validation_periods = 2;  // kept periods of the validation record
  NewtonOptions newton;

  // model
  int n_s = 2;
  int block_rows = 0;
  BasisSet basis;
  bool free_F = false;
  int warmup_periods = 3;

  // refinement and extraction
  bool run_lm = true;
  LmOptions lm;
  RatioMap ratio{-1, 0};  // row -1 selects the channel read by the first basis term
  int force_points = 101;

  std::filesystem::path output_dir = "out";
  int realizations = 20;

  /// Relative data paths resolve against base_dir; output_dir stays as given.
  static ExperimentConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
  nlohmann::json to_json() const;
  void validate() const;
};

ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// Parses "2:5" into {2}, {2,3}, {2,3,4}, {2,3,4,5}, or "2,3" into {{2,3}}.
std::vector<std::vector<int>> parse_degree_sets(const std::string& text);

struct ExperimentData {
  TimeRecord estimation;  // kept periods only
  TimeRecord validation;
  double noise_sigma = 0.0;
};

/// Steady-state truth response to one input period (m x N), with seeded
/// output noise at the configured SNR.
TimeRecord synthesize_record(const ExperimentConfig& config, const Matrix& u_period, int n_transient, int n_keep,
                             std::uint64_t noise_seed, double* noise_sigma = nullptr);

/// Synthetic estimation record from `seed` and validation record from the
/// validation seed, or the measured records for file sources.
ExperimentData acquire_data(const ExperimentConfig& config, std::uint64_t seed);
ExperimentData acquire_data(const ExperimentConfig& config);

struct IdentificationResult {
  FnsiResult fnsi;
  std::optional<LmResult> lm;
  GreyBoxModel model;  // final selected model
  ParameterMask mask;
  ValidationResult initial_validation;
  ValidationResult final_validation;
  std::optional<ModalParameters> modes;
  std::optional<NonlinearCoefficientEstimate> coefficients;
  std::string extraction_error;
};

/// FNSI then (optionally) LM with validation-based selection, then physical
/// extraction. Extraction failures are recorded, not thrown.
IdentificationResult identify(const ExperimentConfig& config, const ExperimentData& data, const BasisSet& basis,
                              bool run_lm);
IdentificationResult identify(const ExperimentConfig& config, const ExperimentData& data);

struct DegreeScanEntry {
  std::vector<int> degrees;
  int parameters = 0;
  double initial_rms = 0.0;
  double final_rms = 0.0;
  std::string error;
};

std::vector<DegreeScanEntry> degree_scan(const ExperimentConfig& config, const ExperimentData& data,
                                         const std::vector<std::vector<int>>& sets, bool run_lm);

/// Labels f<k>_hz, zeta<k> per mode followed by one per basis term.
std::vector<std::string> physical_labels(const ExperimentConfig& config);

EnsembleResult run_monte_carlo(const ExperimentConfig& config, int R);

// Output writers; all paths are relative to dir.
void write_identification(const std::filesystem::path& dir, const ExperimentConfig& config,
                          const ExperimentData& data, const IdentificationResult& result);
void write_degree_scan(const std::filesystem::path& path, const std::vector<DegreeScanEntry>& scan);
void write_ensemble(const std::filesystem::path& dir, const EnsembleResult& ensemble);
nlohmann::json extraction_report(const GreyBoxModel& model, const RatioMap& ratio, const std::vector<int>& lines,
                                 int N, const std::filesystem::path& dir, int force_points, double y_max);

}  // namespace greybox
