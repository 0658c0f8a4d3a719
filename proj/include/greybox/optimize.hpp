#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "greybox/model.hpp"
#include "greybox/signals.hpp"
#include "greybox/simulate.hpp"

namespace greybox {

/// Everything the frequency-domain cost needs besides theta.
struct CostSetup {
  Matrix u_period;              // m x N periodic excitation used to simulate the model
  SpectrumSet Y;                // measured output spectra on the processed lines
  std::vector<CMatrix> weights;  // per-line l x l Hermitian PSD; empty means identity
  ParameterMask mask;
  GreyBoxModel model_template;  // structure and fixed entries
  int warmup_periods = 3;

  int lines() const { return Y.size(); }
  void validate() const;
};

/// Cost setup from a record: first period of u, measured output averaged over
/// the selected periods.
CostSetup make_cost_setup(const TimeRecord& record, const std::vector<int>& lines, const GreyBoxModel& model_template,
                          const ParameterMask& mask, PeriodRange periods = {});

struct Residual {
  CMatrix eps;  // l x F, modelled minus measured
  bool ok = true;
  SimStatus status = SimStatus::ok;
};

/// Simulates warmup_periods + 1 periods from rest and compares the DFT of the
/// last period with the measured spectra.
Residual residual_spectrum(const Vector& theta, const CostSetup& setup);

/// sum_k eps(k)^H W(k) eps(k); +inf when the simulation fails.
double cost(const Vector& theta, const CostSetup& setup);
double cost(const Residual& residual, const CostSetup& setup);

struct Jacobian {
  CMatrix J;       // (l F) x n_theta, row block k holds dY_m(k)/dtheta
  Residual residual;
  std::vector<bool> column_diverged;

  CMatrix line(int k, int l) const { return J.middleRows(static_cast<Eigen::Index>(k) * l, l); }
};

/// Analytical Jacobian of the modelled output spectra. All parameters share
/// one sensitivity recursion driven by the base trajectory; the implicit
/// output coupling through dg/dy is solved exactly per sample.
Jacobian jacobian(const Vector& theta, const CostSetup& setup);

struct ValidationOptions {
  int warmup_periods = 3;
  PeriodRange periods;  // measured periods averaged for comparison
};

struct ValidationResult {
  double rms = 0.0;            // time-domain RMS of the last-period error
  double relative_rms = 0.0;   // rms / rms(measured)
  Matrix error;                // l x N, modelled minus measured
  SpectrumSet error_spectrum;  // on the requested lines
  SimStatus status = SimStatus::ok;

  bool ok() const { return status == SimStatus::ok; }
};

ValidationResult validate_model(const GreyBoxModel& model, const TimeRecord& record, const std::vector<int>& lines,
                                const ValidationOptions& options = {});

struct LmOptions {
  int max_iter = 100;
  double lambda0 = 0.0;  // <= 0 selects 1e-3 mean(diag(J^T J)) in column-scaled space
  double lambda_up = 10.0;
  double lambda_down = 10.0;
  double lambda_max = 1e12;
  double tol = 1e-10;  // relative cost change
};

struct LmIteration {
  int iteration = 0;
  double lambda = 0.0;
  double cost = 0.0;
  double validation_rms = std::numeric_limits<double>::quiet_NaN();
  bool accepted = false;
};

struct LmResult {
  Vector theta;               // selected iterate
  GreyBoxModel model;
  int selected_iteration = 0;  // index into accepted_costs
  double selected_validation_rms = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> accepted_costs;     // iteration 0 first
  std::vector<double> validation_history;  // per accepted iterate
  std::vector<LmIteration> trace;          // every trial step
  Vector final_theta;
  std::string status;  // converged, max_iter, lambda_max, stationary
};

struct LmValidation {
  const TimeRecord* record = nullptr;
  std::vector<int> lines;
  ValidationOptions options;
};

/// Levenberg-Marquardt on the real-stacked weighted residual. The returned
/// model is the accepted iterate with the smallest validation RMS when a
/// validation record is supplied, otherwise the last accepted iterate.
LmResult lm_optimize(const Vector& theta0, const CostSetup& setup, const LmValidation& validation = {},
                     const LmOptions& options = {});

/// iteration,lambda,cost,validation_rms,accepted
void write_trace_csv(const std::filesystem::path& path, const LmResult& result);

}  // namespace greybox
