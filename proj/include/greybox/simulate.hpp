#pragma once

#include <vector>

#include "greybox/model.hpp"
#include "greybox/signals.hpp"

namespace greybox {

enum class SimStatus { ok, diverged, implicit_failure };

const char* to_string(SimStatus status);

struct SimulationOptions {
  double divergence_bound = 1e8;  // on the state norm
  double implicit_tol = 1e-12;
  int implicit_max_iter = 50;
};

/// Trajectories of a discrete grey-box simulation. Columns are time samples.
/// When status != ok the samples from first_bad on are not meaningful.
struct SimulationOutput {
  Matrix x;     // n_s x T
  Matrix y;     // l x T
  Matrix g;     // s x T, evaluated basis
  Matrix ydot;  // l x T backward differences, only filled for velocity bases
  std::vector<int> implicit_iterations;  // per sample, empty for explicit models
  SimStatus status = SimStatus::ok;
  Eigen::Index first_bad = -1;

  bool ok() const { return status == SimStatus::ok; }
};

/// Simulates the model sample by sample. Velocity basis terms use the
/// backward difference (y(t) - y(t-1)) / Ts with ydot(0) = 0.
SimulationOutput simulate_discrete(const GreyBoxModel& model, const Matrix& u, const Vector& x0,
                                   const SimulationOptions& options = {});

/// Repeats one period (rows x N) P times.
Matrix tile_periods(const Matrix& period, int P);

/// Nonlinear restoring force c * g(q_dof) applied along `location`
/// (unit vector on the read DOF when left empty).
struct NonlinearForce {
  double coefficient = 0.0;
  BasisTerm term;
  Vector location;
};

/// M qdd + Cv qd + K q + sum_a c_a g_a(q_nl, qd_nl) = input_map u.
struct PhysicalSystem {
  Matrix M;
  Matrix Cv;
  Matrix K;
  std::vector<NonlinearForce> nonlinear;
  Matrix input_map;               // n_p x m
  std::vector<int> output_dofs;   // measured displacements, all DOFs when empty

  int dofs() const { return static_cast<int>(M.rows()); }
  int inputs() const { return static_cast<int>(input_map.cols()); }
  std::vector<int> outputs() const;
  void validate() const;

  /// Single-DOF oscillator with natural frequency f_n (Hz), damping ratio
  /// zeta and stiffness K, plus polynomial restoring terms c_p y^p.
  static PhysicalSystem sdof(double f_n, double zeta, double stiffness,
                             const std::vector<std::pair<int, double>>& polynomial = {});
};

enum class InputHold { zero_order, band_limited };

struct NewtonOptions {
  int decimation = 20;  // integration steps per output sample
  InputHold hold = InputHold::band_limited;
  bool velocity_outputs = false;
  double divergence_bound = 1e8;
};

struct NewtonResult {
  TimeRecord record;
  SimStatus status = SimStatus::ok;
  Eigen::Index first_bad = -1;
};

/// Integrates the truth system with fixed-step RK4 at fs * decimation, from
/// rest, over P repetitions of one input period (m x N), and returns the
/// displacements sampled at fs. The band-limited hold evaluates the periodic
/// trigonometric interpolant of the input period between samples.
NewtonResult simulate_newton(const PhysicalSystem& system, const Matrix& u_period, int P, double fs,
                             const NewtonOptions& options = {});

struct SteadyStateResult {
  TimeRecord record;        // the kept periods only
  double steadiness = 0.0;  // max |y_last - y_prev| / max |y_last|
  bool warning = false;     // steadiness above threshold
  SimStatus status = SimStatus::ok;
};

SteadyStateResult run_to_steady_state(const GreyBoxModel& model, const Matrix& u_period, int n_transient,
                                      int n_keep, double threshold = 1e-6);
SteadyStateResult run_to_steady_state(const PhysicalSystem& system, const Matrix& u_period, double fs,
                                      int n_transient, int n_keep, const NewtonOptions& options = {},
                                      double threshold = 1e-6);

}  // namespace greybox
