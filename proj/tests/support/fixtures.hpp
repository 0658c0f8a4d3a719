#pragma once

// Shared generators for the unit and acceptance suites.

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>

#include <Eigen/Eigenvalues>

#include "greybox/experiment.hpp"
#include "greybox/fnsi.hpp"
#include "greybox/model.hpp"
#include "greybox/optimize.hpp"
#include "greybox/physical.hpp"
#include "greybox/signals.hpp"
#include "greybox/simulate.hpp"

namespace fixtures {

using namespace greybox;

inline Matrix random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix M(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r) M(r, c) = n(rng);
  return M;
}

inline double spectral_radius(const Matrix& A) {
  return Eigen::EigenSolver<Matrix>(A, false).eigenvalues().cwiseAbs().maxCoeff();
}

struct RandomModelOptions {
  int n_s = 2;
  int m = 1;
  int l = 1;
  int s = 0;
  double radius = 0.8;
  double nl_scale = 0.1;
  bool velocity = false;  // last term becomes a velocity term
  bool implicit = false;  // nonzero F on the nonlinear channel
  double Ts = 1.0;
};

/// Random model with spectral radius `radius`, cubic/quadratic basis terms on
/// channel 0 and small nonlinear gains.
inline GreyBoxModel random_model(std::mt19937_64& rng, const RandomModelOptions& o) {
  BasisSet basis;
  for (int a = 0; a < o.s; ++a) {
    BasisTerm t;
    t.channel = a % o.l;
    t.exponent = 2 + a % 2;
    if (o.velocity && a == o.s - 1) t.signal = BasisSignal::velocity;
    basis.terms.push_back(t);
  }
  Dimensions dims{o.n_s, o.m, o.l, o.s, 0};
  auto model = GreyBoxModel::zeros(dims, o.Ts, basis);
  Matrix A = random_matrix(rng, o.n_s, o.n_s);
  model.A = A * (o.radius / spectral_radius(A));
  model.Bext.leftCols(o.m) = random_matrix(rng, o.n_s, o.m);
  model.C = random_matrix(rng, o.l, o.n_s);
  model.Dext.leftCols(o.m) = random_matrix(rng, o.l, o.m, 0.5);
  if (o.s > 0) {
    model.Bext.rightCols(o.s) = random_matrix(rng, o.n_s, o.s, o.nl_scale);
    if (o.implicit) model.Dext.rightCols(o.s) = random_matrix(rng, o.l, o.s, 0.3 * o.nl_scale);
  }
  return model;
}

/// Random multisine periods (m x N) on lines 1..k_max.
inline Matrix multisine_input(int m, int N, int k_max, double rms, std::uint64_t seed) {
  Matrix u(m, N);
  ExcitedBand band{1, k_max, {}};
  for (int c = 0; c < m; ++c) u.row(c) = generate_multisine(band, 1.0, N, rms, seed + 31 * c).transpose();
  return u;
}

/// Continuous single-DOF Duffing-type oscillator in state-space form with
/// state [q; qdot], output q and extended input [u; q^2; q^3].
inline ContinuousModel duffing_continuous(double f_n, double zeta, double M, double c2, double c3, double Ts) {
  const double w = 2.0 * M_PI * f_n;
  const double K = M * w * w;
  const double Cv = 2.0 * zeta * w * M;
  ContinuousModel cm;
  cm.dims = Dimensions{2, 1, 1, 2, 1};
  cm.basis = BasisSet::polynomial(0, {2, 3});
  cm.Ts = Ts;
  cm.A = Matrix(2, 2);
  cm.A << 0.0, 1.0, -K / M, -Cv / M;
  cm.Bext = Matrix::Zero(2, 3);
  cm.Bext(1, 0) = 1.0 / M;
  cm.Bext(1, 1) = -c2 / M;
  cm.Bext(1, 2) = -c3 / M;
  cm.C = Matrix(1, 2);
  cm.C << 1.0, 0.0;
  cm.Dext = Matrix::Zero(1, 3);
  return cm;
}

inline double max_relative_pole_error(const Matrix& A_est, const Matrix& A_true) {
  auto sorted = [](const Matrix& A) {
    Eigen::VectorXcd ev = Eigen::EigenSolver<Matrix>(A, false).eigenvalues();
    std::vector<std::complex<double>> v(ev.data(), ev.data() + ev.size());
    std::sort(v.begin(), v.end(), [](auto a, auto b) {
      return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
    });
    return v;
  };
  const auto e = sorted(A_est);
  const auto t = sorted(A_true);
  double err = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) err = std::max(err, std::abs(e[i] - t[i]) / std::abs(t[i]));
  return err;
}

/// Row k*l + i of the stacked residual, matching the Jacobian layout.
inline CVector stack_residual(const CMatrix& eps) {
  CVector v(eps.size());
  for (Eigen::Index k = 0; k < eps.cols(); ++k) v.segment(k * eps.rows(), eps.rows()) = eps.col(k);
  return v;
}

/// Max over columns of ||J_analytic - J_fd|| / ||J_fd|| with central
/// differences of step h (1 + |theta_j|).
inline double jacobian_fd_error(const Vector& theta, const CostSetup& setup, double h = 1e-6) {
  const auto jac = jacobian(theta, setup);
  double worst = 0.0;
  for (Eigen::Index j = 0; j < theta.size(); ++j) {
    const double step = h * (1.0 + std::abs(theta[j]));
    Vector tp = theta, tm = theta;
    tp[j] += step;
    tm[j] -= step;
    const auto rp = residual_spectrum(tp, setup);
    const auto rm = residual_spectrum(tm, setup);
    if (!rp.ok || !rm.ok) return std::numeric_limits<double>::infinity();
    const CVector fd = (stack_residual(rp.eps) - stack_residual(rm.eps)) / (2.0 * step);
    const double denom = fd.norm();
    const double err = (jac.J.col(j) - fd).norm() / (denom > 0.0 ? denom : 1.0);
    worst = std::max(worst, err);
  }
  return worst;
}

/// Setup whose measured spectra come from `truth`, simulated on `u`.
inline CostSetup setup_from_model(const GreyBoxModel& truth, const Matrix& u, const ParameterMask& mask,
                                  int warmup = 3) {
  const auto ss = run_to_steady_state(truth, u, warmup + 2, 1);
  std::vector<int> lines;
  const int N = static_cast<int>(u.cols());
  for (int k = 1; k < N / 2; ++k) lines.push_back(k);
  auto setup = make_cost_setup(ss.record, lines, truth, mask);
  setup.warmup_periods = warmup;
  return setup;
}

}  // namespace fixtures
