#pragma once

#include <complex>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "greybox/model.hpp"

namespace greybox {

/// Continuous-time counterpart of a discrete model under zero-order hold.
struct ContinuousModel {
  Matrix A;
  Matrix Bext;
  Matrix C;
  Matrix Dext;
  double Ts = 1.0;  // sampling period of the discrete origin
  Dimensions dims;
  BasisSet basis;
};

/// Principal matrix logarithm of [[A, Bext], [0, I]] divided by Ts.
/// Throws NumericalError when A has an eigenvalue on the closed negative real axis.
ContinuousModel to_continuous(const GreyBoxModel& model);

/// Zero-order-hold discretisation at the stored Ts.
GreyBoxModel to_discrete(const ContinuousModel& model);

struct Mode {
  double frequency_hz = 0.0;
  double damping_ratio = 0.0;
  std::complex<double> eigenvalue;  // upper half-plane member of the pair
};

struct ModalParameters {
  std::vector<Mode> modes;                 // sorted by frequency
  std::vector<double> real_eigenvalues;    // overdamped or rigid, reported separately
};

ModalParameters modal_parameters(const Matrix& A_c);

/// G(j omega) = C (j omega I - A)^-1 Bext + Dext, l x (m + s).
CMatrix transfer_matrix(const ContinuousModel& model, double omega);
/// G(z) = C (z I - A)^-1 Bext + Dext for a discrete model.
CMatrix transfer_matrix(const GreyBoxModel& model, std::complex<double> z);

/// Which transfer-matrix entries form the coefficient ratio: the output row
/// and the linear-input column co-located with the nonlinearity.
struct RatioMap {
  int row = 0;
  int column = 0;
};

struct CoefficientSpectrum {
  std::string label;
  CVector values;             // c_a(k) on the processed lines
  std::vector<bool> excluded;  // denominator below 1e-8 max on that line
  double average_real = 0.0;  // arithmetic mean over the included lines
  double min_real = 0.0;
  double max_real = 0.0;
  double spread() const { return max_real - min_real; }
  double im_re_ratio = 0.0;   // max_k |Im c_a(k)| / |average_real|
  double max_line_ratio = 0.0;  // max_k |Im c_a(k)| / |Re c_a(k)|
};

struct NonlinearCoefficientEstimate {
  std::vector<int> lines;
  std::vector<double> freq_hz;
  std::vector<CoefficientSpectrum> terms;  // one per basis term, empty for linear models
};

/// c_a(k) = -G[row, m + a](j w_k) / G[row, column](j w_k), w_k = 2 pi k / (N Ts).
NonlinearCoefficientEstimate nonlinear_coefficients(const GreyBoxModel& model, const std::vector<int>& lines, int N,
                                                    RatioMap map = {});
NonlinearCoefficientEstimate nonlinear_coefficients(const ContinuousModel& model, const std::vector<int>& lines, int N,
                                                    RatioMap map = {});

/// f(y) = sum_a c_a g_a(y) on a displacement grid. All terms must be
/// displacement terms on one channel.
Vector restoring_force_curve(const std::vector<double>& coefficients, const BasisSet& basis, const Vector& grid);

nlohmann::json physical_report(const ModalParameters& modes, const NonlinearCoefficientEstimate& coefficients);

/// freq_hz,term,re,im
void write_coefficients_csv(const std::filesystem::path& path, const NonlinearCoefficientEstimate& coefficients);
/// y,f
void write_force_curve_csv(const std::filesystem::path& path, const Vector& grid, const Vector& force);

}  // namespace greybox
