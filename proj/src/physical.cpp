#include "greybox/physical.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <unsupported/Eigen/MatrixFunctions>

namespace greybox {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::ofstream open_csv(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << std::setprecision(17);
  return out;
}
}  // namespace

ContinuousModel to_continuous(const GreyBoxModel& model) {
  model.validate();
  if (!(model.Ts > 0.0)) throw ConfigError("to_continuous: Ts must be positive");
  const auto n = model.dims.n_s;
  const auto mu = model.dims.extended_inputs();

  const Eigen::ComplexEigenSolver<Matrix> eig(model.A, false);
  for (Eigen::Index k = 0; k < eig.eigenvalues().size(); ++k) {
    const auto lam = eig.eigenvalues()[k];
    if (lam.real() <= 0.0 && std::abs(lam.imag()) <= 1e-12 * std::max(1.0, std::abs(lam))) {
      std::ostringstream msg;
      msg << "to_continuous: eigenvalue " << lam.real() << (lam.imag() < 0 ? "" : "+") << lam.imag()
          << "j lies on the closed negative real axis, principal logarithm undefined";
      throw NumericalError(msg.str());
    }
  }

  Matrix aug = Matrix::Zero(n + mu, n + mu);
  aug.topLeftCorner(n, n) = model.A;
  aug.topRightCorner(n, mu) = model.Bext;
  aug.bottomRightCorner(mu, mu).setIdentity();
  const Matrix L = aug.log() / model.Ts;
  if (!L.allFinite()) throw NumericalError("to_continuous: matrix logarithm failed");

  ContinuousModel out;
  out.A = L.topLeftCorner(n, n);
  out.Bext = L.topRightCorner(n, mu);
  out.C = model.C;
  out.Dext = model.Dext;
  out.Ts = model.Ts;
  out.dims = model.dims;
  out.basis = model.basis;
  return out;
}

GreyBoxModel to_discrete(const ContinuousModel& model) {
  const auto n = model.dims.n_s;
  const auto mu = model.dims.extended_inputs();
  Matrix aug = Matrix::Zero(n + mu, n + mu);
  aug.topLeftCorner(n, n) = model.A * model.Ts;
  aug.topRightCorner(n, mu) = model.Bext * model.Ts;
  const Matrix P = aug.exp();
  GreyBoxModel out;
  out.A = P.topLeftCorner(n, n);
  out.Bext = P.topRightCorner(n, mu);
  out.C = model.C;
  out.Dext = model.Dext;
  out.Ts = model.Ts;
  out.dims = model.dims;
  out.basis = model.basis;
  return out;
}

ModalParameters modal_parameters(const Matrix& A_c) {
  if (A_c.rows() != A_c.cols()) throw DimensionError("modal_parameters: A_c must be square");
  const Eigen::ComplexEigenSolver<Matrix> eig(A_c, false);
  ModalParameters out;
  for (Eigen::Index k = 0; k < eig.eigenvalues().size(); ++k) {
    const auto lam = eig.eigenvalues()[k];
    const double mag = std::abs(lam);
    if (std::abs(lam.imag()) <= 1e-10 * std::max(mag, 1e-300)) {
      out.real_eigenvalues.push_back(lam.real());
    } else if (lam.imag() > 0.0) {
      out.modes.push_back({mag / kTwoPi, -lam.real() / mag, lam});
    }
  }
  std::sort(out.modes.begin(), out.modes.end(),
            [](const Mode& a, const Mode& b) { return a.frequency_hz < b.frequency_hz; });
  std::sort(out.real_eigenvalues.begin(), out.real_eigenvalues.end());
  return out;
}

CMatrix transfer_matrix(const ContinuousModel& model, double omega) {
  CMatrix M = -model.A.cast<std::complex<double>>();
  M.diagonal().array() += std::complex<double>(0.0, omega);
  return model.C.cast<std::complex<double>>() * M.partialPivLu().solve(model.Bext.cast<std::complex<double>>()) +
         model.Dext.cast<std::complex<double>>();
}

CMatrix transfer_matrix(const GreyBoxModel& model, std::complex<double> z) {
  CMatrix M = -model.A.cast<std::complex<double>>();
  M.diagonal().array() += z;
  return model.C.cast<std::complex<double>>() * M.partialPivLu().solve(model.Bext.cast<std::complex<double>>()) +
         model.Dext.cast<std::complex<double>>();
}

NonlinearCoefficientEstimate nonlinear_coefficients(const ContinuousModel& model, const std::vector<int>& lines, int N,
                                                    RatioMap map) {
  const auto& d = model.dims;
  if (map.row < 0 || map.row >= d.l || map.column < 0 || map.column >= d.m) {
    throw ConfigError("nonlinear_coefficients: ratio map row/column out of range");
  }
  if (N <= 0) throw DimensionError("nonlinear_coefficients: N must be positive");
  NonlinearCoefficientEstimate out;
  out.lines = lines;
  for (int k : lines) out.freq_hz.push_back(k / (N * model.Ts));
  if (d.s == 0) return out;

  const auto F = static_cast<Eigen::Index>(lines.size());
  CMatrix G_row(d.extended_inputs(), F);
  for (Eigen::Index k = 0; k < F; ++k) {
    const double omega = kTwoPi * lines[static_cast<std::size_t>(k)] / (N * model.Ts);
    G_row.col(k) = transfer_matrix(model, omega).row(map.row).transpose();
  }
  const Eigen::ArrayXd den = G_row.row(map.column).cwiseAbs().transpose();
  const double den_max = F > 0 ? den.maxCoeff() : 0.0;

  for (int a = 0; a < d.s; ++a) {
    CoefficientSpectrum c;
    c.label = model.basis.terms[static_cast<std::size_t>(a)].label();
    c.values.resize(F);
    c.excluded.assign(static_cast<std::size_t>(F), false);
    double sum = 0.0;
    int count = 0;
    double max_im = 0.0;
    c.min_real = std::numeric_limits<double>::infinity();
    c.max_real = -std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < F; ++k) {
      const auto value = -G_row(d.m + a, k) / G_row(map.column, k);
      c.values[k] = value;
      if (!(den[k] >= 1e-8 * den_max)) {
        c.excluded[static_cast<std::size_t>(k)] = true;
        continue;
      }
      sum += value.real();
      ++count;
      c.min_real = std::min(c.min_real, value.real());
      c.max_real = std::max(c.max_real, value.real());
      max_im = std::max(max_im, std::abs(value.imag()));
      c.max_line_ratio = std::max(c.max_line_ratio, std::abs(value.imag()) / std::abs(value.real()));
    }
    if (count == 0) throw NumericalError("nonlinear_coefficients: every line has a vanishing denominator");
    c.average_real = sum / count;
    c.im_re_ratio = max_im / std::abs(c.average_real);
    out.terms.push_back(std::move(c));
  }
  return out;
}

NonlinearCoefficientEstimate nonlinear_coefficients(const GreyBoxModel& model, const std::vector<int>& lines, int N,
                                                    RatioMap map) {
  return nonlinear_coefficients(to_continuous(model), lines, N, map);
}

Vector restoring_force_curve(const std::vector<double>& coefficients, const BasisSet& basis, const Vector& grid) {
  if (static_cast<int>(coefficients.size()) != basis.size()) {
    throw DimensionError("restoring_force_curve: one coefficient per basis term required");
  }
  for (const auto& t : basis.terms) {
    if (t.signal != BasisSignal::displacement || t.channel != basis.terms.front().channel) {
      throw ConfigError("restoring_force_curve: terms must be displacement terms on a single channel");
    }
  }
  Vector f = Vector::Zero(grid.size());
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    for (std::size_t a = 0; a < coefficients.size(); ++a) f[i] += coefficients[a] * basis.terms[a].value(grid[i]);
  }
  return f;
}

nlohmann::json physical_report(const ModalParameters& modes, const NonlinearCoefficientEstimate& coefficients) {
  nlohmann::json j;
  j["modes"] = nlohmann::json::array();
  for (const auto& m : modes.modes) {
    j["modes"].push_back({{"frequency_hz", m.frequency_hz}, {"damping_ratio", m.damping_ratio},
                          {"eigenvalue", {m.eigenvalue.real(), m.eigenvalue.imag()}}});
  }
  j["real_eigenvalues"] = modes.real_eigenvalues;
  j["coefficients"] = nlohmann::json::array();
  for (const auto& c : coefficients.terms) {
    const auto excluded = std::count(c.excluded.begin(), c.excluded.end(), true);
    j["coefficients"].push_back({{"term", c.label},
                                 {"average", c.average_real},
                                 {"min", c.min_real},
                                 {"max", c.max_real},
                                 {"spread", c.spread()},
                                 {"im_re_ratio", c.im_re_ratio},
                                 {"max_line_ratio", c.max_line_ratio},
                                 {"excluded_lines", excluded}});
  }
  return j;
}

void write_coefficients_csv(const std::filesystem::path& path, const NonlinearCoefficientEstimate& coefficients) {
  auto out = open_csv(path);
  out << "freq_hz,term,re,im\n";
  for (const auto& c : coefficients.terms) {
    for (Eigen::Index k = 0; k < c.values.size(); ++k) {
      out << coefficients.freq_hz[static_cast<std::size_t>(k)] << ',' << c.label << ',' << c.values[k].real() << ','
          << c.values[k].imag() << '\n';
    }
  }
}

void write_force_curve_csv(const std::filesystem::path& path, const Vector& grid, const Vector& force) {
  if (grid.size() != force.size()) throw DimensionError("force curve: grid and force lengths differ");
  auto out = open_csv(path);
  out << "y,f\n";
  for (Eigen::Index i = 0; i < grid.size(); ++i) out << grid[i] << ',' << force[i] << '\n';
}

}  // namespace greybox
