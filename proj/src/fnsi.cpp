#include "greybox/fnsi.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "linalg.hpp"

namespace greybox {

BlockMatrices build_block_matrices(const SpectrumSet& Y, const SpectrumSet& Ubar, int i) {
  if (i < 1) throw DimensionError("block matrices: i must be >= 1");
  if (Y.lines != Ubar.lines || Y.z.size() != Y.size()) {
    throw DimensionError("block matrices: output and input spectra must share lines");
  }
  const Eigen::Index F = Y.size();
  const Eigen::Index l = Y.channels();
  const Eigen::Index mu = Ubar.channels();
  if (F < mu * i) {
    throw DimensionError("block matrices: " + std::to_string(F) + " lines cannot support " + std::to_string(i) +
                         " block rows of " + std::to_string(mu) + " extended inputs");
  }
  BlockMatrices out;
  out.Y.resize(l * i, 2 * F);
  out.Ubar.resize(mu * i, 2 * F);
  CMatrix yc = Y.values;
  CMatrix uc = Ubar.values;
  for (int r = 0; r < i; ++r) {
    out.Y.block(r * l, 0, l, F) = yc.real();
    out.Y.block(r * l, F, l, F) = yc.imag();
    out.Ubar.block(r * mu, 0, mu, F) = uc.real();
    out.Ubar.block(r * mu, F, mu, F) = uc.imag();
    yc = yc * Y.z.asDiagonal();
    uc = uc * Y.z.asDiagonal();
  }
  return out;
}

Projection orthogonal_project(const Matrix& Y, const Matrix& Ubar) {
  if (Y.cols() != Ubar.cols()) throw DimensionError("orthogonal_project: column counts differ");
  Projection out;
  if (Ubar.rows() == 0) {
    out.O = Y;
    return out;
  }
  // Row space of Ubar from the SVD of its transpose; O = Y (I - Q Q^T).
  Eigen::BDCSVD<Matrix> svd(Ubar.transpose(), Eigen::ComputeThinU);
  const Vector& s = svd.singularValues();
  const double tol = s.size() && s[0] > 0.0 ? 1e-12 * s[0] : 0.0;
  int rank = 0;
  while (rank < s.size() && s[rank] > tol) ++rank;
  out.effective_rank = rank;
  out.rank_deficient = rank < Ubar.rows();
  const Matrix Q = svd.matrixU().leftCols(rank);
  out.O = Y - (Y * Q) * Q.transpose();
  return out;
}

Observability estimate_observability(const Matrix& O, int n_s) {
  if (n_s < 1 || n_s > O.rows()) {
    throw DimensionError("estimate_observability: n_s must lie in 1.." + std::to_string(O.rows()));
  }
  Eigen::BDCSVD<Matrix> svd(O, Eigen::ComputeThinU);
  Observability out;
  out.singular_values = svd.singularValues();
  const Vector& s = out.singular_values;
  const double tol = s.size() && s[0] > 0.0 ? 1e-12 * s[0] : 0.0;
  if (s.size() < n_s || !(s[n_s - 1] > tol)) {
    throw NumericalError("estimate_observability: n_s = " + std::to_string(n_s) + " exceeds the numerical rank of O");
  }
  Matrix L = svd.matrixU().leftCols(n_s);
  for (int c = 0; c < n_s; ++c) {
    Eigen::Index idx = 0;
    L.col(c).cwiseAbs().maxCoeff(&idx);
    if (L(idx, c) < 0.0) L.col(c) *= -1.0;
  }
  out.Gamma = L * s.head(n_s).cwiseSqrt().asDiagonal();
  return out;
}

AcEstimate estimate_AC(const Matrix& Gamma, int l, int n_s) {
  if (Gamma.cols() != n_s || l < 1 || Gamma.rows() % l != 0) {
    throw DimensionError("estimate_AC: Gamma must be (l i) x n_s");
  }
  if (Gamma.rows() < n_s + l) throw DimensionError("estimate_AC: need i l >= n_s + l");
  const Eigen::Index rows = Gamma.rows() - l;
  const auto inv = detail::pinv(Gamma.topRows(rows));
  AcEstimate out;
  out.A = inv.value * Gamma.bottomRows(rows);
  out.C = Gamma.topRows(l);
  out.condition = inv.condition;
  return out;
}

BdEstimate estimate_BD(const Matrix& A, const Matrix& C, const SpectrumSet& Y, const SpectrumSet& Ubar,
                       const BdConstraints& constraints) {
  const Eigen::Index n = A.rows();
  const Eigen::Index l = C.rows();
  const Eigen::Index mu = Ubar.channels();
  const Eigen::Index F = Y.size();
  if (A.cols() != n || C.cols() != n || Y.channels() != l || Ubar.size() != F || Y.lines != Ubar.lines) {
    throw DimensionError("estimate_BD: inconsistent dimensions");
  }
  Mask bmask = constraints.Bext.size() ? constraints.Bext : Mask::Constant(n, mu, true);
  Mask dmask = constraints.Dext.size() ? constraints.Dext : Mask::Constant(l, mu, true);
  Matrix bfix = constraints.Bext_fixed.size() ? constraints.Bext_fixed : Matrix::Zero(n, mu);
  Matrix dfix = constraints.Dext_fixed.size() ? constraints.Dext_fixed : Matrix::Zero(l, mu);
  if (bmask.rows() != n || bmask.cols() != mu || dmask.rows() != l || dmask.cols() != mu ||
      bfix.rows() != n || bfix.cols() != mu || dfix.rows() != l || dfix.cols() != mu) {
    throw DimensionError("estimate_BD: constraint shapes do not match (n_s, l, m + s)");
  }
  const int nb = static_cast<int>(bmask.count());
  const int nd = static_cast<int>(dmask.count());
  const int p = nb + nd;

  Matrix K(2 * l * F, p);
  Vector rhs(2 * l * F);
  // fixed entries contribute a known part that is moved to the right-hand side
  Matrix bf = bfix;
  Matrix df = dfix;
  bf = bmask.select(Matrix::Zero(n, mu), bf);
  df = dmask.select(Matrix::Zero(l, mu), df);
  const CMatrix bfc = bf.cast<std::complex<double>>();
  const CMatrix dfc = df.cast<std::complex<double>>();
  const CMatrix Ac = A.cast<std::complex<double>>();
  const CMatrix Cc = C.cast<std::complex<double>>();
  for (Eigen::Index k = 0; k < F; ++k) {
    CMatrix Wk(l, n);
    if (n > 0) {
      CMatrix zA = -Ac;
      zA.diagonal().array() += Y.z[k];
      Eigen::PartialPivLU<CMatrix> lu(zA);
      if (!(lu.rcond() > 1e-14)) {
        throw NumericalError("estimate_BD: (zI - A) is singular at line " + std::to_string(Y.lines[k]));
      }
      Wk = Cc * lu.inverse();
    }
    const CVector uk = Ubar.values.col(k);
    const CVector masked_known = Wk * (bfc * uk) + dfc * uk;
    const CVector yk = Y.values.col(k) - masked_known;
    rhs.segment(k * l, l) = yk.real();
    rhs.segment(l * F + k * l, l) = yk.imag();
    int col = 0;
    for (Eigen::Index c = 0; c < mu; ++c) {
      for (Eigen::Index r = 0; r < n; ++r) {
        if (!bmask(r, c)) continue;
        const CVector v = Wk.col(r) * uk[c];
        K.block(k * l, col, l, 1) = v.real();
        K.block(l * F + k * l, col, l, 1) = v.imag();
        ++col;
      }
    }
    for (Eigen::Index c = 0; c < mu; ++c) {
      for (Eigen::Index r = 0; r < l; ++r) {
        if (!dmask(r, c)) continue;
        K.block(k * l, col, l, 1).setZero();
        K.block(l * F + k * l, col, l, 1).setZero();
        K(k * l + r, col) = uk[c].real();
        K(l * F + k * l + r, col) = uk[c].imag();
        ++col;
      }
    }
  }

  Vector scale = K.colwise().norm().transpose();
  for (auto& v : scale) v = v > 0.0 ? v : 1.0;
  const auto inv = detail::pinv(K * scale.cwiseInverse().asDiagonal());
  const Vector theta = scale.cwiseInverse().asDiagonal() * (inv.value * rhs);

  BdEstimate out;
  out.Bext = bfix;
  out.Dext = dfix;
  int col = 0;
  for (Eigen::Index c = 0; c < mu; ++c)
    for (Eigen::Index r = 0; r < n; ++r)
      if (bmask(r, c)) out.Bext(r, c) = theta[col++];
  for (Eigen::Index c = 0; c < mu; ++c)
    for (Eigen::Index r = 0; r < l; ++r)
      if (dmask(r, c)) out.Dext(r, c) = theta[col++];
  out.rank = inv.rank;
  out.unknowns = p;
  out.residual = (K * theta - rhs).norm();
  const double ynorm = Y.values.norm();
  out.relative_residual = ynorm > 0.0 ? out.residual / ynorm : out.residual;
  return out;
}

ExtendedSpectra extended_spectra(const TimeRecord& record, const BasisSet& basis, const std::vector<int>& lines,
                                 PeriodRange periods) {
  record.validate();
  basis.validate(record.outputs());
  const Matrix y = mean_period(record.y, record.N, periods);
  const Matrix u = mean_period(record.u, record.N, periods);
  const Matrix ydot = basis.has_velocity_terms() ? spectral_derivative(y, record.fs) : Matrix();
  Matrix ubar(record.inputs() + basis.size(), record.N);
  ubar.topRows(record.inputs()) = u;
  for (int t = 0; t < record.N; ++t) {
    if (basis.empty()) break;
    ubar.col(t).tail(basis.size()) = basis.has_velocity_terms() ? eval_basis(basis, y.col(t), ydot.col(t))
                                                                : eval_basis(basis, y.col(t));
  }
  return {dft(y, record.N, lines), dft(ubar, record.N, lines)};
}

int default_block_rows(int n_s, int l) {
  return (2 * (n_s + 1) + l - 1) / l + 2;
}

FnsiResult fnsi_identify(const ExtendedSpectra& spectra, const BasisSet& basis, double Ts,
                         const FnsiOptions& options) {
  const int l = spectra.Y.channels();
  const int mu = spectra.Ubar.channels();
  Dimensions dims{options.n_s, mu - basis.size(), l, basis.size(), 0};
  dims.validate();
  const int i = options.block_rows > 0 ? options.block_rows : default_block_rows(options.n_s, l);
  if (i * l < options.n_s + l) {
    throw DimensionError("fnsi: i l = " + std::to_string(i * l) + " is below n_s + l");
  }

  const auto blocks = build_block_matrices(spectra.Y, spectra.Ubar, i);
  const auto proj = orthogonal_project(blocks.Y, blocks.Ubar);
  const auto obs = estimate_observability(proj.O, options.n_s);
  const auto ac = estimate_AC(obs.Gamma, l, options.n_s);

  BdConstraints constraints;
  auto result_model = GreyBoxModel::zeros(dims, Ts, basis);
  if (options.mask) {
    options.mask->check(dims);
    constraints.Bext = options.mask->Bext;
    constraints.Dext = options.mask->Dext;
    constraints.Bext_fixed = result_model.Bext;
    constraints.Dext_fixed = result_model.Dext;
  } else {
    const auto mask = ParameterMask::defaults(dims);
    constraints.Bext = mask.Bext;
    constraints.Dext = mask.Dext;
    constraints.Bext_fixed = result_model.Bext;
    constraints.Dext_fixed = result_model.Dext;
  }
  const auto bd = estimate_BD(ac.A, ac.C, spectra.Y, spectra.Ubar, constraints);

  result_model.A = ac.A;
  result_model.C = ac.C;
  result_model.Bext = bd.Bext;
  result_model.Dext = bd.Dext;

  const Eigen::ComplexEigenSolver<Matrix> eig(ac.A, false);
  const double radius = eig.eigenvalues().cwiseAbs().maxCoeff();
  const Vector& sv = obs.singular_values;
  std::vector<double> svs(sv.data(), sv.data() + sv.size());
  const double gap = options.n_s < sv.size() && sv[options.n_s] > 0.0 ? sv[options.n_s - 1] / sv[options.n_s]
                                                                       : std::numeric_limits<double>::infinity();
  // order advisory: the index of the largest consecutive singular-value ratio
  int advised = 1;
  double best_ratio = 0.0;
  for (Eigen::Index k = 0; k + 1 < sv.size(); ++k) {
    if (sv[k + 1] <= 0.0) {
      advised = static_cast<int>(k + 1);
      break;
    }
    const double ratio = sv[k] / sv[k + 1];
    if (ratio > best_ratio) {
      best_ratio = ratio;
      advised = static_cast<int>(k + 1);
    }
  }

  nlohmann::json diag;
  diag["n_s"] = options.n_s;
  diag["block_rows"] = i;
  diag["lines"] = spectra.Y.size();
  diag["singular_values"] = svs;
  diag["order_gap"] = std::isfinite(gap) ? nlohmann::json(gap) : nlohmann::json(nullptr);
  diag["advised_order"] = advised;
  diag["projection_rank"] = proj.effective_rank;
  diag["projection_rank_deficient"] = proj.rank_deficient;
  diag["shift_condition"] = std::isfinite(ac.condition) ? nlohmann::json(ac.condition) : nlohmann::json(nullptr);
  diag["bd_residual"] = bd.residual;
  diag["bd_relative_residual"] = bd.relative_residual;
  diag["bd_rank"] = bd.rank;
  diag["bd_unknowns"] = bd.unknowns;
  diag["spectral_radius"] = radius;
  diag["unstable"] = radius >= 1.0;
  return {result_model, diag};
}

FnsiResult fnsi_identify(const TimeRecord& record, const BasisSet& basis, const ExcitedBand& band,
                         const FnsiOptions& options) {
  band.validate(record.N);
  const auto spectra = extended_spectra(record, basis, band.lines(), options.periods);
  return fnsi_identify(spectra, basis, 1.0 / record.fs, options);
}

}  // namespace greybox
