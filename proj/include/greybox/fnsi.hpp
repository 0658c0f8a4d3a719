#pragma once

#include <json.hpp>

#include "greybox/model.hpp"
#include "greybox/signals.hpp"

namespace greybox {

/// Real block matrices: row block r of the complex form is X * diag(z)^r,
/// and the real form places [Re, Im] side by side (2F columns).
struct BlockMatrices {
  Matrix Y;     // l i x 2F
  Matrix Ubar;  // (m + s) i x 2F
};

BlockMatrices build_block_matrices(const SpectrumSet& Y, const SpectrumSet& Ubar, int i);

struct Projection {
  Matrix O;
  int effective_rank = 0;      // of Ubar, relative tolerance 1e-12
  bool rank_deficient = false;
};

/// Rows of Y projected onto the orthogonal complement of the row space of Ubar.
Projection orthogonal_project(const Matrix& Y, const Matrix& Ubar);

struct Observability {
  Matrix Gamma;            // l i x n_s
  Vector singular_values;  // all singular values of O, nonincreasing
};

/// Gamma = L1 S1^(1/2) from the SVD of O. Each left singular vector is
/// oriented so its largest-magnitude entry is positive, which makes the
/// result deterministic.
Observability estimate_observability(const Matrix& O, int n_s);

struct AcEstimate {
  Matrix A;
  Matrix C;
  double condition = 0.0;  // of the shifted block used in the solve
};

AcEstimate estimate_AC(const Matrix& Gamma, int l, int n_s);

/// Optional structure for the B/D least squares: entries with a false mask
/// are held at the value in the matching fixed matrix.
struct BdConstraints {
  Mask Bext;
  Mask Dext;
  Matrix Bext_fixed;
  Matrix Dext_fixed;

  bool empty() const { return Bext.size() == 0 && Dext.size() == 0; }
};

struct BdEstimate {
  Matrix Bext;
  Matrix Dext;
  double residual = 0.0;           // ||Y - G Ubar|| over all lines
  double relative_residual = 0.0;  // residual / ||Y||
  int rank = 0;
  int unknowns = 0;
};

/// Linear least squares for Bext, Dext given (A, C), using
/// Y(k) = C (z_k I - A)^-1 Bext Ubar(k) + Dext Ubar(k).
BdEstimate estimate_BD(const Matrix& A, const Matrix& C, const SpectrumSet& Y, const SpectrumSet& Ubar,
                       const BdConstraints& constraints = {});

/// Spectra of the extended input [u; g(y, ydot)] computed from the averaged
/// period of a record. Velocity terms use the spectral derivative.
struct ExtendedSpectra {
  SpectrumSet Y;
  SpectrumSet Ubar;
};

ExtendedSpectra extended_spectra(const TimeRecord& record, const BasisSet& basis, const std::vector<int>& lines,
                                 PeriodRange periods = {});

struct FnsiOptions {
  int n_s = 2;
  int block_rows = 0;  // 0 selects the default ceil(2 (n_s + 1) / l) + 2
  PeriodRange periods;
  std::optional<ParameterMask> mask;  // fixed entries stay at zero
};

int default_block_rows(int n_s, int l);

struct FnsiResult {
  GreyBoxModel model;
  nlohmann::json diagnostics;
};

FnsiResult fnsi_identify(const TimeRecord& record, const BasisSet& basis, const ExcitedBand& band,
                         const FnsiOptions& options);

/// Same pipeline starting from spectra that are already extended.
FnsiResult fnsi_identify(const ExtendedSpectra& spectra, const BasisSet& basis, double Ts, const FnsiOptions& options);

}  // namespace greybox
