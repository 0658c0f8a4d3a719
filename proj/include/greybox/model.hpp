#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "greybox/error.hpp"

namespace greybox {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

struct Dimensions {
  int n_s = 1;  // state order
  int m = 1;    // external inputs
  int l = 1;    // outputs
  int s = 0;    // nonlinear basis terms
  int n_p = 0;  // physical DOFs, only meaningful for truth systems

  int extended_inputs() const { return m + s; }
  void validate() const;
  bool operator==(const Dimensions&) const = default;
};

enum class BasisSignal { displacement, velocity };

/// Scalar function hook for non-polynomial basis terms.
struct ScalarFunction {
  std::string tag;
  std::function<double(double)> value;
  std::function<double(double)> derivative;
};

/// One univariate nonlinear regressor g_a = f(y_channel) or f(ydot_channel).
struct BasisTerm {
  int channel = 0;
  BasisSignal signal = BasisSignal::displacement;
  int exponent = 3;
  std::optional<ScalarFunction> function;  // overrides exponent when set

  double value(double v) const;
  double derivative(double v) const;
  std::string label() const;
};

struct BasisSet {
  std::vector<BasisTerm> terms;

  int size() const { return static_cast<int>(terms.size()); }
  bool empty() const { return terms.empty(); }
  bool has_velocity_terms() const;
  /// Distinct output channels read by the terms, ascending.
  std::vector<int> nl_channels() const;
  void validate(int l) const;

  /// Monomials y[channel]^p for each p in degrees.
  static BasisSet polynomial(int channel, const std::vector<int>& degrees);
};

/// Evaluates g in basis order. The ydot overload is required whenever a
/// velocity term is present.
Vector eval_basis(const BasisSet& basis, const Vector& y);
Vector eval_basis(const BasisSet& basis, const Vector& y, const Vector& ydot);

struct BasisGradient {
  Matrix dy;     // s x l, dg/dy
  Matrix dydot;  // s x l, dg/dydot (all zero for displacement-only bases)
};

BasisGradient basis_gradient(const BasisSet& basis, const Vector& y);
BasisGradient basis_gradient(const BasisSet& basis, const Vector& y,
                             const Vector& ydot);

/// Discrete-time grey-box model
///   x(t+1) = A x(t) + Bext ubar(t)
///   y(t)   = C x(t) + Dext ubar(t),   ubar = [u; g(y_nl, ydot_nl)]
/// with Bext = [B E] and Dext = [D F].
struct GreyBoxModel {
  Matrix A;
  Matrix Bext;
  Matrix C;
  Matrix Dext;
  double Ts = 1.0;
  BasisSet basis;
  Dimensions dims;

  static GreyBoxModel zeros(const Dimensions& dims, double Ts, BasisSet basis);

  auto B() const { return Bext.leftCols(dims.m); }
  auto E() const { return Bext.rightCols(dims.s); }
  auto D() const { return Dext.leftCols(dims.m); }
  auto F() const { return Dext.rightCols(dims.s); }

  /// Checks shapes against dims and finiteness of every entry.
  void validate() const;
  /// True when the output equation depends on g through nl-channel rows of F,
  /// which makes the output equation implicit.
  bool implicit_output() const;
};

/// Similarity transform x -> T x; returns (T A T^-1, T Bext, C T^-1, Dext).
GreyBoxModel transform_state(const GreyBoxModel& model, const Matrix& T);

/// Free/fixed pattern per entry of (A, Bext, C, Dext).
struct ParameterMask {
  Mask A;
  Mask Bext;
  Mask C;
  Mask Dext;

  /// Everything free except F, which is held at its current value.
  static ParameterMask defaults(const Dimensions& dims);
  static ParameterMask all_free(const Dimensions& dims);

  int free_count() const;
  void check(const Dimensions& dims) const;
};

/// vec(A); vec(Bext); vec(C); vec(Dext), column-major, fixed entries skipped.
Vector pack_parameters(const GreyBoxModel& model, const ParameterMask& mask);
GreyBoxModel unpack_parameters(const Vector& theta, const ParameterMask& mask,
                               const GreyBoxModel& model_template);

/// Labels like "A(2,1)" or "E(1,2)" (1-based) for each packed entry.
std::vector<std::string> parameter_labels(const Dimensions& dims,
                                          const ParameterMask& mask);

/// Free-parameter count with F fixed:
/// n_s^2 + n_s (m + s) + l n_s + l m.
int default_parameter_count(const Dimensions& dims);

}  // namespace greybox
