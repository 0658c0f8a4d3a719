#pragma once

#include <Eigen/SVD>

#include "greybox/model.hpp"

namespace greybox::detail {

struct Pinv {
  Matrix value;
  int rank = 0;
  double condition = 0.0;  // sigma_max / sigma_min over all singular values
};

/// SVD pseudo-inverse with singular values below rtol * sigma_max dropped.
inline Pinv pinv(const Matrix& M, double rtol = 1e-12) {
  Eigen::BDCSVD<Matrix> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  Pinv out;
  out.value = Matrix::Zero(M.cols(), M.rows());
  if (s.size() == 0 || s[0] == 0.0) {
    out.condition = std::numeric_limits<double>::infinity();
    return out;
  }
  const double tol = rtol * s[0];
  Vector inv = Vector::Zero(s.size());
  for (Eigen::Index k = 0; k < s.size(); ++k) {
    if (s[k] > tol) {
      inv[k] = 1.0 / s[k];
      ++out.rank;
    }
  }
  out.value = svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
  out.condition = s[s.size() - 1] > 0.0 ? s[0] / s[s.size() - 1] : std::numeric_limits<double>::infinity();
  return out;
}

}  // namespace greybox::detail
