#pragma once

#include "greybox/model.hpp"

namespace greybox::fft {

/// Half spectrum (bins 0..N/2) of a real sequence, unnormalised:
/// X[k] = sum_n x[n] exp(-j 2 pi k n / N).
CVector forward(const Vector& x);

/// Real sequence of length n from its half spectrum (bins 0..n/2), inverse of
/// forward() including the 1/n factor. Bins beyond the supplied ones are zero.
Vector inverse(const CVector& half, int n);

}  // namespace greybox::fft
