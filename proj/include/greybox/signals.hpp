#pragma once

#include <cstdint>
#include <vector>

#include "greybox/model.hpp"

namespace greybox {

/// Multi-period sampled input/output data. Samples are stored channel-major:
/// u is m x (N P), y is l x (N P).
struct TimeRecord {
  double fs = 1.0;
  int N = 0;
  int P = 0;
  Matrix u;
  Matrix y;

  int inputs() const { return static_cast<int>(u.rows()); }
  int outputs() const { return static_cast<int>(y.rows()); }
  Eigen::Index samples() const { return u.cols(); }
  void validate() const;
};

/// Consecutive periods [first, first + count). count < 0 means "to the end".
struct PeriodRange {
  int first = 0;
  int count = -1;

  int resolve_count(int total_periods) const;
};

/// Excited DFT lines k_min..k_max minus explicit exclusions. DC is never
/// part of a band.
struct ExcitedBand {
  int k_min = 1;
  int k_max = 1;
  std::vector<int> excluded;

  std::vector<int> lines() const;
  void validate(int N) const;
  /// Lines inside [f_lo, f_hi] Hz at resolution fs/N, DC excluded.
  static ExcitedBand from_hz(double f_lo, double f_hi, double fs, int N);
};

/// DFT values on a selected set of lines, with z_k = exp(+j 2 pi k / N).
struct SpectrumSet {
  int N = 0;
  std::vector<int> lines;
  CMatrix values;  // channels x F
  CVector z;

  int size() const { return static_cast<int>(lines.size()); }
  int channels() const { return static_cast<int>(values.rows()); }
};

struct NoiseModel {
  std::vector<int> lines;
  Matrix variance;  // channels x F, variance of the period-averaged spectrum
};

/// Random-phase multisine with a flat amplitude spectrum.
struct Multisine {
  int N = 0;
  double fs = 1.0;
  std::vector<int> lines;
  double amplitude = 0.0;
  Vector phases;

  /// One period, length N.
  Vector period() const;
  /// Continuous-time value at t seconds.
  double at(double t) const;
};

Multisine design_multisine(const ExcitedBand& band, double fs, int N, double rms,
                           std::uint64_t seed);
/// One period of a random-phase multisine whose period RMS equals rms.
Vector generate_multisine(const ExcitedBand& band, double fs, int N, double rms,
                          std::uint64_t seed);

CVector z_values(const std::vector<int>& lines, int N);

/// Bins 0..N/2 of X(k) = (1/N) sum_n x(n) exp(-j 2 pi k n / N).
CVector dft_period(const Vector& x);
/// Inverse of dft_period.
Vector idft_period(const CVector& half, int N);

/// Average of the selected periods of each row (channels x N).
Matrix mean_period(const Matrix& x, int N, PeriodRange range = {});

/// Spectra of the selected periods, averaged, restricted to lines.
SpectrumSet dft(const Matrix& x, int N, const std::vector<int>& lines, PeriodRange range = {});

struct RecordSpectra {
  SpectrumSet U;
  SpectrumSet Y;
};
RecordSpectra dft(const TimeRecord& record, const std::vector<int>& lines, PeriodRange range = {});

/// Per-line variance of the period-averaged output spectrum:
/// sample variance across periods divided by the number of periods.
NoiseModel noise_variance(const TimeRecord& record, const std::vector<int>& lines,
                          PeriodRange range = {});

struct FrfEstimate {
  std::vector<int> lines;
  CMatrix H;                   // l x F
  std::vector<bool> flagged;   // |U(k)| below threshold * max |U|
};

/// Y(k) / U(k) per output channel for a single-input record.
FrfEstimate estimate_frf(const SpectrumSet& U, const SpectrumSet& Y, double threshold = 1e-10);

/// Time derivative of one periodic period per row, computed by multiplying
/// every DFT bin by j omega_k. The Nyquist bin is dropped.
Matrix spectral_derivative(const Matrix& period, double fs);

/// Root mean square over all entries.
double rms(const Matrix& x);

}  // namespace greybox
