#include "greybox/signals.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "greybox/fft.hpp"

namespace greybox {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
}

void TimeRecord::validate() const {
  if (!(fs > 0.0)) throw DimensionError("time record: fs must be positive");
  if (N <= 0 || P <= 0) throw DimensionError("time record: N and P must be positive");
  if (u.cols() != static_cast<Eigen::Index>(N) * P || y.cols() != u.cols()) {
    throw DimensionError("time record: sample count must equal N * P for both u and y");
  }
  if (u.rows() < 1 || y.rows() < 1) throw DimensionError("time record: needs at least one input and output");
}

int PeriodRange::resolve_count(int total_periods) const {
  const int n = count < 0 ? total_periods - first : count;
  if (first < 0 || n < 1 || first + n > total_periods) {
    throw DimensionError("period range [" + std::to_string(first) + ", " +
                         std::to_string(first + n) + ") outside 0.." + std::to_string(total_periods));
  }
  return n;
}

std::vector<int> ExcitedBand::lines() const {
  std::vector<int> out;
  for (int k = k_min; k <= k_max; ++k) {
    if (std::find(excluded.begin(), excluded.end(), k) == excluded.end()) out.push_back(k);
  }
  return out;
}

void ExcitedBand::validate(int N) const {
  if (k_min < 1 || k_max < k_min || 2 * k_max >= N) {
    throw DimensionError("band: require 1 <= k_min <= k_max < N/2 (k_min=" + std::to_string(k_min) +
                         ", k_max=" + std::to_string(k_max) + ", N=" + std::to_string(N) + ")");
  }
  if (lines().empty()) throw DimensionError("band: every line is excluded");
}

ExcitedBand ExcitedBand::from_hz(double f_lo, double f_hi, double fs, int N) {
  const double df = fs / N;
  ExcitedBand band;
  band.k_min = std::max(1, static_cast<int>(std::ceil(f_lo / df - 1e-9)));
  band.k_max = static_cast<int>(std::floor(f_hi / df + 1e-9));
  if (2 * band.k_max >= N) band.k_max = (N - 1) / 2;
  band.validate(N);
  return band;
}

Vector Multisine::period() const {
  CVector half = CVector::Zero(N / 2 + 1);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    half[lines[i]] = std::polar(0.5 * amplitude * N, phases[static_cast<Eigen::Index>(i)]);
  }
  return fft::inverse(half, N);
}

double Multisine::at(double t) const {
  double v = 0.0;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    v += std::cos(kTwoPi * lines[i] * fs * t / N + phases[static_cast<Eigen::Index>(i)]);
  }
  return amplitude * v;
}

Multisine design_multisine(const ExcitedBand& band, double fs, int N, double rms_target,
                           std::uint64_t seed) {
  band.validate(N);
  if (!(rms_target > 0.0)) throw DimensionError("multisine: rms must be positive");
  Multisine ms;
  ms.N = N;
  ms.fs = fs;
  ms.lines = band.lines();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> phase(0.0, kTwoPi);
  ms.phases.resize(static_cast<Eigen::Index>(ms.lines.size()));
  for (auto& p : ms.phases) p = phase(rng);
  // sum of F unit cosines below Nyquist has RMS sqrt(F/2)
  ms.amplitude = rms_target * std::sqrt(2.0 / static_cast<double>(ms.lines.size()));
  const double actual = rms(ms.period());
  ms.amplitude *= rms_target / actual;
  return ms;
}

Vector generate_multisine(const ExcitedBand& band, double fs, int N, double rms_target,
                          std::uint64_t seed) {
  return design_multisine(band, fs, N, rms_target, seed).period();
}

CVector z_values(const std::vector<int>& lines, int N) {
  CVector z(static_cast<Eigen::Index>(lines.size()));
  for (std::size_t i = 0; i < lines.size(); ++i) {
    z[static_cast<Eigen::Index>(i)] = std::polar(1.0, kTwoPi * lines[i] / N);
  }
  return z;
}

CVector dft_period(const Vector& x) {
  return fft::forward(x) / static_cast<double>(x.size());
}

Vector idft_period(const CVector& half, int N) {
  return fft::inverse(half * static_cast<double>(N), N);
}

Matrix mean_period(const Matrix& x, int N, PeriodRange range) {
  if (N <= 0 || x.cols() % N != 0) throw DimensionError("mean_period: length not a multiple of N");
  const int P = static_cast<int>(x.cols() / N);
  const int count = range.resolve_count(P);
  Matrix mean = Matrix::Zero(x.rows(), N);
  for (int p = range.first; p < range.first + count; ++p) {
    mean += x.middleCols(static_cast<Eigen::Index>(p) * N, N);
  }
  return mean / count;
}

SpectrumSet dft(const Matrix& x, int N, const std::vector<int>& lines, PeriodRange range) {
  for (int k : lines) {
    if (k < 0 || 2 * k > N) throw DimensionError("dft: line " + std::to_string(k) + " outside 0..N/2");
  }
  const Matrix avg = mean_period(x, N, range);
  SpectrumSet out;
  out.N = N;
  out.lines = lines;
  out.values.resize(x.rows(), static_cast<Eigen::Index>(lines.size()));
  for (Eigen::Index c = 0; c < x.rows(); ++c) {
    const CVector X = dft_period(avg.row(c).transpose());
    for (std::size_t i = 0; i < lines.size(); ++i) out.values(c, static_cast<Eigen::Index>(i)) = X[lines[i]];
  }
  out.z = z_values(lines, N);
  return out;
}

RecordSpectra dft(const TimeRecord& record, const std::vector<int>& lines, PeriodRange range) {
  record.validate();
  return {dft(record.u, record.N, lines, range), dft(record.y, record.N, lines, range)};
}

NoiseModel noise_variance(const TimeRecord& record, const std::vector<int>& lines, PeriodRange range) {
  record.validate();
  const int count = range.resolve_count(record.P);
  if (count < 2) throw DimensionError("noise_variance: needs at least 2 periods");
  const auto F = static_cast<Eigen::Index>(lines.size());
  NoiseModel noise;
  noise.lines = lines;
  noise.variance = Matrix::Zero(record.outputs(), F);
  for (Eigen::Index c = 0; c < record.outputs(); ++c) {
    CMatrix per_period(count, F);
    for (int p = 0; p < count; ++p) {
      const Vector seg = record.y.row(c).segment(static_cast<Eigen::Index>(range.first + p) * record.N, record.N).transpose();
      const CVector X = dft_period(seg);
      for (Eigen::Index i = 0; i < F; ++i) per_period(p, i) = X[lines[i]];
    }
    const CVector mean = per_period.colwise().mean().transpose();
    for (Eigen::Index i = 0; i < F; ++i) {
      double ss = 0.0;
      for (int p = 0; p < count; ++p) ss += std::norm(per_period(p, i) - mean[i]);
      noise.variance(c, i) = ss / (count - 1) / count;
    }
  }
  return noise;
}

FrfEstimate estimate_frf(const SpectrumSet& U, const SpectrumSet& Y, double threshold) {
  if (U.channels() != 1) throw DimensionError("estimate_frf: expects a single input channel");
  if (U.lines != Y.lines) throw DimensionError("estimate_frf: input and output lines differ");
  FrfEstimate frf;
  frf.lines = U.lines;
  frf.H.resize(Y.channels(), U.size());
  frf.flagged.assign(U.lines.size(), false);
  const double umax = U.values.cwiseAbs().maxCoeff();
  for (int k = 0; k < U.size(); ++k) {
    const auto u = U.values(0, k);
    if (std::abs(u) <= threshold * umax) frf.flagged[k] = true;
    frf.H.col(k) = Y.values.col(k) / u;
  }
  return frf;
}

Matrix spectral_derivative(const Matrix& period, double fs) {
  const int N = static_cast<int>(period.cols());
  Matrix out(period.rows(), N);
  for (Eigen::Index c = 0; c < period.rows(); ++c) {
    CVector X = fft::forward(period.row(c).transpose());
    for (int k = 0; k <= N / 2; ++k) {
      X[k] *= std::complex<double>(0.0, kTwoPi * k * fs / N);
    }
    if (N % 2 == 0) X[N / 2] = 0.0;
    out.row(c) = fft::inverse(X, N).transpose();
  }
  return out;
}

double rms(const Matrix& x) {
  if (x.size() == 0) return 0.0;
  return std::sqrt(x.squaredNorm() / static_cast<double>(x.size()));
}

}  // namespace greybox
