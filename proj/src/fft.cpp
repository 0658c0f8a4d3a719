#include "greybox/fft.hpp"

#include <complex>
#include <memory>

#include <fftw3.h>

namespace greybox::fft {

namespace {

struct PlanDeleter {
  void operator()(fftw_plan_s* p) const { fftw_destroy_plan(p); }
};
using Plan = std::unique_ptr<fftw_plan_s, PlanDeleter>;

struct FftwBuffer {
  explicit FftwBuffer(std::size_t bytes) : ptr(fftw_malloc(bytes)) {}
  ~FftwBuffer() { fftw_free(ptr); }
  FftwBuffer(const FftwBuffer&) = delete;
  FftwBuffer& operator=(const FftwBuffer&) = delete;
  void* ptr;
};

}  // namespace

CVector forward(const Vector& x) {
  const int n = static_cast<int>(x.size());
  if (n == 0) return {};
  FftwBuffer in(sizeof(double) * n);
  FftwBuffer out(sizeof(fftw_complex) * (n / 2 + 1));
  auto* src = static_cast<double*>(in.ptr);
  auto* dst = static_cast<fftw_complex*>(out.ptr);
  Plan plan(fftw_plan_dft_r2c_1d(n, src, dst, FFTW_ESTIMATE));
  std::copy(x.data(), x.data() + n, src);
  fftw_execute(plan.get());
  CVector X(n / 2 + 1);
  for (int k = 0; k <= n / 2; ++k) X[k] = {dst[k][0], dst[k][1]};
  return X;
}

Vector inverse(const CVector& half, int n) {
  if (n == 0) return {};
  const int bins = n / 2 + 1;
  FftwBuffer in(sizeof(fftw_complex) * bins);
  FftwBuffer out(sizeof(double) * n);
  auto* src = static_cast<fftw_complex*>(in.ptr);
  auto* dst = static_cast<double*>(out.ptr);
  Plan plan(fftw_plan_dft_c2r_1d(n, src, dst, FFTW_ESTIMATE));
  for (int k = 0; k < bins; ++k) {
    const std::complex<double> v = k < half.size() ? half[k] : std::complex<double>{};
    src[k][0] = v.real();
    src[k][1] = v.imag();
  }
  fftw_execute(plan.get());
  Vector x(n);
  for (int i = 0; i < n; ++i) x[i] = dst[i] / n;
  return x;
}

}  // namespace greybox::fft
