#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "fixtures.hpp"
#include "greybox/record_io.hpp"

using namespace greybox;

namespace {

TimeRecord periodic_record(const Matrix& u_period, const Matrix& y_period, int P, double fs) {
  TimeRecord r;
  r.fs = fs;
  r.N = static_cast<int>(u_period.cols());
  r.P = P;
  r.u = tile_periods(u_period, P);
  r.y = tile_periods(y_period, P);
  return r;
}

}  // namespace

TEST_SUITE("signals") {

TEST_CASE("single-line multisine has amplitude sqrt(2) rms") {
  const int N = 64;
  const Vector x = generate_multisine({5, 5, {}}, 1.0, N, 1.0, 1);
  const CVector X = dft_period(x);
  CHECK(2.0 * std::abs(X[5]) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
  CHECK(rms(x) == doctest::Approx(1.0).epsilon(1e-12));
  for (int k = 0; k <= N / 2; ++k)
    if (k != 5) CHECK(std::abs(X[k]) < 1e-12);
}

TEST_CASE("0-300 Hz band at fs 2441, N 8192 is flat on lines 1..1006") {
  const auto band = ExcitedBand::from_hz(0.0, 300.0, 2441.0, 8192);
  const auto lines = band.lines();
  REQUIRE(!lines.empty());
  CHECK(lines.front() == 1);
  CHECK(lines.back() == 1006);
  const Vector x = generate_multisine(band, 2441.0, 8192, 0.1, 42);
  CHECK(rms(x) == doctest::Approx(0.1).epsilon(1e-12));
  const CVector X = dft_period(x);
  const double a = std::abs(X[1]);
  for (int k : lines) CHECK(std::abs(X[k]) == doctest::Approx(a).epsilon(1e-9));
  CHECK(std::abs(X[0]) < 1e-14);
  CHECK(std::abs(X[1007]) < 1e-12);
}

TEST_CASE("multisine generation is deterministic per seed") {
  const ExcitedBand band{1, 50, {}};
  CHECK(generate_multisine(band, 100.0, 256, 1.0, 9) == generate_multisine(band, 100.0, 256, 1.0, 9));
  CHECK(generate_multisine(band, 100.0, 256, 1.0, 9) != generate_multisine(band, 100.0, 256, 1.0, 10));
}

TEST_CASE("excluded lines carry no energy") {
  const ExcitedBand band{1, 20, {4, 7}};
  const auto lines = band.lines();
  CHECK(std::find(lines.begin(), lines.end(), 4) == lines.end());
  const CVector X = dft_period(generate_multisine(band, 1.0, 128, 1.0, 3));
  CHECK(std::abs(X[4]) < 1e-12);
  CHECK(std::abs(X[7]) < 1e-12);
  CHECK_THROWS_AS(ExcitedBand({1, 80, {}}).validate(128), DimensionError);
}

TEST_CASE("continuous evaluation matches the sampled period") {
  const auto ms = design_multisine({1, 30, {}}, 200.0, 128, 0.5, 4);
  const Vector p = ms.period();
  for (int n : {0, 17, 127}) CHECK(ms.at(n / 200.0) == doctest::Approx(p[n]).epsilon(1e-10));
}

TEST_CASE("DFT scaling: cosine gives 1/2, constant gives DC only") {
  const int N = 100;
  Vector c(N), d = Vector::Constant(N, 3.0);
  for (int n = 0; n < N; ++n) c[n] = std::cos(2 * M_PI * 7 * n / N);
  const CVector C = dft_period(c), D = dft_period(d);
  CHECK(std::abs(C[7] - 0.5) < 1e-14);
  CHECK(std::abs(D[0] - 3.0) < 1e-14);
  for (int k = 1; k <= N / 2; ++k) CHECK(std::abs(D[k]) < 1e-14);
}

TEST_CASE("DFT round trip and Parseval") {
  std::mt19937_64 rng(1);
  for (int N : {64, 99, 1024}) {
    const Vector x = fixtures::random_matrix(rng, N, 1);
    const CVector X = dft_period(x);
    CHECK((idft_period(X, N) - x).cwiseAbs().maxCoeff() < 1e-10);
    // sum |x|^2 / N = |X0|^2 + 2 sum |Xk|^2 (+ |X_{N/2}|^2 for even N)
    double energy = std::norm(X[0]);
    for (int k = 1; k < (N + 1) / 2; ++k) energy += 2.0 * std::norm(X[k]);
    if (N % 2 == 0) energy += std::norm(X[N / 2]);
    CHECK(energy == doctest::Approx(x.squaredNorm() / N).epsilon(1e-12));
  }
}

TEST_CASE("spectra use z = exp(+j 2 pi k / N)") {
  const auto z = z_values({0, 4}, 16);
  CHECK(std::abs(z[0] - 1.0) < 1e-15);
  CHECK(std::abs(z[1] - std::complex<double>(0.0, 1.0)) < 1e-15);
}

TEST_CASE("mean period and line selection") {
  Matrix x(1, 8);
  x << 1, 2, 3, 4, 3, 4, 5, 6;
  const Matrix m = mean_period(x, 4);
  CHECK(m(0, 0) == 2.0);
  CHECK(m(0, 3) == 5.0);
  CHECK(mean_period(x, 4, {1, 1})(0, 0) == 3.0);
  CHECK_THROWS_AS(mean_period(x, 3), DimensionError);
  CHECK_THROWS_AS(dft(x, 4, {3}), DimensionError);
}

TEST_CASE("noise variance matches sigma^2 / (N P) on white noise") {
  const int N = 128, P = 8, trials = 100;
  const double sigma = 0.3;
  const std::vector<int> lines = [] {
    std::vector<int> v;
    for (int k = 1; k < 64; ++k) v.push_back(k);
    return v;
  }();
  std::mt19937_64 rng(77);
  double sum = 0.0;
  for (int t = 0; t < trials; ++t) {
    TimeRecord r;
    r.fs = 1.0; r.N = N; r.P = P;
    r.u = Matrix::Zero(1, N * P);
    r.y = fixtures::random_matrix(rng, 1, N * P, sigma);
    sum += noise_variance(r, lines).variance.mean();
  }
  const double expected = sigma * sigma / (N * P);
  CHECK(sum / trials == doctest::Approx(expected).epsilon(0.1));
}

TEST_CASE("noise variance ignores the periodic part") {
  std::mt19937_64 rng(78);
  const int N = 64, P = 5;
  const Matrix u = fixtures::multisine_input(1, N, 20, 1.0, 2);
  TimeRecord clean = periodic_record(u, u, P, 1.0);
  std::vector<int> lines;
  for (int k = 1; k < 32; ++k) lines.push_back(k);
  CHECK(noise_variance(clean, lines).variance.cwiseAbs().maxCoeff() < 1e-28);

  TimeRecord noisy = clean;
  noisy.y = fixtures::random_matrix(rng, 1, N * P, 0.1);
  const Matrix v1 = noise_variance(noisy, lines).variance;
  noisy.y += clean.y;
  const Matrix v2 = noise_variance(noisy, lines).variance;
  CHECK((v1 - v2).cwiseAbs().maxCoeff() < 1e-12 * v1.maxCoeff());
  TimeRecord one = clean;
  one.P = 1;
  one.u = u;
  one.y = u;
  CHECK_THROWS_AS(noise_variance(one, lines), DimensionError);
}

TEST_CASE("FRF of a scaled output is the scale") {
  const int N = 64;
  const Matrix u = fixtures::multisine_input(1, N, 20, 1.0, 5);
  const auto rec = periodic_record(u, 2.0 * u, 2, 1.0);
  std::vector<int> lines;
  for (int k = 1; k <= 20; ++k) lines.push_back(k);
  const auto spectra = dft(rec, lines);
  const auto frf = estimate_frf(spectra.U, spectra.Y);
  CHECK((frf.H.array() - 2.0).abs().maxCoeff() < 1e-12);
  CHECK(std::none_of(frf.flagged.begin(), frf.flagged.end(), [](bool b) { return b; }));
}

TEST_CASE("FRF of a linear discrete model equals G(z_k)") {
  std::mt19937_64 rng(6);
  fixtures::RandomModelOptions o;
  o.n_s = 3; o.l = 2;
  const auto model = fixtures::random_model(rng, o);
  const int N = 128;
  const Matrix u = fixtures::multisine_input(1, N, 50, 1.0, 7);
  const auto ss = run_to_steady_state(model, u, 4, 2);
  std::vector<int> lines;
  for (int k = 1; k <= 50; ++k) lines.push_back(k);
  const auto spectra = dft(ss.record, lines);
  const auto frf = estimate_frf(spectra.U, spectra.Y);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const CMatrix G = transfer_matrix(model, spectra.U.z[static_cast<Eigen::Index>(i)]);
    CHECK((frf.H.col(static_cast<Eigen::Index>(i)) - G.col(0)).norm() < 1e-8 * G.norm());
  }
}

TEST_CASE("FRF flags lines without excitation") {
  SpectrumSet U, Y;
  U.lines = Y.lines = {1, 2};
  U.values = CMatrix(1, 2);
  U.values << 1.0, 0.0;
  Y.values = CMatrix::Ones(1, 2);
  const auto frf = estimate_frf(U, Y);
  CHECK_FALSE(frf.flagged[0]);
  CHECK(frf.flagged[1]);
}

TEST_CASE("spectral derivative of a sine") {
  const int N = 256;
  const double fs = 100.0, f = 5.0 * fs / N;
  Matrix x(1, N), dx(1, N);
  for (int n = 0; n < N; ++n) {
    x(0, n) = std::sin(2 * M_PI * f * n / fs);
    dx(0, n) = 2 * M_PI * f * std::cos(2 * M_PI * f * n / fs);
  }
  CHECK((spectral_derivative(x, fs) - dx).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("record CSV round trip") {
  std::mt19937_64 rng(4);
  TimeRecord r;
  r.fs = 2441.0; r.N = 16; r.P = 3;
  r.u = fixtures::random_matrix(rng, 1, 48);
  r.y = fixtures::random_matrix(rng, 2, 48);
  const auto dir = std::filesystem::temp_directory_path() / "greybox_record_io";
  std::filesystem::create_directories(dir);
  write_record_csv(dir / "r.csv", r);
  CHECK(std::filesystem::exists(sidecar_path(dir / "r.csv")));
  const auto back = read_record_csv(dir / "r.csv");
  CHECK(back.fs == r.fs);
  CHECK(back.N == r.N);
  CHECK(back.P == r.P);
  CHECK(back.u == r.u);
  CHECK(back.y == r.y);
}

TEST_CASE("record CSV errors name the offending line") {
  TimeRecord r;
  r.fs = 10.0; r.N = 2; r.P = 2;
  r.u = Matrix::Ones(1, 4);
  r.y = Matrix::Ones(1, 4);
  const auto dir = std::filesystem::temp_directory_path() / "greybox_record_io";
  std::filesystem::create_directories(dir);
  write_record_csv(dir / "bad.csv", r);
  {
    std::ifstream in(dir / "bad.csv");
    std::stringstream all;
    all << in.rdbuf();
    std::string text = all.str();
    const auto third = text.find('\n', text.find('\n', text.find('\n') + 1) + 1);
    text.insert(third + 1, "0.2,abc,1\n");
    std::ofstream(dir / "bad.csv") << text;
  }
  try {
    read_record_csv(dir / "bad.csv");
    FAIL("expected an error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find(":4:") != std::string::npos);
  }
}

}  // TEST_SUITE
