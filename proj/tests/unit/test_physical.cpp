#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "fixtures.hpp"

using namespace greybox;

namespace {

std::string first_line(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::string s;
  std::getline(in, s);
  return s;
}

}  // namespace

TEST_SUITE("physical") {

TEST_CASE("logarithm of simple discrete systems") {
  auto model = GreyBoxModel::zeros({2, 1, 1, 0, 0}, 0.01, {});
  model.A.setIdentity();
  model.C << 1, 0;
  CHECK(to_continuous(model).A.norm() < 1e-14);

  auto scalar = GreyBoxModel::zeros({1, 1, 1, 0, 0}, 0.5, {});
  scalar.A(0, 0) = std::exp(-0.5);
  scalar.Bext(0, 0) = 1.0 - std::exp(-0.5);
  const auto c = to_continuous(scalar);
  CHECK(c.A(0, 0) == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(c.Bext(0, 0) == doctest::Approx(1.0).epsilon(1e-12));  // ZOH of xdot = -x + u

  scalar.A(0, 0) = -0.5;
  CHECK_THROWS_AS(to_continuous(scalar), NumericalError);
}

TEST_CASE("continuous and discrete conversions are inverse") {
  const auto cm = fixtures::duffing_continuous(68.58, 0.0468, 1.0 / std::pow(2 * M_PI * 68.58, 2), -0.256, 3.98,
                                               1.0 / 2441.0);
  const auto d = to_discrete(cm);
  const auto back = to_continuous(d);
  CHECK((back.A - cm.A).norm() < 1e-9 * cm.A.norm());
  CHECK((back.Bext - cm.Bext).norm() < 1e-9 * cm.Bext.norm());
  CHECK(back.C == cm.C);
  CHECK(back.Dext == cm.Dext);
  CHECK(d.Ts == cm.Ts);
}

TEST_CASE("modal parameters of a damped oscillator") {
  const auto cm = fixtures::duffing_continuous(68.58, 0.0468, 2.0, 0.0, 0.0, 1e-3);
  const auto m = modal_parameters(cm.A);
  REQUIRE(m.modes.size() == 1);
  CHECK(m.modes[0].frequency_hz == doctest::Approx(68.58).epsilon(1e-12));
  CHECK(m.modes[0].damping_ratio == doctest::Approx(0.0468).epsilon(1e-12));
  CHECK(m.modes[0].eigenvalue.imag() > 0.0);
  CHECK(m.real_eigenvalues.empty());

  const auto undamped = fixtures::duffing_continuous(10.0, 0.0, 1.0, 0.0, 0.0, 1e-3);
  CHECK(std::abs(modal_parameters(undamped.A).modes.at(0).damping_ratio) < 1e-14);
}

TEST_CASE("two-DOF modes against the eigenvalues of K") {
  Matrix K(2, 2);
  K << 2.0, -1.0, -1.0, 1.0;
  K *= 1e4;
  Matrix A = Matrix::Zero(4, 4);
  A.topRightCorner(2, 2).setIdentity();
  A.bottomLeftCorner(2, 2) = -K;
  const auto m = modal_parameters(A);
  REQUIRE(m.modes.size() == 2);
  const Vector ev = Eigen::SelfAdjointEigenSolver<Matrix>(K).eigenvalues();
  for (int i = 0; i < 2; ++i) CHECK(m.modes[i].frequency_hz == doctest::Approx(std::sqrt(ev[i]) / (2 * M_PI)).epsilon(1e-12));
  CHECK(m.modes[0].frequency_hz < m.modes[1].frequency_hz);
}

TEST_CASE("real eigenvalues are reported separately") {
  Matrix A(2, 2);
  A << -1.0, 0.0, 0.0, -2.0;
  const auto m = modal_parameters(A);
  CHECK(m.modes.empty());
  CHECK(m.real_eigenvalues.size() == 2);
}

TEST_CASE("exact Duffing state space gives the true coefficients") {
  const double M = 0.7;
  const auto cm = fixtures::duffing_continuous(40.0, 0.03, M, -0.256, 3.98, 1e-3);
  std::vector<int> lines;
  for (int k = 1; k <= 50; ++k) lines.push_back(k);
  const auto est = nonlinear_coefficients(cm, lines, 1000);
  REQUIRE(est.terms.size() == 2);
  CHECK(est.terms[0].label == "y1^2");
  CHECK(est.terms[0].average_real == doctest::Approx(-0.256).epsilon(1e-10));
  CHECK(est.terms[1].average_real == doctest::Approx(3.98).epsilon(1e-10));
  CHECK(est.terms[1].average_real > 0.0);  // hardening sign
  CHECK(est.terms[1].spread() < 1e-10);
  CHECK(est.terms[1].im_re_ratio < 1e-10);
  CHECK(est.freq_hz[9] == doctest::Approx(10.0));

  // the discrete route reproduces the same values
  const auto d = nonlinear_coefficients(to_discrete(cm), lines, 1000);
  CHECK(d.terms[1].values.isApprox(est.terms[1].values, 1e-8));
}

TEST_CASE("coefficients are invariant to state transformations") {
  const auto cm = fixtures::duffing_continuous(40.0, 0.03, 1.0, 0.5, 2.0, 1e-3);
  const auto d = to_discrete(cm);
  Matrix T(2, 2);
  T << 3.0, 1.0, -2.0, 0.5;
  const std::vector<int> lines = {5, 10, 40, 80};
  const auto a = nonlinear_coefficients(d, lines, 1000);
  const auto b = nonlinear_coefficients(transform_state(d, T), lines, 1000);
  for (int t = 0; t < 2; ++t) CHECK((a.terms[t].values - b.terms[t].values).norm() < 1e-8 * a.terms[t].values.norm());
}

TEST_CASE("linear models and invalid maps") {
  auto linear = GreyBoxModel::zeros({2, 1, 1, 0, 0}, 1e-3, {});
  linear.A = to_discrete(fixtures::duffing_continuous(10.0, 0.1, 1.0, 0, 0, 1e-3)).A;
  linear.Bext << 0.0, 1e-3;
  linear.C << 1.0, 0.0;
  CHECK(nonlinear_coefficients(linear, {1, 2}, 1000).terms.empty());
  const auto d = to_discrete(fixtures::duffing_continuous(10.0, 0.1, 1.0, 1.0, 1.0, 1e-3));
  CHECK_THROWS_AS(nonlinear_coefficients(d, {1}, 1000, {1, 0}), ConfigError);
  CHECK_THROWS_AS(nonlinear_coefficients(d, {1}, 1000, {0, 1}), ConfigError);
}

TEST_CASE("restoring force curve") {
  const auto basis = BasisSet::polynomial(0, {2, 3});
  Vector grid(3);
  grid << -1.0, 0.0, 2.0;
  const Vector f = restoring_force_curve({-0.5, 2.0}, basis, grid);
  CHECK(f[0] == doctest::Approx(-2.5));
  CHECK(f[1] == 0.0);
  CHECK(f[2] == doctest::Approx(14.0));
  BasisSet mixed = basis;
  mixed.terms.push_back({1, BasisSignal::displacement, 2, std::nullopt});
  CHECK_THROWS_AS(restoring_force_curve({1, 1, 1}, mixed, grid), ConfigError);
  BasisSet vel = basis;
  vel.terms[0].signal = BasisSignal::velocity;
  CHECK_THROWS_AS(restoring_force_curve({1, 1}, vel, grid), ConfigError);
  CHECK_THROWS(restoring_force_curve({1}, basis, grid));
}

TEST_CASE("report and CSV outputs") {
  const auto cm = fixtures::duffing_continuous(40.0, 0.03, 1.0, 0.5, 2.0, 1e-3);
  const auto modes = modal_parameters(cm.A);
  const auto coeffs = nonlinear_coefficients(cm, {1, 2, 3}, 1000);
  const auto report = physical_report(modes, coeffs);
  CHECK(report.contains("modes"));
  CHECK(report.contains("coefficients"));

  const auto dir = std::filesystem::temp_directory_path() / "greybox_physical";
  write_coefficients_csv(dir / "c.csv", coeffs);
  CHECK(first_line(dir / "c.csv") == "freq_hz,term,re,im");
  Vector grid = Vector::LinSpaced(5, -1, 1);
  write_force_curve_csv(dir / "f.csv", grid, restoring_force_curve({0.5, 2.0}, cm.basis, grid));
  CHECK(first_line(dir / "f.csv") == "y,f");
}

}  // TEST_SUITE
