#include "greybox/simulate.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/LU>

#include "greybox/fft.hpp"

namespace greybox {

const char* to_string(SimStatus status) {
  switch (status) {
    case SimStatus::ok: return "ok";
    case SimStatus::diverged: return "diverged";
    case SimStatus::implicit_failure: return "implicit_failure";
  }
  return "unknown";
}

Matrix tile_periods(const Matrix& period, int P) {
  Matrix out(period.rows(), period.cols() * P);
  for (int p = 0; p < P; ++p) out.middleCols(p * period.cols(), period.cols()) = period;
  return out;
}

namespace {

struct BasisEvaluator {
  const BasisSet& basis;

  void value(const Vector& y, const Vector& ydot, Eigen::Ref<Vector> g) const {
    for (int a = 0; a < basis.size(); ++a) {
      const auto& t = basis.terms[a];
      g[a] = t.value(t.signal == BasisSignal::velocity ? ydot[t.channel] : y[t.channel]);
    }
  }
};

}  // namespace

SimulationOutput simulate_discrete(const GreyBoxModel& model, const Matrix& u, const Vector& x0,
                                   const SimulationOptions& options) {
  model.validate();
  const auto& d = model.dims;
  if (u.rows() != d.m) throw DimensionError("simulate_discrete: input has wrong number of rows");
  if (x0.size() != d.n_s) throw DimensionError("simulate_discrete: x0 has wrong size");
  if (!u.allFinite() || !x0.allFinite()) throw DimensionError("simulate_discrete: non-finite input");

  const Eigen::Index T = u.cols();
  const bool velocity = model.basis.has_velocity_terms();
  const bool implicit = model.implicit_output();
  const Matrix B = model.B();
  const Matrix E = model.E();
  const Matrix D = model.D();
  const Matrix Fm = model.F();
  BasisEvaluator eval{model.basis};

  SimulationOutput out;
  out.x.resize(d.n_s, T);
  out.y.resize(d.l, T);
  out.g.resize(d.s, T);
  if (velocity) out.ydot.resize(d.l, T);
  if (implicit) out.implicit_iterations.assign(static_cast<std::size_t>(T), 0);

  Vector x = x0;
  Vector y_lin(d.l), y(d.l), y_prev(d.l), ydot = Vector::Zero(d.l), g(d.s), y_next(d.l);
  const double inv_ts = 1.0 / model.Ts;

  for (Eigen::Index t = 0; t < T; ++t) {
    out.x.col(t) = x;
    y_lin.noalias() = model.C * x;
    y_lin.noalias() += D * u.col(t);

    if (!implicit) {
      // F is zero on the nl rows, so y_nl = y_lin there
      if (velocity) ydot = t == 0 ? Vector::Zero(d.l) : Vector((y_lin - y_prev) * inv_ts);
      eval.value(y_lin, ydot, g);
      y = y_lin;
      if (d.s > 0) y.noalias() += Fm * g;
    } else {
      y = y_lin;
      double alpha = 1.0;
      double last_step = std::numeric_limits<double>::infinity();
      int it = 0;
      bool converged = false;
      for (; it < options.implicit_max_iter; ++it) {
        if (velocity) ydot = t == 0 ? Vector::Zero(d.l) : Vector((y - y_prev) * inv_ts);
        eval.value(y, ydot, g);
        y_next = y_lin;
        y_next.noalias() += Fm * g;
        const double step = (y_next - y).norm();
        if (!std::isfinite(step)) break;
        if (step > last_step) alpha *= 0.5;
        last_step = step;
        y += alpha * (y_next - y);
        if (step <= options.implicit_tol * (1.0 + y.norm())) {
          converged = true;
          break;
        }
      }
      out.implicit_iterations[static_cast<std::size_t>(t)] = it + 1;
      if (!converged) {
        out.status = SimStatus::implicit_failure;
        out.first_bad = t;
        return out;
      }
      if (velocity) ydot = t == 0 ? Vector::Zero(d.l) : Vector((y - y_prev) * inv_ts);
      eval.value(y, ydot, g);
    }

    out.y.col(t) = y;
    out.g.col(t) = g;
    if (velocity) out.ydot.col(t) = ydot;
    y_prev = y;

    Vector x_next = model.A * x;
    x_next.noalias() += B * u.col(t);
    if (d.s > 0) x_next.noalias() += E * g;
    const double norm = x_next.norm();
    if (!std::isfinite(norm) || norm > options.divergence_bound || !y.allFinite()) {
      out.status = SimStatus::diverged;
      out.first_bad = t + 1;
      return out;
    }
    x = x_next;
  }
  return out;
}

std::vector<int> PhysicalSystem::outputs() const {
  if (!output_dofs.empty()) return output_dofs;
  std::vector<int> all(static_cast<std::size_t>(dofs()));
  for (int i = 0; i < dofs(); ++i) all[static_cast<std::size_t>(i)] = i;
  return all;
}

void PhysicalSystem::validate() const {
  const auto n = M.rows();
  if (n < 1 || M.cols() != n || Cv.rows() != n || Cv.cols() != n || K.rows() != n || K.cols() != n) {
    throw DimensionError("physical system: M, Cv, K must be square and of equal size");
  }
  if (input_map.rows() != n || input_map.cols() < 1) {
    throw DimensionError("physical system: input map must be n_p x m");
  }
  for (const auto& f : nonlinear) {
    if (f.term.channel < 0 || f.term.channel >= n) {
      throw DimensionError("physical system: nonlinear term reads a DOF out of range");
    }
    if (f.location.size() != 0 && f.location.size() != n) {
      throw DimensionError("physical system: nonlinear force location has wrong size");
    }
  }
  for (int dof : output_dofs) {
    if (dof < 0 || dof >= n) throw DimensionError("physical system: output DOF out of range");
  }
  Eigen::FullPivLU<Matrix> lu(M);
  if (!lu.isInvertible()) throw NumericalError("physical system: mass matrix is singular");
}

PhysicalSystem PhysicalSystem::sdof(double f_n, double zeta, double stiffness,
                                    const std::vector<std::pair<int, double>>& polynomial) {
  const double wn = 2.0 * std::numbers::pi * f_n;
  const double mass = stiffness / (wn * wn);
  PhysicalSystem sys;
  sys.M = Matrix::Constant(1, 1, mass);
  sys.K = Matrix::Constant(1, 1, stiffness);
  sys.Cv = Matrix::Constant(1, 1, 2.0 * zeta * wn * mass);
  sys.input_map = Matrix::Ones(1, 1);
  for (const auto& [p, c] : polynomial) {
    sys.nonlinear.push_back({c, BasisTerm{0, BasisSignal::displacement, p, std::nullopt}, Vector()});
  }
  return sys;
}

namespace {

/// Input samples on a grid `factor` times finer than the period, using the
/// periodic trigonometric interpolant.
Matrix upsample_periodic(const Matrix& period, int factor) {
  const int N = static_cast<int>(period.cols());
  const int n_fine = N * factor;
  Matrix fine(period.rows(), n_fine);
  for (Eigen::Index r = 0; r < period.rows(); ++r) {
    CVector X = fft::forward(period.row(r).transpose()) * static_cast<double>(factor);
    if (N % 2 == 0) X[N / 2] *= 0.5;
    fine.row(r) = fft::inverse(X, n_fine).transpose();
  }
  return fine;
}

}  // namespace

NewtonResult simulate_newton(const PhysicalSystem& system, const Matrix& u_period, int P, double fs,
                             const NewtonOptions& options) {
  system.validate();
  if (u_period.rows() != system.inputs()) throw DimensionError("simulate_newton: input rows differ from m");
  if (P < 1 || u_period.cols() < 1) throw DimensionError("simulate_newton: empty input");
  if (options.decimation < 1) throw DimensionError("simulate_newton: decimation must be >= 1");
  if (!u_period.allFinite()) throw DimensionError("simulate_newton: non-finite input");

  const int n = system.dofs();
  const int N = static_cast<int>(u_period.cols());
  const int dec = options.decimation;
  const double h = 1.0 / (fs * dec);
  const Matrix Minv = system.M.fullPivLu().inverse();
  const Matrix force_in = Minv * system.input_map;
  const Matrix damp = Minv * system.Cv;
  const Matrix stiff = Minv * system.K;
  Matrix nl_dir(n, static_cast<Eigen::Index>(system.nonlinear.size()));
  for (std::size_t a = 0; a < system.nonlinear.size(); ++a) {
    const auto& f = system.nonlinear[a];
    Vector loc = f.location.size() ? f.location : Vector(Vector::Unit(n, f.term.channel));
    nl_dir.col(static_cast<Eigen::Index>(a)) = Minv * loc * f.coefficient;
  }

  const bool band_limited = options.hold == InputHold::band_limited;
  const int factor = 2 * dec;
  const Matrix fine = band_limited ? upsample_periodic(u_period, factor) : Matrix();
  const Eigen::Index n_fine = static_cast<Eigen::Index>(N) * factor;

  const auto out_dofs = system.outputs();
  const int l = static_cast<int>(out_dofs.size()) * (options.velocity_outputs ? 2 : 1);
  NewtonResult result;
  auto& rec = result.record;
  rec.fs = fs;
  rec.N = N;
  rec.P = P;
  rec.u = tile_periods(u_period, P);
  rec.y = Matrix::Zero(l, static_cast<Eigen::Index>(N) * P);

  Vector q = Vector::Zero(n), v = Vector::Zero(n);
  Vector gvals(static_cast<Eigen::Index>(system.nonlinear.size()));
  auto accel = [&](const Vector& qq, const Vector& vv, const Vector& uu) {
    for (std::size_t a = 0; a < system.nonlinear.size(); ++a) {
      const auto& t = system.nonlinear[a].term;
      gvals[static_cast<Eigen::Index>(a)] = t.value(t.signal == BasisSignal::velocity ? vv[t.channel] : qq[t.channel]);
    }
    Vector acc = force_in * uu - damp * vv - stiff * qq;
    if (gvals.size()) acc.noalias() -= nl_dir * gvals;
    return acc;
  };

  Vector u0(system.inputs()), uh(system.inputs()), u1(system.inputs());
  const Eigen::Index total = static_cast<Eigen::Index>(N) * P;
  for (Eigen::Index s = 0; s < total; ++s) {
    for (std::size_t i = 0; i < out_dofs.size(); ++i) {
      rec.y(static_cast<Eigen::Index>(i), s) = q[out_dofs[i]];
      if (options.velocity_outputs) rec.y(static_cast<Eigen::Index>(i + out_dofs.size()), s) = v[out_dofs[i]];
    }
    const Eigen::Index in_period = s % N;
    for (int j = 0; j < dec; ++j) {
      if (band_limited) {
        const Eigen::Index base = (in_period * dec + j) * 2;
        u0 = fine.col(base % n_fine);
        uh = fine.col((base + 1) % n_fine);
        u1 = fine.col((base + 2) % n_fine);
      } else {
        u0 = u_period.col(in_period);
        uh = u0;
        u1 = u0;
      }
      const Vector k1v = accel(q, v, u0);
      const Vector k1q = v;
      const Vector k2v = accel(q + 0.5 * h * k1q, v + 0.5 * h * k1v, uh);
      const Vector k2q = v + 0.5 * h * k1v;
      const Vector k3v = accel(q + 0.5 * h * k2q, v + 0.5 * h * k2v, uh);
      const Vector k3q = v + 0.5 * h * k2v;
      const Vector k4v = accel(q + h * k3q, v + h * k3v, u1);
      const Vector k4q = v + h * k3v;
      q += h / 6.0 * (k1q + 2.0 * k2q + 2.0 * k3q + k4q);
      v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
    }
    const double norm = std::sqrt(q.squaredNorm() + v.squaredNorm());
    if (!std::isfinite(norm) || norm > options.divergence_bound) {
      result.status = SimStatus::diverged;
      result.first_bad = s + 1;
      return result;
    }
  }
  return result;
}

namespace {

double steadiness_of(const Matrix& y, int N, int total_periods) {
  if (total_periods < 2) return std::numeric_limits<double>::quiet_NaN();
  const Matrix last = y.middleCols(static_cast<Eigen::Index>(total_periods - 1) * N, N);
  const Matrix prev = y.middleCols(static_cast<Eigen::Index>(total_periods - 2) * N, N);
  const double scale = last.cwiseAbs().maxCoeff();
  const double diff = (last - prev).cwiseAbs().maxCoeff();
  return scale > 0.0 ? diff / scale : diff;
}

}  // namespace

SteadyStateResult run_to_steady_state(const GreyBoxModel& model, const Matrix& u_period, int n_transient,
                                      int n_keep, double threshold) {
  if (n_transient < 0 || n_keep < 1) throw DimensionError("run_to_steady_state: need n_keep >= 1");
  const int N = static_cast<int>(u_period.cols());
  const int total = n_transient + n_keep;
  const auto sim = simulate_discrete(model, tile_periods(u_period, total), Vector::Zero(model.dims.n_s));
  SteadyStateResult res;
  res.status = sim.status;
  res.record.fs = 1.0 / model.Ts;
  res.record.N = N;
  res.record.P = n_keep;
  const Eigen::Index start = static_cast<Eigen::Index>(n_transient) * N;
  res.record.u = tile_periods(u_period, n_keep);
  res.record.y = sim.y.rightCols(sim.y.cols() - start);
  res.steadiness = sim.ok() ? steadiness_of(sim.y, N, total) : std::numeric_limits<double>::infinity();
  res.warning = !(res.steadiness <= threshold);
  return res;
}

SteadyStateResult run_to_steady_state(const PhysicalSystem& system, const Matrix& u_period, double fs,
                                      int n_transient, int n_keep, const NewtonOptions& options,
                                      double threshold) {
  if (n_transient < 0 || n_keep < 1) throw DimensionError("run_to_steady_state: need n_keep >= 1");
  const int N = static_cast<int>(u_period.cols());
  const int total = n_transient + n_keep;
  auto sim = simulate_newton(system, u_period, total, fs, options);
  SteadyStateResult res;
  res.status = sim.status;
  res.record.fs = fs;
  res.record.N = N;
  res.record.P = n_keep;
  const Eigen::Index start = static_cast<Eigen::Index>(n_transient) * N;
  res.record.u = tile_periods(u_period, n_keep);
  res.record.y = sim.record.y.rightCols(sim.record.y.cols() - start);
  res.steadiness = sim.status == SimStatus::ok ? steadiness_of(sim.record.y, N, total)
                                               : std::numeric_limits<double>::infinity();
  res.warning = !(res.steadiness <= threshold);
  return res;
}

}  // namespace greybox
