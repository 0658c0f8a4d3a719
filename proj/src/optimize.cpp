#include "greybox/optimize.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SVD>

namespace greybox {

namespace {

enum class Block { A, Bext, C, Dext };

struct FreeParam {
  Block block;
  Eigen::Index row;
  Eigen::Index col;
};

// Same order as pack_parameters: A, Bext, C, Dext, each column-major.
std::vector<FreeParam> free_parameters(const ParameterMask& mask) {
  std::vector<FreeParam> out;
  auto add = [&](const Mask& m, Block b) {
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      for (Eigen::Index r = 0; r < m.rows(); ++r)
        if (m(r, c)) out.push_back({b, r, c});
  };
  add(mask.A, Block::A);
  add(mask.Bext, Block::Bext);
  add(mask.C, Block::C);
  add(mask.Dext, Block::Dext);
  return out;
}

CVector line_values(const Vector& period, const std::vector<int>& lines) {
  const CVector X = dft_period(period);
  CVector out(static_cast<Eigen::Index>(lines.size()));
  for (std::size_t i = 0; i < lines.size(); ++i) out[static_cast<Eigen::Index>(i)] = X[lines[i]];
  return out;
}

struct BaseRun {
  GreyBoxModel model;
  SimulationOutput sim;
  Residual residual;
};

BaseRun run_base(const Vector& theta, const CostSetup& setup) {
  BaseRun run;
  run.model = unpack_parameters(theta, setup.mask, setup.model_template);
  const int N = static_cast<int>(setup.u_period.cols());
  const int periods = setup.warmup_periods + 1;
  run.sim = simulate_discrete(run.model, tile_periods(setup.u_period, periods), Vector::Zero(run.model.dims.n_s));
  const auto l = run.model.dims.l;
  run.residual.eps = CMatrix::Constant(l, setup.lines(), std::complex<double>(
                                                              std::numeric_limits<double>::infinity(), 0.0));
  run.residual.status = run.sim.status;
  run.residual.ok = run.sim.ok();
  if (!run.sim.ok()) return run;
  const Eigen::Index start = static_cast<Eigen::Index>(setup.warmup_periods) * N;
  for (int c = 0; c < l; ++c) {
    const Vector last = run.sim.y.row(c).segment(start, N).transpose();
    run.residual.eps.row(c) = (line_values(last, setup.Y.lines) - setup.Y.values.row(c).transpose()).transpose();
  }
  if (!run.residual.eps.allFinite()) {
    run.residual.ok = false;
    run.residual.status = SimStatus::diverged;
  }
  return run;
}

}  // namespace

void CostSetup::validate() const {
  model_template.validate();
  mask.check(model_template.dims);
  const auto& d = model_template.dims;
  if (u_period.rows() != d.m || u_period.cols() < 1) throw DimensionError("cost setup: u_period must be m x N");
  if (Y.channels() != d.l || Y.N != u_period.cols()) throw DimensionError("cost setup: Y spectra do not match (l, N)");
  if (warmup_periods < 0) throw DimensionError("cost setup: warmup_periods must be >= 0");
  if (!weights.empty()) {
    if (static_cast<int>(weights.size()) != Y.size()) throw DimensionError("cost setup: one weight per line required");
    for (const auto& W : weights) {
      if (W.rows() != d.l || W.cols() != d.l) throw DimensionError("cost setup: weights must be l x l");
      if (!W.isApprox(W.adjoint(), 1e-12)) throw DimensionError("cost setup: weights must be Hermitian");
    }
  }
}

CostSetup make_cost_setup(const TimeRecord& record, const std::vector<int>& lines, const GreyBoxModel& model_template,
                          const ParameterMask& mask, PeriodRange periods) {
  record.validate();
  CostSetup setup;
  setup.u_period = record.u.leftCols(record.N);
  setup.Y = dft(record.y, record.N, lines, periods);
  setup.mask = mask;
  setup.model_template = model_template;
  setup.validate();
  return setup;
}

Residual residual_spectrum(const Vector& theta, const CostSetup& setup) {
  return run_base(theta, setup).residual;
}

double cost(const Residual& residual, const CostSetup& setup) {
  if (!residual.ok) return std::numeric_limits<double>::infinity();
  double v = 0.0;
  for (Eigen::Index k = 0; k < residual.eps.cols(); ++k) {
    const CVector e = residual.eps.col(k);
    v += setup.weights.empty() ? e.squaredNorm() : (e.adjoint() * setup.weights[static_cast<std::size_t>(k)] * e)(0, 0).real();
  }
  return v;
}

double cost(const Vector& theta, const CostSetup& setup) {
  return cost(residual_spectrum(theta, setup), setup);
}

Jacobian jacobian(const Vector& theta, const CostSetup& setup) {
  const auto params = free_parameters(setup.mask);
  if (static_cast<Eigen::Index>(params.size()) != theta.size()) {
    throw DimensionError("jacobian: theta length does not match the mask");
  }
  auto base = run_base(theta, setup);
  Jacobian out;
  out.residual = base.residual;
  if (!base.residual.ok) throw NumericalError("jacobian: base simulation failed (" + std::string(to_string(base.sim.status)) + ")");

  const auto& model = base.model;
  const auto& d = model.dims;
  const auto& sim = base.sim;
  const Eigen::Index p = theta.size();
  const int N = static_cast<int>(setup.u_period.cols());
  const Eigen::Index T = sim.y.cols();
  const Eigen::Index start = T - N;
  const bool velocity = model.basis.has_velocity_terms();
  const double inv_ts = 1.0 / model.Ts;
  const Matrix E = model.E();
  const Matrix Fm = model.F();
  const bool has_f = d.s > 0 && Fm.cwiseAbs().maxCoeff() > 0.0;
  const Matrix u_all = tile_periods(setup.u_period, setup.warmup_periods + 1);

  Matrix X = Matrix::Zero(d.n_s, p);
  Matrix Yp = Matrix::Zero(d.l, p);
  Matrix Ycur(d.l, p), Unl(d.s, p), Fstate(d.n_s, p), Fout(d.l, p), Xnext(d.n_s, p);
  Matrix Ylast(d.l * p, N);
  Vector ubar(d.m + d.s);

  for (Eigen::Index t = 0; t < T; ++t) {
    ubar.head(d.m) = u_all.col(t);
    if (d.s > 0) ubar.tail(d.s) = sim.g.col(t);
    Fstate.setZero();
    Fout.setZero();
    for (Eigen::Index c = 0; c < p; ++c) {
      const auto& fp = params[static_cast<std::size_t>(c)];
      switch (fp.block) {
        case Block::A: Fstate(fp.row, c) = sim.x(fp.col, t); break;
        case Block::Bext: Fstate(fp.row, c) = ubar[fp.col]; break;
        case Block::C: Fout(fp.row, c) = sim.x(fp.col, t); break;
        case Block::Dext: Fout(fp.row, c) = ubar[fp.col]; break;
      }
    }

    Ycur.noalias() = model.C * X;
    Ycur += Fout;
    if (d.s > 0) {
      const auto grad = velocity ? basis_gradient(model.basis, sim.y.col(t), sim.ydot.col(t))
                                 : basis_gradient(model.basis, sim.y.col(t));
      // ydot is a backward difference, ydot(0) = 0
      const bool diff = velocity && t > 0;
      if (has_f) {
        Matrix M = Matrix::Identity(d.l, d.l) - Fm * (diff ? Matrix(grad.dy + grad.dydot * inv_ts) : grad.dy);
        if (diff) Ycur.noalias() -= Fm * (grad.dydot * Yp) * inv_ts;
        Ycur = M.partialPivLu().solve(Ycur);
      }
      Unl.noalias() = grad.dy * Ycur;
      if (diff) Unl.noalias() += grad.dydot * (Ycur - Yp) * inv_ts;
    }

    if (t >= start) {
      for (Eigen::Index c = 0; c < p; ++c) Ylast.block(c * d.l, t - start, d.l, 1) = Ycur.col(c);
    }

    Xnext.noalias() = model.A * X;
    if (d.s > 0) Xnext.noalias() += E * Unl;
    Xnext += Fstate;
    X.swap(Xnext);
    Yp = Ycur;
  }

  const Eigen::Index F = setup.lines();
  out.J.resize(d.l * F, p);
  out.column_diverged.assign(static_cast<std::size_t>(p), false);
  for (Eigen::Index c = 0; c < p; ++c) {
    for (int i = 0; i < d.l; ++i) {
      const Vector series = Ylast.row(c * d.l + i).transpose();
      const CVector vals = line_values(series, setup.Y.lines);
      for (Eigen::Index k = 0; k < F; ++k) out.J(k * d.l + i, c) = vals[k];
    }
    if (!out.J.col(c).allFinite()) out.column_diverged[static_cast<std::size_t>(c)] = true;
  }
  return out;
}

ValidationResult validate_model(const GreyBoxModel& model, const TimeRecord& record, const std::vector<int>& lines,
                                const ValidationOptions& options) {
  record.validate();
  if (record.inputs() != model.dims.m || record.outputs() != model.dims.l) {
    throw DimensionError("validate: record channels do not match the model");
  }
  const int N = record.N;
  const Matrix measured = mean_period(record.y, N, options.periods);
  const auto sim = simulate_discrete(model, tile_periods(record.u.leftCols(N), options.warmup_periods + 1),
                                     Vector::Zero(model.dims.n_s));
  ValidationResult out;
  out.status = sim.status;
  if (!sim.ok()) {
    out.rms = std::numeric_limits<double>::infinity();
    out.relative_rms = out.rms;
    return out;
  }
  out.error = sim.y.rightCols(N) - measured;
  out.rms = rms(out.error);
  const double ref = rms(measured);
  out.relative_rms = ref > 0.0 ? out.rms / ref : out.rms;
  if (!lines.empty()) out.error_spectrum = dft(out.error, N, lines);
  return out;
}

LmResult lm_optimize(const Vector& theta0, const CostSetup& setup, const LmValidation& validation,
                     const LmOptions& options) {
  setup.validate();
  if (options.max_iter < 0 || !(options.lambda_up > 1.0) || !(options.lambda_down > 1.0) || !(options.tol >= 0.0)) {
    throw ConfigError("lm: invalid options (lambda_up, lambda_down > 1; tol >= 0; max_iter >= 0)");
  }
  const auto l = setup.model_template.dims.l;
  const Eigen::Index F = setup.lines();

  // W^(1/2) per line
  std::vector<CMatrix> roots;
  for (const auto& W : setup.weights) {
    Eigen::SelfAdjointEigenSolver<CMatrix> es(W);
    roots.push_back(es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
                    es.eigenvectors().adjoint());
  }
  auto weighted = [&](const CMatrix& rows_by_line, Eigen::Index cols) {
    // rows_by_line is (l F) x cols
    if (roots.empty()) return CMatrix(rows_by_line);
    CMatrix out(l * F, cols);
    for (Eigen::Index k = 0; k < F; ++k) out.middleRows(k * l, l) = roots[static_cast<std::size_t>(k)] * rows_by_line.middleRows(k * l, l);
    return out;
  };
  auto stacked_residual = [&](const Residual& r) {
    CMatrix flat(l * F, 1);
    for (Eigen::Index k = 0; k < F; ++k) flat.middleRows(k * l, l) = r.eps.col(k);
    const CMatrix w = weighted(flat, 1);
    Vector out(2 * l * F);
    out << w.real(), w.imag();
    return out;
  };
  auto validation_rms = [&](const Vector& theta) {
    if (validation.record == nullptr) return std::numeric_limits<double>::quiet_NaN();
    const auto model = unpack_parameters(theta, setup.mask, setup.model_template);
    return validate_model(model, *validation.record, {}, validation.options).rms;
  };

  LmResult result;
  Vector theta = theta0;
  double current = cost(theta, setup);
  if (!std::isfinite(current)) throw NumericalError("lm: initial model cannot be simulated");
  double val = validation_rms(theta);
  result.accepted_costs.push_back(current);
  result.validation_history.push_back(val);
  result.trace.push_back({0, 0.0, current, val, true});
  Vector best_theta = theta;
  double best_val = val;
  int best_index = 0;

  const double scale = setup.Y.values.squaredNorm();
  double lambda = -1.0;
  result.status = "max_iter";
  if (current <= 1e-28 * scale) {
    result.status = "stationary";
  } else {
    for (int iter = 1; iter <= options.max_iter; ++iter) {
      const auto jac = jacobian(theta, setup);
      const CMatrix Jw = weighted(jac.J, theta.size());
      Matrix Jr(2 * l * F, theta.size());
      Jr << Jw.real(), Jw.imag();
      const Vector r = stacked_residual(jac.residual);
      Vector norms = Jr.colwise().norm().transpose();
      for (auto& v : norms) v = v > 0.0 ? v : 1.0;
      const Matrix Js = Jr * norms.cwiseInverse().asDiagonal();
      Eigen::BDCSVD<Matrix> svd(Js, Eigen::ComputeThinU | Eigen::ComputeThinV);
      const Vector sigma = svd.singularValues();
      const Vector g = svd.matrixU().transpose() * r;
      if (lambda < 0.0) {
        lambda = options.lambda0 > 0.0 ? options.lambda0 : 1e-3 * Js.colwise().squaredNorm().mean();
      }

      bool accepted = false;
      double trial_cost = current;
      Vector trial;
      while (true) {
        const Vector filt = sigma.array() / (sigma.array().square() + lambda);
        const Vector step = -(norms.cwiseInverse().asDiagonal() * (svd.matrixV() * filt.cwiseProduct(g)));
        trial = theta + step;
        trial_cost = cost(trial, setup);
        if (trial_cost < current) {
          accepted = true;
          break;
        }
        result.trace.push_back({iter, lambda, trial_cost, std::numeric_limits<double>::quiet_NaN(), false});
        lambda *= options.lambda_up;
        if (lambda > options.lambda_max) break;
      }
      if (!accepted) {
        result.status = "lambda_max";
        break;
      }
      const double previous = current;
      theta = trial;
      current = trial_cost;
      val = validation_rms(theta);
      result.trace.push_back({iter, lambda, current, val, true});
      result.accepted_costs.push_back(current);
      result.validation_history.push_back(val);
      const int index = static_cast<int>(result.accepted_costs.size()) - 1;
      if (validation.record == nullptr || (std::isfinite(val) && !(val >= best_val))) {
        best_theta = theta;
        best_val = val;
        best_index = index;
      }
      lambda /= options.lambda_down;
      if (previous - current <= options.tol * previous) {
        result.status = "converged";
        break;
      }
    }
  }
  result.theta = best_theta;
  result.final_theta = theta;
  result.model = unpack_parameters(best_theta, setup.mask, setup.model_template);
  result.selected_iteration = best_index;
  result.selected_validation_rms = best_val;
  return result;
}

void write_trace_csv(const std::filesystem::path& path, const LmResult& result) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << std::setprecision(17) << "iteration,lambda,cost,validation_rms,accepted\n";
  for (const auto& it : result.trace) {
    out << it.iteration << ',' << it.lambda << ',' << it.cost << ',';
    if (std::isfinite(it.validation_rms)) out << it.validation_rms;
    out << ',' << (it.accepted ? 1 : 0) << '\n';
  }
}

}  // namespace greybox
