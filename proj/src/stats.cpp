#include "greybox/stats.hpp"

#include <cmath>

namespace greybox {

int EnsembleResult::successes() const {
  int n = 0;
  for (const auto& r : realizations) n += r.ok ? 1 : 0;
  return n;
}

int EnsembleResult::failures() const {
  return static_cast<int>(realizations.size()) - successes();
}

namespace {

Matrix stack(const std::vector<Realization>& rs, Vector Realization::*field) {
  std::vector<const Vector*> rows;
  for (const auto& r : rs)
    if (r.ok) rows.push_back(&(r.*field));
  if (rows.empty()) return Matrix();
  Matrix out(static_cast<Eigen::Index>(rows.size()), rows.front()->size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i]->size() != out.cols()) throw DimensionError("ensemble: realizations have differing lengths");
    out.row(static_cast<Eigen::Index>(i)) = rows[i]->transpose();
  }
  return out;
}

}  // namespace

Matrix EnsembleResult::theta_samples() const { return stack(realizations, &Realization::theta); }
Matrix EnsembleResult::physical_samples() const { return stack(realizations, &Realization::physical); }

EnsembleResult monte_carlo(const RealizationFn& run, int R, std::uint64_t seed0,
                           std::vector<std::string> parameter_labels, std::vector<std::string> physical_labels) {
  if (R < 2) throw ConfigError("monte_carlo: R must be at least 2");
  EnsembleResult out;
  out.parameter_labels = std::move(parameter_labels);
  out.physical_labels = std::move(physical_labels);
  for (int r = 1; r <= R; ++r) {
    const std::uint64_t seed = seed0 + static_cast<std::uint64_t>(r);
    Realization rz;
    try {
      rz = run(r, seed);
      rz.ok = true;
    } catch (const std::exception& e) {
      rz = Realization{};
      rz.error = e.what();
    }
    rz.index = r;
    rz.seed = seed;
    out.realizations.push_back(std::move(rz));
  }
  if (out.successes() == 0) throw NumericalError("monte_carlo: every realization failed");
  return out;
}

std::vector<ParameterStats> ensemble_stats(const Matrix& samples, const std::vector<std::string>& labels) {
  if (samples.rows() < 2) throw DimensionError("ensemble_stats: needs at least 2 realizations");
  if (!labels.empty() && static_cast<Eigen::Index>(labels.size()) != samples.cols()) {
    throw DimensionError("ensemble_stats: one label per column required");
  }
  const double n = static_cast<double>(samples.rows());
  std::vector<ParameterStats> out;
  for (Eigen::Index c = 0; c < samples.cols(); ++c) {
    ParameterStats s;
    s.label = labels.empty() ? "p" + std::to_string(c + 1) : labels[static_cast<std::size_t>(c)];
    s.mean = samples.col(c).mean();
    s.std = std::sqrt((samples.col(c).array() - s.mean).square().sum() / (n - 1.0));
    s.ratio_percent = s.mean != 0.0 ? 100.0 * s.std / std::abs(s.mean) : std::numeric_limits<double>::infinity();
    out.push_back(s);
  }
  return out;
}

Correlation correlation_matrix(const Matrix& samples) {
  if (samples.rows() < 2) throw DimensionError("correlation_matrix: needs at least 2 realizations");
  const Matrix centered = samples.rowwise() - samples.colwise().mean();
  Correlation out;
  for (Eigen::Index c = 0; c < samples.cols(); ++c) {
    const double scale = samples.col(c).cwiseAbs().maxCoeff();
    if (centered.col(c).norm() > 1e-14 * scale * std::sqrt(static_cast<double>(samples.rows())) &&
        centered.col(c).norm() > 0.0) {
      out.included.push_back(static_cast<int>(c));
    } else {
      out.excluded.push_back(static_cast<int>(c));
    }
  }
  const auto k = static_cast<Eigen::Index>(out.included.size());
  Matrix Z(samples.rows(), k);
  for (Eigen::Index j = 0; j < k; ++j) {
    const Vector col = centered.col(out.included[static_cast<std::size_t>(j)]);
    Z.col(j) = col / col.norm();
  }
  out.matrix = Z.transpose() * Z;
  // enforce the exact structural properties rounding could disturb
  out.matrix = 0.5 * (out.matrix + out.matrix.transpose()).eval();
  for (Eigen::Index j = 0; j < k; ++j) out.matrix(j, j) = 1.0;
  out.matrix = out.matrix.cwiseMax(-1.0).cwiseMin(1.0);
  return out;
}

nlohmann::json ensemble_report(const EnsembleResult& ensemble) {
  nlohmann::json j;
  j["realizations"] = ensemble.realizations.size();
  j["successes"] = ensemble.successes();
  j["failures"] = ensemble.failures();
  j["runs"] = nlohmann::json::array();
  for (const auto& r : ensemble.realizations) {
    nlohmann::json run = {{"index", r.index}, {"seed", r.seed}, {"ok", r.ok}};
    if (!r.ok) run["error"] = r.error;
    j["runs"].push_back(run);
  }
  auto stats_json = [](const std::vector<ParameterStats>& stats) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& s : stats) {
      arr.push_back({{"label", s.label},
                     {"mean", s.mean},
                     {"std", s.std},
                     {"ratio_percent", std::isfinite(s.ratio_percent) ? nlohmann::json(s.ratio_percent) : nlohmann::json(nullptr)}});
    }
    return arr;
  };
  if (ensemble.successes() >= 2) {
    j["parameters"] = stats_json(ensemble_stats(ensemble.theta_samples(), ensemble.parameter_labels));
    j["physical"] = stats_json(ensemble_stats(ensemble.physical_samples(), ensemble.physical_labels));
    const auto corr = correlation_matrix(ensemble.theta_samples());
    j["correlation_excluded"] = corr.excluded;
  }
  return j;
}

}  // namespace greybox
