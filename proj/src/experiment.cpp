#include "greybox/experiment.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <set>
#include <sstream>

#include "greybox/model_io.hpp"
#include "greybox/record_io.hpp"

namespace greybox {

using nlohmann::json;

namespace {

/// Reads one JSON object, remembering which keys were used so that typos
/// surface as errors instead of silently falling back to defaults.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  bool has(const char* key) const { return j_.contains(key) && !j_.at(key).is_null(); }

  template <class T>
  T get(const char* key, T fallback) {
    seen_.insert(key);
    if (!has(key)) return fallback;
    return as<T>(key);
  }

  template <class T>
  T require(const char* key) {
    seen_.insert(key);
    if (!has(key)) throw ConfigError(where(key) + ": required");
    return as<T>(key);
  }

  const json& raw(const char* key) {
    seen_.insert(key);
    if (!has(key)) throw ConfigError(where(key) + ": required");
    return j_.at(key);
  }

  Section sub(const char* key) {
    seen_.insert(key);
    static const json empty = json::object();
    return Section(has(key) ? j_.at(key) : empty, where(key));
  }

  std::string where(const char* key) const { return path_ + "." + key; }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError(path_ + "." + it.key() + ": unknown key");
    }
  }

 private:
  template <class T>
  T as(const char* key) const {
    try {
      return j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(where(key) + ": wrong type (" + std::string(j_.at(key).type_name()) + ")");
    }
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

BasisSignal parse_signal(const std::string& s, const std::string& where) {
  if (s == "displacement") return BasisSignal::displacement;
  if (s == "velocity") return BasisSignal::velocity;
  throw ConfigError(where + ": signal must be displacement or velocity");
}

PhysicalSystem parse_system(Section s) {
  const auto type = s.get<std::string>("type", "sdof");
  PhysicalSystem sys;
  if (type == "sdof") {
    std::vector<std::pair<int, double>> poly;
    const double f_n = s.require<double>("f_n");
    const double zeta = s.require<double>("zeta");
    const double stiffness = s.get<double>("stiffness", 1.0);
    if (!(f_n > 0.0) || !(zeta >= 0.0) || !(stiffness > 0.0)) {
      throw ConfigError(s.where("f_n") + ": f_n and stiffness must be positive, zeta nonnegative");
    }
    if (s.has("nonlinear")) {
      const auto& arr = s.raw("nonlinear");
      if (!arr.is_array()) throw ConfigError(s.where("nonlinear") + ": expected an array");
      for (std::size_t i = 0; i < arr.size(); ++i) {
        Section t(arr[i], s.where("nonlinear") + "[" + std::to_string(i) + "]");
        poly.emplace_back(t.require<int>("exponent"), t.require<double>("coefficient"));
        t.finish();
      }
    } else {
      s.get<int>("nonlinear", 0);
    }
    sys = PhysicalSystem::sdof(f_n, zeta, stiffness, poly);
  } else if (type == "mdof") {
    sys.M = matrix_from_json(s.raw("M"), "system.M");
    sys.Cv = matrix_from_json(s.raw("Cv"), "system.Cv");
    sys.K = matrix_from_json(s.raw("K"), "system.K");
    sys.input_map = matrix_from_json(s.raw("input_map"), "system.input_map");
    sys.output_dofs = s.get<std::vector<int>>("output_dofs", {});
    if (s.has("nonlinear")) {
      const auto& arr = s.raw("nonlinear");
      if (!arr.is_array()) throw ConfigError(s.where("nonlinear") + ": expected an array");
      for (std::size_t i = 0; i < arr.size(); ++i) {
        Section t(arr[i], s.where("nonlinear") + "[" + std::to_string(i) + "]");
        NonlinearForce f;
        f.coefficient = t.require<double>("coefficient");
        f.term.channel = t.require<int>("dof");
        f.term.exponent = t.require<int>("exponent");
        f.term.signal = parse_signal(t.get<std::string>("signal", "displacement"), t.where("signal"));
        if (t.has("location")) {
          const auto loc = t.get<std::vector<double>>("location", {});
          f.location = Eigen::Map<const Vector>(loc.data(), static_cast<Eigen::Index>(loc.size()));
        }
        t.finish();
        sys.nonlinear.push_back(f);
      }
    } else {
      s.get<int>("nonlinear", 0);
    }
  } else {
    throw ConfigError(s.where("type") + ": must be sdof or mdof");
  }
  s.finish();
  try {
    sys.validate();
  } catch (const Error& e) {
    throw ConfigError(std::string("system: ") + e.what());
  }
  return sys;
}

BasisSet parse_basis(Section& model) {
  if (!model.has("basis")) {
    model.get<int>("basis", 0);
    return {};
  }
  const auto& b = model.raw("basis");
  try {
    if (b.is_array()) return basis_from_json(b);
    Section s(b, model.where("basis"));
    const int channel = s.get<int>("channel", 0);
    const auto degrees = s.require<std::vector<int>>("degrees");
    const auto signal = parse_signal(s.get<std::string>("signal", "displacement"), s.where("signal"));
    s.finish();
    BasisSet basis = BasisSet::polynomial(channel, degrees);
    for (auto& t : basis.terms) t.signal = signal;
    return basis;
  } catch (const json::exception& e) {
    throw ConfigError(model.where("basis") + ": " + e.what());
  }
}

std::uint64_t noise_seed_for(std::uint64_t seed) {
  return seed * 0x9E3779B97F4A7C15ULL + 0x632BE59BD9B4E019ULL;
}

/// One period per input channel; channel c uses seed + c * 7919.
Matrix excitation(const ExperimentConfig& config, int inputs, std::uint64_t seed) {
  Matrix u(inputs, config.N);
  for (int c = 0; c < inputs; ++c) {
    u.row(c) = generate_multisine(config.band, config.fs, config.N, config.rms,
                                  seed + static_cast<std::uint64_t>(c) * 7919ULL).transpose();
  }
  return u;
}

int nl_channel(const ExperimentConfig& config) {
  return config.basis.empty() ? 0 : config.basis.terms.front().channel;
}

std::string csv_quote(const std::string& s) {
  return "\"" + s + "\"";
}

std::ofstream open_text(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << std::setprecision(17);
  return out;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const json& j, const std::filesystem::path& base_dir) {
  ExperimentConfig c;
  Section root(j, "config");

  Section data = root.sub("data");
  const auto source = data.get<std::string>("source", "synthetic");
  if (source == "file") {
    c.synthetic = false;
    c.data_path = base_dir / data.require<std::string>("path");
    if (data.has("validation_path")) c.validation_path = base_dir / data.require<std::string>("validation_path");
    data.get<std::string>("validation_path", "");
  } else if (source == "synthetic") {
    data.get<std::string>("path", "");
    data.get<std::string>("validation_path", "");
  } else {
    throw ConfigError(data.where("source") + ": must be synthetic or file");
  }
  data.finish();

  if (c.synthetic) c.system = parse_system(root.sub("system"));
  else root.sub("system");

  Section ex = root.sub("excitation");
  c.fs = ex.get<double>("fs", c.fs);
  c.N = ex.get<int>("N", c.N);
  c.periods = ex.get<int>("periods", c.periods);
  c.transient = ex.get<int>("transient", c.transient);
  c.rms = ex.get<double>("rms", c.rms);
  if (ex.has("snr_db")) c.snr_db = ex.get<double>("snr_db", 0.0);
  else ex.get<double>("snr_db", 0.0);
  c.seed = ex.get<std::uint64_t>("seed", c.seed);
  c.validation_seed = ex.get<std::uint64_t>("validation_seed", c.seed + 1000);
  c.validation_periods = ex.get<int>("validation_periods", c.validation_periods);
  c.newton.decimation = ex.get<int>("decimation", c.newton.decimation);
  const auto hold = ex.get<std::string>("hold", "band_limited");
  if (hold == "band_limited") c.newton.hold = InputHold::band_limited;
  else if (hold == "zero_order") c.newton.hold = InputHold::zero_order;
  else throw ConfigError(ex.where("hold") + ": must be band_limited or zero_order");
  if (!(c.fs > 0.0) || c.N < 4) throw ConfigError(ex.where("fs") + ": fs must be positive and N >= 4");
  if (ex.has("band_lines")) {
    const auto lines = ex.get<std::vector<int>>("band_lines", {});
    if (lines.size() != 2) throw ConfigError(ex.where("band_lines") + ": expected [k_min, k_max]");
    c.band.k_min = lines[0];
    c.band.k_max = lines[1];
  } else {
    ex.get<int>("band_lines", 0);
    const auto hz = ex.get<std::vector<double>>("band_hz", {0.0, 0.1 * c.fs});
    if (hz.size() != 2) throw ConfigError(ex.where("band_hz") + ": expected [f_lo, f_hi]");
    if (!(hz[1] < 0.5 * c.fs)) throw ConfigError(ex.where("band_hz") + ": upper edge must lie below fs/2");
    try {
      c.band = ExcitedBand::from_hz(hz[0], hz[1], c.fs, c.N);
    } catch (const Error& e) {
      throw ConfigError(ex.where("band_hz") + ": " + e.what());
    }
  }
  c.band.excluded = ex.get<std::vector<int>>("exclude_lines", {});
  ex.finish();

  Section model = root.sub("model");
  c.n_s = model.get<int>("n_s", c.n_s);
  c.block_rows = model.get<int>("block_rows", c.block_rows);
  c.free_F = model.get<bool>("free_F", c.free_F);
  c.warmup_periods = model.get<int>("warmup_periods", c.warmup_periods);
  c.basis = parse_basis(model);
  model.finish();

  Section lm = root.sub("lm");
  c.run_lm = lm.get<bool>("enabled", c.run_lm);
  c.lm.max_iter = lm.get<int>("max_iter", c.lm.max_iter);
  c.lm.lambda0 = lm.get<double>("lambda0", c.lm.lambda0);
  c.lm.lambda_up = lm.get<double>("lambda_up", c.lm.lambda_up);
  c.lm.lambda_down = lm.get<double>("lambda_down", c.lm.lambda_down);
  c.lm.lambda_max = lm.get<double>("lambda_max", c.lm.lambda_max);
  c.lm.tol = lm.get<double>("tol", c.lm.tol);
  lm.finish();

  Section ext = root.sub("extract");
  c.ratio.row = ext.get<int>("row", -1);
  c.ratio.column = ext.get<int>("column", 0);
  c.force_points = ext.get<int>("force_points", c.force_points);
  ext.finish();

  c.output_dir = root.get<std::string>("output_dir", "out");
  c.realizations = root.get<int>("realizations", c.realizations);
  root.finish();
  c.validate();
  return c;
}

json ExperimentConfig::to_json() const {
  json j;
  if (synthetic) {
    j["data"] = {{"source", "synthetic"}};
    json sys = {{"type", "mdof"},
                {"M", matrix_to_json(system.M)},
                {"Cv", matrix_to_json(system.Cv)},
                {"K", matrix_to_json(system.K)},
                {"input_map", matrix_to_json(system.input_map)},
                {"output_dofs", system.output_dofs}};
    json nl = json::array();
    for (const auto& f : system.nonlinear) {
      json item = {{"coefficient", f.coefficient},
                   {"dof", f.term.channel},
                   {"exponent", f.term.exponent},
                   {"signal", f.term.signal == BasisSignal::velocity ? "velocity" : "displacement"}};
      if (f.location.size()) item["location"] = std::vector<double>(f.location.data(), f.location.data() + f.location.size());
      nl.push_back(item);
    }
    sys["nonlinear"] = nl;
    j["system"] = sys;
  } else {
    j["data"] = {{"source", "file"}, {"path", data_path.string()}};
    if (!validation_path.empty()) j["data"]["validation_path"] = validation_path.string();
  }
  j["excitation"] = {{"fs", fs},
                     {"N", N},
                     {"band_lines", {band.k_min, band.k_max}},
                     {"exclude_lines", band.excluded},
                     {"periods", periods},
                     {"transient", transient},
                     {"rms", rms},
                     {"seed", seed},
                     {"validation_seed", validation_seed},
                     {"validation_periods", validation_periods},
                     {"decimation", newton.decimation},
                     {"hold", newton.hold == InputHold::band_limited ? "band_limited" : "zero_order"}};
  if (snr_db) j["excitation"]["snr_db"] = *snr_db;
  j["model"] = {{"n_s", n_s},
                {"block_rows", block_rows},
                {"basis", basis_to_json(basis)},
                {"free_F", free_F},
                {"warmup_periods", warmup_periods}};
  j["lm"] = {{"enabled", run_lm},          {"max_iter", lm.max_iter},       {"lambda0", lm.lambda0},
             {"lambda_up", lm.lambda_up},  {"lambda_down", lm.lambda_down}, {"lambda_max", lm.lambda_max},
             {"tol", lm.tol}};
  j["extract"] = {{"row", ratio.row}, {"column", ratio.column}, {"force_points", force_points}};
  j["output_dir"] = output_dir.string();
  j["realizations"] = realizations;
  return j;
}

void ExperimentConfig::validate() const {
  try {
    band.validate(N);
  } catch (const Error& e) {
    throw ConfigError(std::string("excitation: ") + e.what());
  }
  if (periods < 1 || transient < 0 || transient >= periods) {
    throw ConfigError("excitation.transient: require 0 <= transient < periods");
  }
  if (validation_periods < 1) throw ConfigError("excitation.validation_periods: must be >= 1");
  if (!(rms > 0.0)) throw ConfigError("excitation.rms: must be positive");
  if (newton.decimation < 1) throw ConfigError("excitation.decimation: must be >= 1");
  if (n_s < 1) throw ConfigError("model.n_s: must be >= 1");
  if (block_rows < 0) throw ConfigError("model.block_rows: must be >= 0");
  if (warmup_periods < 0) throw ConfigError("model.warmup_periods: must be >= 0");
  if (lm.max_iter < 0 || !(lm.lambda_up > 1.0) || !(lm.lambda_down > 1.0) || !(lm.tol >= 0.0)) {
    throw ConfigError("lm: require max_iter >= 0, lambda_up > 1, lambda_down > 1, tol >= 0");
  }
  if (force_points < 2) throw ConfigError("extract.force_points: must be >= 2");
  if (realizations < 2) throw ConfigError("realizations: must be >= 2");
  if (synthetic) {
    const int outputs = static_cast<int>(system.outputs().size());
    try {
      basis.validate(outputs);
    } catch (const Error& e) {
      throw ConfigError(std::string("model.basis: ") + e.what());
    }
    if (ratio.row >= outputs) throw ConfigError("extract.row: exceeds the number of outputs");
    if (ratio.column < 0 || ratio.column >= system.inputs()) throw ConfigError("extract.column: out of range");
  }
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  const json j = read_json_file(path);
  return ExperimentConfig::from_json(j, path.parent_path());
}

std::vector<std::vector<int>> parse_degree_sets(const std::string& text) {
  auto to_int = [&](const std::string& s) {
    try {
      std::size_t used = 0;
      const int v = std::stoi(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw ConfigError("degrees: cannot parse '" + text + "' (use 2:5 or 2,3)");
    }
  };
  std::vector<std::vector<int>> sets;
  const auto colon = text.find(':');
  if (colon != std::string::npos) {
    const int lo = to_int(text.substr(0, colon));
    const int hi = to_int(text.substr(colon + 1));
    if (lo < 2 || hi < lo) throw ConfigError("degrees: require 2 <= lo <= hi in lo:hi");
    for (int top = lo; top <= hi; ++top) {
      std::vector<int> set;
      for (int p = lo; p <= top; ++p) set.push_back(p);
      sets.push_back(set);
    }
    return sets;
  }
  std::vector<int> set;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) set.push_back(to_int(item));
  if (set.empty()) throw ConfigError("degrees: empty list");
  sets.push_back(set);
  return sets;
}

TimeRecord synthesize_record(const ExperimentConfig& config, const Matrix& u_period, int n_transient, int n_keep,
                             std::uint64_t noise_seed, double* noise_sigma) {
  auto res = run_to_steady_state(config.system, u_period, config.fs, n_transient, n_keep, config.newton);
  if (res.status != SimStatus::ok) {
    throw NumericalError(std::string("truth simulation failed: ") + to_string(res.status));
  }
  double sigma_max = 0.0;
  if (config.snr_db) {
    std::mt19937_64 rng(noise_seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Eigen::Index c = 0; c < res.record.y.rows(); ++c) {
      const double sigma = rms(res.record.y.row(c)) * std::pow(10.0, -*config.snr_db / 20.0);
      sigma_max = std::max(sigma_max, sigma);
      for (Eigen::Index t = 0; t < res.record.y.cols(); ++t) res.record.y(c, t) += sigma * normal(rng);
    }
  }
  if (noise_sigma) *noise_sigma = sigma_max;
  return res.record;
}

namespace {

TimeRecord split_periods(const TimeRecord& r, int first, int count) {
  TimeRecord out = r;
  out.P = count;
  out.u = r.u.middleCols(static_cast<Eigen::Index>(first) * r.N, static_cast<Eigen::Index>(count) * r.N);
  out.y = r.y.middleCols(static_cast<Eigen::Index>(first) * r.N, static_cast<Eigen::Index>(count) * r.N);
  return out;
}

TimeRecord synthetic_validation(const ExperimentConfig& config) {
  const Matrix u = excitation(config, config.system.inputs(), config.validation_seed);
  return synthesize_record(config, u, config.transient, config.validation_periods,
                           noise_seed_for(config.validation_seed));
}

ExperimentData synthetic_estimation(const ExperimentConfig& config, std::uint64_t seed) {
  ExperimentData data;
  const Matrix u = excitation(config, config.system.inputs(), seed);
  data.estimation = synthesize_record(config, u, config.transient, config.periods - config.transient,
                                      noise_seed_for(seed), &data.noise_sigma);
  return data;
}

}  // namespace

ExperimentData acquire_data(const ExperimentConfig& config, std::uint64_t seed) {
  if (config.synthetic) {
    auto data = synthetic_estimation(config, seed);
    data.validation = synthetic_validation(config);
    return data;
  }
  ExperimentData data;
  TimeRecord rec = read_record_csv(config.data_path);
  if (rec.N != config.N || std::abs(rec.fs - config.fs) > 1e-9 * config.fs) {
    throw ConfigError(config.data_path.string() + ": fs/N differ from the configuration");
  }
  if (!config.validation_path.empty()) {
    data.estimation = rec;
    data.validation = read_record_csv(config.validation_path);
  } else {
    if (rec.P < 2) throw ConfigError(config.data_path.string() + ": need >= 2 periods to hold one out");
    data.estimation = split_periods(rec, 0, rec.P - 1);
    data.validation = split_periods(rec, rec.P - 1, 1);
  }
  if (config.transient > 0 && config.transient < data.estimation.P) {
    data.estimation = split_periods(data.estimation, config.transient, data.estimation.P - config.transient);
  }
  return data;
}

ExperimentData acquire_data(const ExperimentConfig& config) {
  return acquire_data(config, config.seed);
}

IdentificationResult identify(const ExperimentConfig& config, const ExperimentData& data, const BasisSet& basis,
                              bool run_lm) {
  const auto lines = config.band.lines();
  IdentificationResult out;
  Dimensions dims{config.n_s, data.estimation.inputs(), data.estimation.outputs(), basis.size(), 0};
  out.mask = config.free_F ? ParameterMask::all_free(dims) : ParameterMask::defaults(dims);

  FnsiOptions fo;
  fo.n_s = config.n_s;
  fo.block_rows = config.block_rows;
  fo.mask = out.mask;
  out.fnsi = fnsi_identify(data.estimation, basis, config.band, fo);
  out.model = out.fnsi.model;

  ValidationOptions vo;
  vo.warmup_periods = config.warmup_periods;
  out.initial_validation = validate_model(out.fnsi.model, data.validation, lines, vo);

  if (run_lm) {
    auto setup = make_cost_setup(data.estimation, lines, out.fnsi.model, out.mask);
    setup.warmup_periods = config.warmup_periods;
    LmValidation val{&data.validation, lines, vo};
    out.lm = lm_optimize(pack_parameters(out.fnsi.model, out.mask), setup, val, config.lm);
    out.model = out.lm->model;
    out.final_validation = validate_model(out.model, data.validation, lines, vo);
  } else {
    out.final_validation = out.initial_validation;
  }

  try {
    const auto cm = to_continuous(out.model);
    out.modes = modal_parameters(cm.A);
    RatioMap map = config.ratio;
    if (map.row < 0) map.row = basis.empty() ? 0 : basis.terms.front().channel;
    out.coefficients = nonlinear_coefficients(cm, lines, config.N, map);
  } catch (const Error& e) {
    out.extraction_error = e.what();
  }
  return out;
}

IdentificationResult identify(const ExperimentConfig& config, const ExperimentData& data) {
  return identify(config, data, config.basis, config.run_lm);
}

std::vector<DegreeScanEntry> degree_scan(const ExperimentConfig& config, const ExperimentData& data,
                                         const std::vector<std::vector<int>>& sets, bool run_lm) {
  std::vector<DegreeScanEntry> out;
  for (const auto& set : sets) {
    DegreeScanEntry e;
    e.degrees = set;
    const auto basis = BasisSet::polynomial(nl_channel(config), set);
    Dimensions dims{config.n_s, data.estimation.inputs(), data.estimation.outputs(), basis.size(), 0};
    e.parameters = (config.free_F ? ParameterMask::all_free(dims) : ParameterMask::defaults(dims)).free_count();
    try {
      const auto res = identify(config, data, basis, run_lm);
      e.initial_rms = res.initial_validation.rms;
      e.final_rms = res.final_validation.rms;
    } catch (const Error& err) {
      e.initial_rms = e.final_rms = std::numeric_limits<double>::infinity();
      e.error = err.what();
    }
    out.push_back(e);
  }
  return out;
}

std::vector<std::string> physical_labels(const ExperimentConfig& config) {
  std::vector<std::string> labels;
  for (int k = 1; k <= config.n_s / 2; ++k) {
    labels.push_back("f" + std::to_string(k) + "_hz");
    labels.push_back("zeta" + std::to_string(k));
  }
  for (const auto& t : config.basis.terms) labels.push_back("c:" + t.label());
  return labels;
}

EnsembleResult run_monte_carlo(const ExperimentConfig& config, int R) {
  if (!config.synthetic) throw ConfigError("montecarlo: requires a synthetic data source");
  const TimeRecord validation = synthetic_validation(config);
  const auto labels = physical_labels(config);
  const int n_modes = config.n_s / 2;
  auto run = [&](int, std::uint64_t seed) {
    ExperimentData data = synthetic_estimation(config, seed);
    data.validation = validation;
    const auto res = identify(config, data);
    if (!res.modes || !res.coefficients) throw NumericalError("extraction failed: " + res.extraction_error);
    if (static_cast<int>(res.modes->modes.size()) != n_modes) {
      throw NumericalError("expected " + std::to_string(n_modes) + " oscillatory modes, found " +
                           std::to_string(res.modes->modes.size()));
    }
    Realization r;
    r.theta = pack_parameters(res.model, res.mask);
    r.physical.resize(static_cast<Eigen::Index>(labels.size()));
    Eigen::Index i = 0;
    for (const auto& m : res.modes->modes) {
      r.physical[i++] = m.frequency_hz;
      r.physical[i++] = m.damping_ratio;
    }
    for (const auto& c : res.coefficients->terms) r.physical[i++] = c.average_real;
    return r;
  };
  Dimensions dims{config.n_s, config.system.inputs(), static_cast<int>(config.system.outputs().size()),
                  config.basis.size(), 0};
  const auto mask = config.free_F ? ParameterMask::all_free(dims) : ParameterMask::defaults(dims);
  return monte_carlo(run, R, config.seed, parameter_labels(dims, mask), labels);
}

json extraction_report(const GreyBoxModel& model, const RatioMap& ratio, const std::vector<int>& lines, int N,
                       const std::filesystem::path& dir, int force_points, double y_max) {
  const auto cm = to_continuous(model);
  const auto modes = modal_parameters(cm.A);
  RatioMap map = ratio;
  if (map.row < 0) map.row = model.basis.empty() ? 0 : model.basis.terms.front().channel;
  const auto coeffs = nonlinear_coefficients(cm, lines, N, map);
  json report = physical_report(modes, coeffs);
  report["ratio_map"] = {{"row", map.row}, {"column", map.column}};
  if (!dir.empty()) {
    write_coefficients_csv(dir / "coefficients.csv", coeffs);
    bool single_channel = !model.basis.empty();
    for (const auto& t : model.basis.terms) {
      single_channel = single_channel && t.signal == BasisSignal::displacement &&
                       t.channel == model.basis.terms.front().channel;
    }
    if (single_channel && y_max > 0.0) {
      const Vector grid = Vector::LinSpaced(force_points, -y_max, y_max);
      std::vector<double> c;
      for (const auto& t : coeffs.terms) c.push_back(t.average_real);
      write_force_curve_csv(dir / "force_curve.csv", grid, restoring_force_curve(c, model.basis, grid));
    }
  }
  return report;
}

void write_identification(const std::filesystem::path& dir, const ExperimentConfig& config,
                          const ExperimentData& data, const IdentificationResult& result) {
  std::filesystem::create_directories(dir);
  const auto lines = config.band.lines();
  save_model(dir / "fnsi_model.json", result.fnsi.model, result.mask);
  write_json_file(dir / "fnsi_diagnostics.json", result.fnsi.diagnostics);
  save_model(dir / "model.json", result.model, result.mask);
  if (result.lm) write_trace_csv(dir / "lm_trace.csv", *result.lm);

  json val = {{"initial_rms", result.initial_validation.rms},
              {"initial_relative_rms", result.initial_validation.relative_rms},
              {"final_rms", result.final_validation.rms},
              {"final_relative_rms", result.final_validation.relative_rms},
              {"status", to_string(result.final_validation.status)}};
  if (result.lm) {
    val["lm_status"] = result.lm->status;
    val["selected_iteration"] = result.lm->selected_iteration;
    val["accepted_costs"] = result.lm->accepted_costs;
  }
  write_json_file(dir / "validation.json", val);
  if (result.initial_validation.ok()) {
    write_spectrum_csv(dir / "initial_error_spectrum.csv", result.initial_validation.error_spectrum, config.fs);
  }
  if (result.final_validation.ok()) {
    write_spectrum_csv(dir / "error_spectrum.csv", result.final_validation.error_spectrum, config.fs);
  }

  const auto spectra = dft(data.estimation, lines);
  write_spectrum_csv(dir / "output_spectrum.csv", spectra.Y, config.fs);
  if (data.estimation.inputs() == 1) {
    const auto frf = estimate_frf(spectra.U, spectra.Y);
    SpectrumSet H = spectra.Y;
    H.values = frf.H;
    write_spectrum_csv(dir / "frf.csv", H, config.fs);
  }
  if (data.estimation.P >= 2) {
    const auto noise = noise_variance(data.estimation, lines);
    std::vector<std::vector<double>> rows;
    for (Eigen::Index c = 0; c < noise.variance.rows(); ++c) {
      for (std::size_t k = 0; k < lines.size(); ++k) {
        rows.push_back({static_cast<double>(lines[k]), lines[k] * config.fs / config.N, static_cast<double>(c + 1),
                        noise.variance(c, static_cast<Eigen::Index>(k))});
      }
    }
    write_table_csv(dir / "noise_variance.csv", {"line", "freq_hz", "channel", "variance"}, rows);
  }

  json phys;
  try {
    const int ch = result.model.basis.empty() ? 0 : result.model.basis.terms.front().channel;
    const double y_max = data.estimation.y.row(ch).cwiseAbs().maxCoeff();
    phys = extraction_report(result.model, config.ratio, lines, config.N, dir, config.force_points, y_max);
  } catch (const Error& e) {
    phys = {{"error", e.what()}};
  }
  write_json_file(dir / "physical_report.json", phys);
}

void write_degree_scan(const std::filesystem::path& path, const std::vector<DegreeScanEntry>& scan) {
  auto out = open_text(path);
  out << "degrees,parameters,initial_rms,final_rms,error\n";
  for (const auto& e : scan) {
    std::string deg;
    for (std::size_t i = 0; i < e.degrees.size(); ++i) deg += (i ? " " : "") + std::to_string(e.degrees[i]);
    out << deg << ',' << e.parameters << ',' << e.initial_rms << ',' << e.final_rms << ',' << csv_quote(e.error)
        << '\n';
  }
}

void write_ensemble(const std::filesystem::path& dir, const EnsembleResult& ensemble) {
  std::filesystem::create_directories(dir);
  write_json_file(dir / "ensemble_report.json", ensemble_report(ensemble));
  if (ensemble.successes() < 2) return;
  auto write_stats = [&](const std::filesystem::path& path, const std::vector<ParameterStats>& stats) {
    auto out = open_text(path);
    out << "parameter,mean,std_x100,std_over_mean_percent\n";
    for (const auto& s : stats) {
      out << csv_quote(s.label) << ',' << s.mean << ',' << 100.0 * s.std << ',' << s.ratio_percent << '\n';
    }
  };
  write_stats(dir / "parameter_stats.csv", ensemble_stats(ensemble.theta_samples(), ensemble.parameter_labels));
  write_stats(dir / "physical_stats.csv", ensemble_stats(ensemble.physical_samples(), ensemble.physical_labels));

  const auto corr = correlation_matrix(ensemble.theta_samples());
  auto out = open_text(dir / "correlation.csv");
  auto label = [&](int idx) {
    return ensemble.parameter_labels.empty() ? "p" + std::to_string(idx + 1)
                                             : ensemble.parameter_labels[static_cast<std::size_t>(idx)];
  };
  out << "parameter";
  for (int idx : corr.included) out << ',' << csv_quote(label(idx));
  out << '\n';
  for (std::size_t r = 0; r < corr.included.size(); ++r) {
    out << csv_quote(label(corr.included[r]));
    for (std::size_t c = 0; c < corr.included.size(); ++c) {
      out << ',' << corr.matrix(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    }
    out << '\n';
  }
}

}  // namespace greybox
