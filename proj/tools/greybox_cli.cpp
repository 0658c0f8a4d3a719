// Command-line front end: generate, identify, simulate, extract, montecarlo, validate.
// Exit codes: 0 success, 2 configuration or dimension error, 3 numerical failure.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "greybox/experiment.hpp"
#include "greybox/model_io.hpp"
#include "greybox/record_io.hpp"

namespace {

using namespace greybox;

struct Overrides {
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<double> snr_db;
  std::optional<double> rms;
  std::optional<int> n_s;
};

void add_overrides(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--out", o.out, "Output directory (overrides output_dir)");
  cmd->add_option("--seed", o.seed, "Excitation seed");
  cmd->add_option("--snr", o.snr_db, "Output SNR in dB for synthetic data");
  cmd->add_option("--rms", o.rms, "Excitation RMS");
  cmd->add_option("--n-s", o.n_s, "Model order");
}

ExperimentConfig load_config(const std::string& path, const Overrides& o) {
  auto c = load_experiment_config(path);
  if (!o.out.empty()) c.output_dir = o.out;
  if (o.seed) c.seed = *o.seed;
  if (o.snr_db) c.snr_db = *o.snr_db;
  if (o.rms) c.rms = *o.rms;
  if (o.n_s) c.n_s = *o.n_s;
  c.validate();
  return c;
}

std::vector<int> parse_lines(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw ConfigError("--lines: expected k_min:k_max");
  ExcitedBand band;
  try {
    band.k_min = std::stoi(text.substr(0, colon));
    band.k_max = std::stoi(text.substr(colon + 1));
  } catch (const std::exception&) {
    throw ConfigError("--lines: expected k_min:k_max");
  }
  return band.lines();
}

void print_summary(const IdentificationResult& r) {
  std::printf("FNSI validation RMS   %.6e\n", r.initial_validation.rms);
  if (r.lm) {
    std::printf("LM   validation RMS   %.6e (iterate %d, %s)\n", r.final_validation.rms, r.lm->selected_iteration,
                r.lm->status.c_str());
  }
  if (r.modes) {
    for (const auto& m : r.modes->modes) {
      std::printf("mode  f = %.4f Hz  zeta = %.4f %%\n", m.frequency_hz, 100.0 * m.damping_ratio);
    }
  }
  if (r.coefficients) {
    for (const auto& c : r.coefficients->terms) {
      std::printf("coef  %-10s %.6g  (|Im|/|Re| %.3g)\n", c.label.c_str(), c.average_real, c.im_re_ratio);
    }
  }
  if (!r.extraction_error.empty()) std::printf("extraction: %s\n", r.extraction_error.c_str());
}

int run(int argc, char** argv) {
  CLI::App app{"Grey-box nonlinear state-space identification"};
  app.require_subcommand(1);

  Overrides o;
  std::string config;

  auto* gen = app.add_subcommand("generate", "Synthesize estimation and validation records from a truth system");
  gen->add_option("--config", config, "Experiment JSON")->required()->check(CLI::ExistingFile);
  add_overrides(gen, o);

  bool skip_lm = false;
  std::string degrees;
  auto* ident = app.add_subcommand("identify", "FNSI initialisation, LM refinement and physical extraction");
  ident->add_option("--config", config, "Experiment JSON")->required()->check(CLI::ExistingFile);
  ident->add_flag("--skip-lm", skip_lm, "Stop after the subspace estimate");
  ident->add_option("--degrees", degrees, "Polynomial degree scan, e.g. 2:5 or 2,3");
  add_overrides(ident, o);

  std::string model_path, record_path, out_path;
  int transient = 3;
  auto* sim = app.add_subcommand("simulate", "Simulate a model on the input of a record");
  sim->add_option("--model", model_path, "Model JSON")->required()->check(CLI::ExistingFile);
  sim->add_option("--input", record_path, "Record CSV whose input is used")->required()->check(CLI::ExistingFile);
  sim->add_option("--output", out_path, "Output record CSV")->required();
  sim->add_option("--transient", transient, "Leading periods discarded")->check(CLI::NonNegativeNumber);

  std::string lines_text;
  int N = 0;
  int row = -1;
  int column = 0;
  auto* ext = app.add_subcommand("extract", "Modal parameters and nonlinear coefficients of a model");
  ext->add_option("--model", model_path, "Model JSON")->required()->check(CLI::ExistingFile);
  ext->add_option("--config", config, "Experiment JSON supplying band and N")->check(CLI::ExistingFile);
  ext->add_option("--lines", lines_text, "Processed lines k_min:k_max (without --config)");
  ext->add_option("--N", N, "Period length (without --config)");
  ext->add_option("--row", row, "Transfer-matrix row for the coefficient ratio");
  ext->add_option("--column", column, "Linear input column for the coefficient ratio");
  ext->add_option("--out", out_path, "Output directory")->required();

  int realizations = 0;
  auto* mc = app.add_subcommand("montecarlo", "Ensemble over independent multisine realizations");
  mc->add_option("--config", config, "Experiment JSON")->required()->check(CLI::ExistingFile);
  mc->add_option("--realizations,-R", realizations, "Realization count (overrides config)");
  add_overrides(mc, o);

  auto* val = app.add_subcommand("validate", "Validation RMS and error spectrum of a model on a record");
  val->add_option("--model", model_path, "Model JSON")->required()->check(CLI::ExistingFile);
  val->add_option("--record", record_path, "Validation record CSV")->required()->check(CLI::ExistingFile);
  val->add_option("--lines", lines_text, "Lines k_min:k_max for the error spectrum");
  val->add_option("--transient", transient, "Warm-up periods before comparison")->check(CLI::NonNegativeNumber);
  val->add_option("--out", out_path, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (gen->parsed()) {
    const auto c = load_config(config, o);
    if (!c.synthetic) throw ConfigError("generate: the configuration must describe a synthetic system");
    const auto data = acquire_data(c);
    write_record_csv(c.output_dir / "estimation.csv", data.estimation);
    write_record_csv(c.output_dir / "validation.csv", data.validation);
    write_json_file(c.output_dir / "config_used.json", c.to_json());
    std::printf("wrote %s (P=%d) and validation.csv, output RMS %.6g, noise sigma %.3g\n",
                (c.output_dir / "estimation.csv").c_str(), data.estimation.P, rms(data.estimation.y),
                data.noise_sigma);
    return 0;
  }

  if (ident->parsed()) {
    auto c = load_config(config, o);
    const auto data = acquire_data(c);
    const auto result = identify(c, data, c.basis, c.run_lm && !skip_lm);
    write_identification(c.output_dir, c, data, result);
    write_json_file(c.output_dir / "config_used.json", c.to_json());
    print_summary(result);
    if (!degrees.empty()) {
      const auto scan = degree_scan(c, data, parse_degree_sets(degrees), c.run_lm && !skip_lm);
      write_degree_scan(c.output_dir / "degree_scan.csv", scan);
      for (const auto& e : scan) {
        std::string d;
        for (int p : e.degrees) d += std::to_string(p) + " ";
        std::printf("degrees { %s}  params %d  validation RMS %.6e\n", d.c_str(), e.parameters, e.final_rms);
      }
    }
    return 0;
  }

  if (sim->parsed()) {
    const auto model = load_model(model_path);
    const auto rec = read_record_csv(record_path);
    const auto res = run_to_steady_state(model, rec.u.leftCols(rec.N), transient, rec.P);
    if (res.status != SimStatus::ok) throw NumericalError(std::string("simulate: ") + to_string(res.status));
    write_record_csv(out_path, res.record);
    std::printf("wrote %s, steadiness %.3g%s\n", out_path.c_str(), res.steadiness,
                res.warning ? " (warning: not yet periodic)" : "");
    return 0;
  }

  if (ext->parsed()) {
    const auto model = load_model(model_path);
    std::vector<int> lines;
    RatioMap map{row, column};
    if (!config.empty()) {
      const auto c = load_experiment_config(config);
      lines = c.band.lines();
      N = c.N;
      if (row < 0) map.row = c.ratio.row;
      if (column == 0) map.column = c.ratio.column;
    } else {
      if (lines_text.empty() || N <= 0) throw ConfigError("extract: give --config, or --lines and --N");
      lines = parse_lines(lines_text);
    }
    const auto report = extraction_report(model, map, lines, N, out_path, 101, 0.0);
    write_json_file(std::filesystem::path(out_path) / "physical_report.json", report);
    std::printf("%s\n", report.dump(2).c_str());
    return 0;
  }

  if (mc->parsed()) {
    const auto c = load_config(config, o);
    const int R = realizations > 0 ? realizations : c.realizations;
    const auto ensemble = run_monte_carlo(c, R);
    write_ensemble(c.output_dir, ensemble);
    std::printf("%d of %d realizations succeeded; reports in %s\n", ensemble.successes(), R, c.output_dir.c_str());
    return 0;
  }

  if (val->parsed()) {
    const auto model = load_model(model_path);
    const auto rec = read_record_csv(record_path);
    const auto lines = lines_text.empty() ? std::vector<int>{} : parse_lines(lines_text);
    ValidationOptions vo;
    vo.warmup_periods = transient;
    const auto res = validate_model(model, rec, lines, vo);
    if (!res.ok()) throw NumericalError(std::string("validate: simulation ") + to_string(res.status));
    std::filesystem::create_directories(out_path);
    write_json_file(std::filesystem::path(out_path) / "validation.json",
                    {{"rms", res.rms}, {"relative_rms", res.relative_rms}});
    if (!lines.empty()) write_spectrum_csv(std::filesystem::path(out_path) / "error_spectrum.csv", res.error_spectrum, rec.fs);
    std::printf("validation RMS %.6e (relative %.3e)\n", res.rms, res.relative_rms);
    return 0;
  }
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const greybox::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const greybox::DimensionError& e) {
    std::cerr << "dimension error: " << e.what() << '\n';
    return 2;
  } catch (const greybox::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 3;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
}
