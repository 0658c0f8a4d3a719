#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "fixtures.hpp"
#include "greybox/model_io.hpp"
#include "greybox/record_io.hpp"

using namespace greybox;

namespace {

std::string error_of(const nlohmann::json& j) {
  try {
    ExperimentConfig::from_json(j);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

nlohmann::json smoke_json() { return read_json_file(GREYBOX_TEST_CONFIG_DIR "/smoke.json"); }

}  // namespace

TEST_SUITE("experiment") {

TEST_CASE("shipped configurations load") {
  for (const char* name : {"smoke.json", "silverbox_like.json", "beam_like.json"}) {
    CAPTURE(name);
    const auto c = load_experiment_config(std::filesystem::path(GREYBOX_TEST_CONFIG_DIR) / name);
    CHECK_NOTHROW(c.validate());
  }
  const auto s = load_experiment_config(GREYBOX_TEST_CONFIG_DIR "/silverbox_like.json");
  CHECK(s.fs == 2441.0);
  CHECK(s.N == 8192);
  CHECK(s.periods == 30);
  CHECK(s.transient == 5);
  CHECK(s.band.k_max == 1006);
  const auto b = load_experiment_config(GREYBOX_TEST_CONFIG_DIR "/beam_like.json");
  CHECK(b.system.dofs() == 7);
  CHECK(ParameterMask::defaults({b.n_s, 1, 7, b.basis.size(), 0}).free_count() == 35);
}

TEST_CASE("unknown keys and wrong types are named") {
  auto j = smoke_json();
  j["model"]["n_S"] = 3;
  CHECK(error_of(j).find("model.n_S: unknown key") != std::string::npos);
  j = smoke_json();
  j["excitation"]["N"] = "big";
  CHECK(error_of(j).find("excitation.N") != std::string::npos);
  CHECK(error_of(j).find("wrong type") != std::string::npos);
  j = smoke_json();
  j["excitation"]["transient"] = 3;
  CHECK(error_of(j).find("transient") != std::string::npos);
  j = smoke_json();
  j["excitation"]["band_hz"] = {1, 400};
  CHECK(error_of(j).find("below fs/2") != std::string::npos);
  j = smoke_json();
  j["system"]["type"] = "plate";
  CHECK(error_of(j).find("sdof or mdof") != std::string::npos);
}

TEST_CASE("JSON syntax errors carry the line") {
  const auto dir = std::filesystem::temp_directory_path() / "greybox_cfg";
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "bad.json") << "{\n  \"excitation\": {\n    \"fs\": 12,,\n  }\n}\n";
  try {
    load_experiment_config(dir / "bad.json");
    FAIL("expected a parse error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
}

TEST_CASE("round trip through to_json") {
  const auto c = load_experiment_config(GREYBOX_TEST_CONFIG_DIR "/beam_like.json");
  const auto again = ExperimentConfig::from_json(c.to_json());
  CHECK(again.to_json() == c.to_json());
}

TEST_CASE("degree set parsing") {
  const auto sets = parse_degree_sets("2:5");
  REQUIRE(sets.size() == 4);
  CHECK(sets[0] == std::vector<int>{2});
  CHECK(sets[3] == std::vector<int>{2, 3, 4, 5});
  CHECK(parse_degree_sets("2,3") == std::vector<std::vector<int>>{{2, 3}});
  CHECK_THROWS_AS(parse_degree_sets("1:3"), ConfigError);
  CHECK_THROWS_AS(parse_degree_sets("x"), ConfigError);
  CHECK_THROWS_AS(parse_degree_sets(""), ConfigError);
}

TEST_CASE("synthetic acquisition is seeded and consistent") {
  auto c = load_experiment_config(GREYBOX_TEST_CONFIG_DIR "/smoke.json");
  const auto a = acquire_data(c), b = acquire_data(c);
  CHECK(a.estimation.y == b.estimation.y);
  CHECK(a.estimation.P == c.periods - c.transient);
  CHECK(a.validation.P == c.validation_periods);
  CHECK(a.estimation.u.leftCols(c.N) != a.validation.u.leftCols(c.N));
  c.snr_db = 20.0;
  const auto n = acquire_data(c);
  CHECK(n.noise_sigma == doctest::Approx(rms(a.estimation.y) * 0.1).epsilon(0.05));
}

TEST_CASE("file sources hold out the last period") {
  auto c = load_experiment_config(GREYBOX_TEST_CONFIG_DIR "/smoke.json");
  const auto synth = acquire_data(c);
  const auto dir = std::filesystem::temp_directory_path() / "greybox_cfg_file";
  std::filesystem::create_directories(dir);
  TimeRecord rec = synth.estimation;  // 2 periods
  write_record_csv(dir / "meas.csv", rec);
  auto j = smoke_json();
  j["data"] = {{"source", "file"}, {"path", "meas.csv"}};
  j["excitation"]["transient"] = 0;
  j["excitation"]["periods"] = 2;
  std::ofstream(dir / "cfg.json") << j.dump(2);
  const auto fc = load_experiment_config(dir / "cfg.json");
  CHECK_FALSE(fc.synthetic);
  const auto d = acquire_data(fc);
  CHECK(d.estimation.P == 1);
  CHECK(d.validation.P == 1);
  CHECK(d.validation.y == rec.y.rightCols(rec.N));
}

TEST_CASE("identification on the smoke configuration") {
  const auto c = load_experiment_config(GREYBOX_TEST_CONFIG_DIR "/smoke.json");
  const auto data = acquire_data(c);
  const auto r = identify(c, data);
  REQUIRE(r.lm.has_value());
  CHECK(r.final_validation.rms <= r.initial_validation.rms);
  REQUIRE(r.modes.has_value());
  CHECK(r.modes->modes.at(0).frequency_hz == doctest::Approx(20.0).epsilon(0.01));
  REQUIRE(r.coefficients.has_value());
  CHECK(r.coefficients->terms.at(0).average_real == doctest::Approx(2.0).epsilon(0.05));

  const auto dir = std::filesystem::temp_directory_path() / "greybox_identify";
  std::filesystem::remove_all(dir);
  write_identification(dir, c, data, r);
  for (const char* f : {"fnsi_model.json", "model.json", "lm_trace.csv", "validation.json", "error_spectrum.csv",
                        "frf.csv", "physical_report.json", "coefficients.csv", "force_curve.csv"}) {
    CAPTURE(f);
    CHECK(std::filesystem::exists(dir / f));
  }
  const auto m = load_model(dir / "model.json");
  CHECK(m.A == r.model.A);
}

TEST_CASE("degree scan reports every set") {
  const auto c = load_experiment_config(GREYBOX_TEST_CONFIG_DIR "/smoke.json");
  const auto data = acquire_data(c);
  const auto scan = degree_scan(c, data, parse_degree_sets("2:3"), false);
  REQUIRE(scan.size() == 2);
  CHECK(scan[0].parameters == 11);
  CHECK(scan[1].parameters == 13);
  // the truth is cubic, so adding the cubic term must help
  CHECK(scan[1].final_rms < scan[0].final_rms);
}

}  // TEST_SUITE
