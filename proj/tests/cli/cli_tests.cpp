#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <sys/wait.h>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

const fs::path kConfigs = GREYBOX_CONFIG_DIR;

// Runs the CLI with the given arguments and returns its exit status.
int run(const std::string& args) {
  const std::string cmd = std::string("\"") + GREYBOX_CLI_PATH + "\" " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "greybox_cli_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

const std::string kSmoke = q(kConfigs / "smoke.json");

}  // namespace

TEST_CASE("help and argument errors") {
  CHECK(run("--help") == 0);
  CHECK(run("identify --help") == 0);
  CHECK(run("") == 2);
  CHECK(run("bogus") == 2);
  CHECK(run("generate --config /nonexistent/cfg.json") == 2);
  CHECK(run("generate --config " + kSmoke + " --no-such-flag") == 2);
}

TEST_CASE("invalid configurations exit with 2") {
  const auto dir = scratch("bad_config");
  auto j = nlohmann::json::parse(slurp(kConfigs / "smoke.json"));
  j["model"]["order"] = 4;
  std::ofstream(dir / "unknown_key.json") << j.dump();
  CHECK(run("generate --config " + q(dir / "unknown_key.json") + " --out " + q(dir / "out")) == 2);
  std::ofstream(dir / "syntax.json") << "{ \"system\": ";
  CHECK(run("identify --config " + q(dir / "syntax.json")) == 2);
  CHECK(run("identify --config " + kSmoke + " --degrees 1:3 --out " + q(dir / "out")) == 2);
}

TEST_CASE("generate, identify, simulate, validate and extract") {
  const auto dir = scratch("pipeline");
  REQUIRE(run("generate --config " + kSmoke + " --out " + q(dir / "gen")) == 0);
  CHECK(fs::exists(dir / "gen" / "estimation.csv"));
  CHECK(fs::exists(dir / "gen" / "validation.csv"));

  REQUIRE(run("identify --config " + kSmoke + " --skip-lm --out " + q(dir / "fnsi")) == 0);
  CHECK(fs::exists(dir / "fnsi" / "fnsi_model.json"));
  CHECK_FALSE(fs::exists(dir / "fnsi" / "lm_trace.csv"));

  REQUIRE(run("identify --config " + kSmoke + " --out " + q(dir / "id")) == 0);
  for (const char* f : {"model.json", "lm_trace.csv", "validation.json", "physical_report.json", "coefficients.csv"}) {
    CAPTURE(f);
    CHECK(fs::exists(dir / "id" / f));
  }
  const auto model = q(dir / "id" / "model.json");

  CHECK(run("simulate --model " + model + " --input " + q(dir / "gen" / "validation.csv") + " --output " +
            q(dir / "sim.csv")) == 0);
  CHECK(fs::file_size(dir / "sim.csv") > 0);

  REQUIRE(run("validate --model " + model + " --record " + q(dir / "gen" / "validation.csv") + " --out " +
              q(dir / "val")) == 0);
  const auto v = nlohmann::json::parse(slurp(dir / "val" / "validation.json"));
  const auto id_v = nlohmann::json::parse(slurp(dir / "id" / "validation.json"));
  CHECK(v["rms"].get<double>() == doctest::Approx(id_v["final_rms"].get<double>()).epsilon(1e-9));

  REQUIRE(run("extract --model " + model + " --config " + kSmoke + " --out " + q(dir / "ext")) == 0);
  const auto rep = nlohmann::json::parse(slurp(dir / "ext" / "physical_report.json"));
  CHECK(rep["modes"][0]["frequency_hz"].get<double>() == doctest::Approx(20.0).epsilon(0.01));
  CHECK(rep["coefficients"][0]["average"].get<double>() == doctest::Approx(2.0).epsilon(0.05));

  CHECK(run("validate --model " + model + " --record " + q(dir / "gen" / "validation.csv")) == 2);
}

TEST_CASE("a model without a real logarithm is a numerical failure") {
  const auto dir = scratch("numerical");
  REQUIRE(run("identify --config " + kSmoke + " --skip-lm --out " + q(dir / "id")) == 0);
  auto j = nlohmann::json::parse(slurp(dir / "id" / "fnsi_model.json"));
  j["A"] = {{-0.5, 0.0}, {0.0, 0.3}};
  std::ofstream(dir / "bad_model.json") << j.dump();
  CHECK(run("extract --model " + q(dir / "bad_model.json") + " --lines 1:20 --N 1024 --out " + q(dir / "ext")) == 3);
}

TEST_CASE("degree scan") {
  const auto dir = scratch("scan");
  REQUIRE(run("identify --config " + kSmoke + " --skip-lm --degrees 2:3 --out " + q(dir)) == 0);
  std::ifstream in(dir / "degree_scan.csv");
  int rows = 0;
  for (std::string line; std::getline(in, line);) ++rows;
  CHECK(rows == 3);
}

TEST_CASE("ensemble outputs are reproducible") {
  const auto a = scratch("mc_a"), b = scratch("mc_b");
  REQUIRE(run("montecarlo --config " + kSmoke + " -R 5 --out " + q(a)) == 0);
  REQUIRE(run("montecarlo --config " + kSmoke + " -R 5 --out " + q(b)) == 0);
  for (const char* f : {"ensemble_report.json", "parameter_stats.csv", "physical_stats.csv", "correlation.csv"}) {
    CAPTURE(f);
    REQUIRE(fs::exists(a / f));
    CHECK(slurp(a / f) == slurp(b / f));
  }
  const auto report = nlohmann::json::parse(slurp(a / "ensemble_report.json"));
  CHECK(report["successes"] == 5);

  const auto g1 = scratch("gen_a"), g2 = scratch("gen_b");
  REQUIRE(run("generate --config " + kSmoke + " --seed 11 --snr 40 --out " + q(g1)) == 0);
  REQUIRE(run("generate --config " + kSmoke + " --seed 11 --snr 40 --out " + q(g2)) == 0);
  CHECK(slurp(g1 / "estimation.csv") == slurp(g2 / "estimation.csv"));
}
