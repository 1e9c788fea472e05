#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "test_util.hpp"

using namespace qwork;
using nlohmann::json;

namespace {

json base_config() {
  return json{
      {"system", {{"omega_q_hz", 6.541e9}, {"Omega_R_hz", 1.0e6}, {"psi_rad", kPi / 4.0}}},
      {"bath", {{"temperature_K", 0.14}}},
      {"meter", {{"kernel", "box"}, {"sigma", 1.0}}},
      {"run", {{"n_trials", 300}, {"master_seed", 42}}},
  };
}

std::string field_of(const std::exception& e) { return e.what(); }

}  // namespace

TEST_CASE("config: temperature converts to the natural inverse temperature") {
  const auto c = config_from_json(base_config());
  CHECK(c.beta == doctest::Approx(2.2422749).epsilon(1e-6));
  CHECK(c.rabi_ratio == doctest::Approx(1.0e6 / 6.541e9).epsilon(1e-12));
  CHECK(c.t_final_natural == doctest::Approx(2.0 * kPi / 3.0).epsilon(1e-12));
  CHECK(c.kernel == KernelShape::Box);
  CHECK(c.n_trials == 300);
  CHECK(c.master_seed == 42);
  // No sweep block: single-point grid at the configured beta*sigma.
  REQUIRE(c.grid.size() == 1);
  CHECK(c.grid[0] == doctest::Approx(c.beta * c.sigma_natural));
}

TEST_CASE("config: direct beta_natural path and natural time units") {
  json j = base_config();
  j["bath"] = {{"beta_natural", 1.5}};
  j["system"]["t_final"] = {{"value", 3.0}, {"units", "natural"}};
  const auto c = config_from_json(j);
  CHECK(c.beta == 1.5);
  CHECK(c.t_final_natural == 3.0);
}

TEST_CASE("config: seconds convert through the qubit frequency") {
  json j = base_config();
  j["system"]["t_final"] = {{"value", 1.0e-10}, {"units", "seconds"}};
  const auto c = config_from_json(j);
  CHECK(c.t_final_natural == doctest::Approx(2.0 * kPi * 6.541e9 * 1.0e-10).epsilon(1e-12));
}

TEST_CASE("config: field-specific validation failures") {
  auto expect_field = [](json j, const std::string& field) {
    try {
      (void)config_from_json(j);
      FAIL_CHECK("expected rejection for ", field);
    } catch (const ValidationError& e) {
      CHECK(field_of(e).find(field) != std::string::npos);
    }
  };
  json j = base_config();
  j["meter"].erase("sigma");
  expect_field(j, "meter.sigma");

  j = base_config();
  j["meter"]["kernel"] = "triangle";
  expect_field(j, "meter.kernel");

  j = base_config();
  j["bath"]["beta_natural"] = 2.0;  // both temperature and beta present
  expect_field(j, "bath");

  j = base_config();
  j["run"]["n_trials"] = 10;
  expect_field(j, "run.n_trials");

  j = base_config();
  j["system"].erase("omega_q_hz");
  expect_field(j, "system.omega_q_hz");
}

TEST_CASE("config: explicit and generated sweep grids") {
  json j = base_config();
  j["run"]["sweep"] = {{"axis", "beta_sigma"}, {"grid", {0.5, 1.0, 3.0}}};
  auto c = config_from_json(j);
  CHECK(c.axis == SweepAxis::BetaSigma);
  CHECK(c.grid == std::vector<double>{0.5, 1.0, 3.0});

  j["run"]["sweep"] = {{"axis", "rabi_ratio"}, {"min", 1e-4}, {"max", 1e-2},
                       {"points", 3}, {"log", true}};
  c = config_from_json(j);
  CHECK(c.axis == SweepAxis::RabiRatio);
  REQUIRE(c.grid.size() == 3);
  CHECK(c.grid[0] == doctest::Approx(1e-4).epsilon(1e-12));
  CHECK(c.grid[1] == doctest::Approx(1e-3).epsilon(1e-12));
  CHECK(c.grid[2] == doctest::Approx(1e-2).epsilon(1e-12));
}

TEST_CASE("load_config reports unreadable and malformed files") {
  CHECK_THROWS_AS((void)load_config("/nonexistent/qwork.json"), ParseError);
  const std::string path = "bad_config.json";
  std::ofstream(path) << "{ not json";
  CHECK_THROWS_AS((void)load_config(path), ParseError);
  std::remove(path.c_str());
}

TEST_CASE("sweep: regime column flips exactly once across the gap") {
  json j = base_config();
  j["run"]["sweep"] = {{"axis", "beta_sigma"}, {"grid", {0.5, 1.5, 3.0, 5.0}}};
  const auto cfg = config_from_json(j);
  const auto rows = sweep_sigma(cfg);
  REQUIRE(rows.size() == 4);
  int flips = 0;
  for (std::size_t i = 1; i < rows.size(); ++i)
    if (rows[i].regime != rows[i - 1].regime) ++flips;
  CHECK(flips == 1);
  CHECK(rows.front().regime == "nonoverlap");
  CHECK(rows.back().regime == "overlap");
  // Closed-form columns are populated only in their regime.
  CHECK_FALSE(std::isnan(rows.front().xi_closed_nonoverlap));
  CHECK(std::isnan(rows.front().xi_closed_overlap));
  CHECK(std::isnan(rows.back().xi_closed_nonoverlap));
  CHECK_FALSE(std::isnan(rows.back().xi_closed_overlap));
}

TEST_CASE("sweep: identical seeds give byte-identical csv output") {
  json j = base_config();
  j["run"]["sweep"] = {{"axis", "beta_sigma"}, {"grid", {0.5, 3.0}}};
  const auto cfg = config_from_json(j);
  std::ostringstream a, b;
  write_csv(sweep_sigma(cfg), cfg, "fingerprint", a);
  write_csv(sweep_sigma(cfg), cfg, "fingerprint", b);
  CHECK(a.str() == b.str());
  CHECK(!a.str().empty());

  // A different master seed must change the Monte Carlo columns.
  auto cfg2 = cfg;
  cfg2.master_seed = 43;
  std::ostringstream c;
  write_csv(sweep_sigma(cfg2), cfg2, "fingerprint", c);
  CHECK(a.str() != c.str());
}

TEST_CASE("csv format: preamble, header, and full-precision floats") {
  json j = base_config();
  j["run"]["sweep"] = {{"axis", "beta_sigma"}, {"grid", {0.5}}};
  const auto cfg = config_from_json(j);
  std::ostringstream out;
  write_csv(sweep_sigma(cfg), cfg, "abc", out);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "# qwork sweep v1");
  std::getline(in, line);
  CHECK(line.rfind("# config_hash=", 0) == 0);
  std::getline(in, line);
  CHECK(line == "# master_seed=42");
  std::getline(in, line);
  CHECK(line == "# n_trials=300");
  std::getline(in, line);
  CHECK(line == std::string(kCsvHeader));
  std::getline(in, line);
  // 14 columns; round-trip the first one at full precision.
  CHECK(std::count(line.begin(), line.end(), ',') == 13);
  CHECK(std::stod(line.substr(0, line.find(','))) == 0.5);
  CHECK(format_g17(0.1) == "0.10000000000000001");
}

TEST_CASE("quadrature-only mode leaves monte carlo columns empty") {
  json j = base_config();
  j["run"]["sweep"] = {{"axis", "beta_sigma"}, {"grid", {0.5}}};
  auto cfg = config_from_json(j);
  cfg.quadrature_only = true;
  const auto rows = sweep_sigma(cfg);
  REQUIRE(rows.size() == 1);
  CHECK(std::isnan(rows[0].xi_mc));
  CHECK(std::isnan(rows[0].jensen_slack));
  CHECK_FALSE(std::isnan(rows[0].xi_quadrature));
}

TEST_CASE("validation suite passes on defaults and flags the negative control") {
  auto cfg = config_from_json(base_config());
  cfg.n_trials = 20000;
  const auto rep = validate(cfg);
  for (const auto& item : rep.items) {
    INFO(item.name, " residual=", item.residual, " threshold=", item.threshold);
    CHECK(item.pass);
  }
  CHECK(rep.all_pass());
  const auto j = rep.to_json();
  CHECK(j["all_pass"].get<bool>());
  CHECK(j["checks"].size() == rep.items.size());

  const auto bad = validate(cfg, true);
  CHECK_FALSE(bad.all_pass());
  bool found = false;
  for (const auto& item : bad.items)
    if (item.name == "povm_completeness_injected_denormalized") {
      found = true;
      CHECK_FALSE(item.pass);
    }
  CHECK(found);
}

#ifdef QWORK_CLI_PATH
TEST_CASE("cli binary: exit codes and csv on stdout") {
  const std::string cli = QWORK_CLI_PATH;
  json j = base_config();
  j["run"]["sweep"] = {{"axis", "beta_sigma"}, {"grid", {0.5, 3.0}}};
  std::ofstream("cli_test_config.json") << j.dump(2);

  CHECK(std::system((cli + " sweep-sigma --config cli_test_config.json --trials 200"
                           " --out cli_test_out.csv > /dev/null 2>&1")
                        .c_str()) == 0);
  std::ifstream csv("cli_test_out.csv");
  std::string line;
  std::getline(csv, line);
  CHECK(line == "# qwork sweep v1");

  // Missing config file is a config error (exit 2).
  int rc = std::system((cli + " sweep-sigma --config missing.json > /dev/null 2>&1").c_str());
  CHECK(WEXITSTATUS(rc) == 2);

  // Wrong axis for the subcommand is a config error too.
  rc = std::system((cli + " sweep-rabi --config cli_test_config.json > /dev/null 2>&1").c_str());
  CHECK(WEXITSTATUS(rc) == 2);

  std::remove("cli_test_config.json");
  std::remove("cli_test_out.csv");
}
#endif
