#include "slfm/cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "slfm/csv.hpp"
#include "slfm/errors.hpp"
#include "slfm/fit.hpp"
#include "slfm/kalman.hpp"
#include "slfm/sim.hpp"

using slfm::Matrix;
using slfm::Vector;

namespace {

// Unique scratch directory per test case, removed on destruction.
struct TempDir {
  std::filesystem::path path;

  TempDir() {
    static int counter = 0;
    const auto ticks =
        std::chrono::steady_clock::now().time_since_epoch().count();
    path = std::filesystem::temp_directory_path() /
           ("slfm_cli_" + std::to_string(ticks) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(static_cast<bool>(in));
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  REQUIRE(static_cast<bool>(out));
  out << text;
}

// run_cli with stdout/stderr captured so test logs stay readable.
std::pair<int, std::string> run_quiet(const std::vector<std::string>& args) {
  std::ostringstream captured;
  auto* old_out = std::cout.rdbuf(captured.rdbuf());
  auto* old_err = std::cerr.rdbuf(captured.rdbuf());
  const int rc = slfm::run_cli(args);
  std::cout.rdbuf(old_out);
  std::cerr.rdbuf(old_err);
  return {rc, captured.str()};
}

// Pulls the number following "<label>: " out of a command log.
double parse_logged(const std::string& log, const std::string& label) {
  const auto at = log.find(label + ": ");
  REQUIRE(at != std::string::npos);
  return std::stod(log.substr(at + label.size() + 2));
}

const char* kPlainConfig = R"({
  "output_model": {
    "D": 1, "R": 1,
    "A": [1.0], "C": [1.0], "kappa": [1.0],
    "S": [[1.0]]
  },
  "force_priors": [
    {"kernel": "matern", "nu": 1.5, "lengthscale": 5.0, "variance": 1.0}
  ],
  "observation_noise": {"variance": 0.01},
  "grid": {"start": 0.0, "step": 0.1, "count": 40},
  "seed": 7
})";

const char* kSwitchConfig = R"({
  "output_model": {
    "D": 3, "R": 1,
    "A": [0.1, 0.1, 0.1],
    "C": [2.0, 3.0, 0.5],
    "kappa": [0.4, 1.0, 1.0],
    "S": [[1.0], [5.0], [1.0]]
  },
  "observation_noise": {"variance": 0.01},
  "slds": {
    "lengthscales": [2.0, 30.0],
    "nu": 1.5,
    "a": 0.98,
    "c": 0.5
  },
  "inference": {"I": 2, "J": 2},
  "grid": {"start": 0.0, "step": 0.5, "count": 80},
  "seed": 42
})";

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("csv: values round-trip bitwise and comments are skipped") {
  TempDir dir;
  const std::string path = dir.file("t.csv");
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::vector<double>> rows = {
      {0.0, 1.0 / 3.0, -2.718281828459045e-12},
      {0.25, 9.87654321098765432e101, nan},
      {1.0 / 7.0 + 1.0, -0.0, 5e-324}};
  slfm::write_csv(path, {"alpha", "beta"}, {"t", "a", "b"}, rows);

  const auto table = slfm::read_csv(path);
  REQUIRE(table.columns == std::vector<std::string>{"t", "a", "b"});
  REQUIRE(table.rows.size() == rows.size());
  for (size_t i = 0; i < rows.size(); ++i) {
    for (size_t j = 0; j < rows[i].size(); ++j) {
      if (std::isnan(rows[i][j])) {
        CHECK(std::isnan(table.rows[i][j]));
      } else {
        // Bitwise: 17 significant digits uniquely identify a double.
        CHECK(table.rows[i][j] == rows[i][j]);
      }
    }
  }
  // Comment lines plus the header precede the data rows.
  CHECK(table.lines[0] == 4);
  const std::string text = read_file(path);
  CHECK(text.find("# alpha\n") != std::string::npos);
}

TEST_CASE("csv: parse and shape errors carry line numbers") {
  TempDir dir;
  const std::string path = dir.file("bad.csv");

  write_file(path, "t,y_1\n0.0,1.0\n0.5,oops\n");
  CHECK_THROWS_WITH_AS(slfm::read_csv(path),
                       doctest::Contains("line 3"), slfm::DataError);

  write_file(path, "t,y_1\n0.0,1.0,9.0\n");
  CHECK_THROWS_WITH_AS(slfm::read_csv(path),
                       doctest::Contains("line 2"), slfm::DataError);

  write_file(path, "# only comments\n");
  CHECK_THROWS_AS(slfm::read_csv(path), slfm::DataError);
  CHECK_THROWS_AS(slfm::read_csv(dir.file("absent.csv")), slfm::DataError);
}

TEST_CASE("csv: grid extraction validates shape and time ordering") {
  slfm::CsvTable table;
  table.columns = {"t", "y_1"};
  table.rows = {{0.0, 1.0}, {1.0, 2.0}, {1.0, 3.0}};
  table.lines = {2, 3, 4};
  CHECK_THROWS_WITH_AS(slfm::grid_from_table(table, 1),
                       doctest::Contains("line 4"), slfm::DataError);

  table.rows[2][0] = 2.0;
  const auto grid = slfm::grid_from_table(table, 1);
  CHECK(grid.size() == 3);
  CHECK(grid.times(2) == 2.0);
  CHECK(grid.y[1](0) == 2.0);

  CHECK_THROWS_AS(slfm::grid_from_table(table, 2), slfm::DataError);
  table.columns[0] = "time";
  CHECK_THROWS_AS(slfm::grid_from_table(table, 1), slfm::DataError);
  table.columns[0] = "t";
  table.rows[0][0] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(slfm::grid_from_table(table, 1), slfm::DataError);
}

TEST_CASE("config: a full switching document parses into every field") {
  const auto cfg = slfm::parse_config(kSwitchConfig);
  CHECK(cfg.output.D == 3);
  CHECK(cfg.output.R == 1);
  CHECK(cfg.output.S(1, 0) == 5.0);
  CHECK(cfg.noise_scalar);
  CHECK(cfg.noise_variance == 0.01);
  REQUIRE(cfg.slds.present);
  REQUIRE(cfg.slds.lengthscales.size() == 2);
  CHECK(cfg.slds.lengthscales[1] == 30.0);
  // Scalar a/c broadcast to one entry per regular model.
  REQUIRE(cfg.slds.a.size() == 2);
  CHECK(cfg.slds.a(0) == 0.98);
  CHECK(cfg.slds.c(1) == 0.5);
  CHECK(cfg.budget_I == 2);
  CHECK(cfg.budget_J == 2);
  CHECK(cfg.grid_present);
  CHECK(cfg.grid_count == 80);
  CHECK(cfg.seed == 42);
  CHECK(cfg.switch_threshold == 0.2);  // default

  const auto bank = slfm::bank_from_config(cfg);
  CHECK(bank.model_count() == 3);
  const Matrix Pi = slfm::switch_prior_from_config(cfg);
  CHECK(Pi.rows() == 3);
  CHECK(Pi(0, 0) == 0.98);
  const Vector times = slfm::grid_times_from_config(cfg);
  CHECK(times.size() == 80);
  CHECK(times(1) == 0.5);

  const auto plain = slfm::parse_config(kPlainConfig);
  CHECK_FALSE(plain.slds.present);
  REQUIRE(plain.force_priors.size() == 1);
  CHECK(plain.force_priors[0].lengthscale == 5.0);
  const auto model = slfm::model_from_config(plain);
  CHECK(model.layout.outputs() == 1);
  CHECK(model.layout.forces() == 1);
}

TEST_CASE("config: unknown keys are rejected with their dotted path") {
  auto mutate = [](std::string text, const std::string& from,
                   const std::string& to) {
    const auto at = text.find(from);
    REQUIRE(at != std::string::npos);
    return text.replace(at, from.size(), to);
  };

  try {
    slfm::parse_config(mutate(kPlainConfig, "\"kappa\"", "\"kapa\""));
    FAIL("expected ConfigError");
  } catch (const slfm::ConfigError& e) {
    CHECK(e.field() == "output_model.kapa");
  }

  try {
    slfm::parse_config(mutate(kPlainConfig, "\"seed\"", "\"sede\""));
    FAIL("expected ConfigError");
  } catch (const slfm::ConfigError& e) {
    CHECK(e.field() == "sede");
  }

  try {
    slfm::parse_config(mutate(kPlainConfig, "\"nu\"", "\"nuu\""));
    FAIL("expected ConfigError");
  } catch (const slfm::ConfigError& e) {
    CHECK(e.field() == "force_priors[0].nuu");
  }

  try {
    slfm::parse_config(mutate(kSwitchConfig, "\"lengthscales\"", "\"lengthscale\""));
    FAIL("expected ConfigError");
  } catch (const slfm::ConfigError& e) {
    CHECK(e.field() == "slds.lengthscale");
  }
}

TEST_CASE("config: dimension and domain validation names the offending field") {
  auto mutate = [](std::string text, const std::string& from,
                   const std::string& to) {
    const auto at = text.find(from);
    REQUIRE(at != std::string::npos);
    return text.replace(at, from.size(), to);
  };

  // D = 2 with three A entries: the shape error names the array.
  try {
    slfm::parse_config(mutate(kSwitchConfig, "\"D\": 3", "\"D\": 2"));
    FAIL("expected ConfigError");
  } catch (const slfm::ConfigError& e) {
    CHECK(e.field() == "output_model.A");
  }

  // S with a short row.
  try {
    slfm::parse_config(mutate(kPlainConfig, "\"S\": [[1.0]]", "\"S\": [[]]"));
    FAIL("expected ConfigError");
  } catch (const slfm::ConfigError& e) {
    CHECK(e.field() == "output_model.S");
  }

  try {
    slfm::parse_config(mutate(kSwitchConfig, "\"c\": 0.5", "\"c\": 0.4"));
    FAIL("expected ConfigError");
  } catch (const slfm::ConfigError& e) {
    CHECK(e.field() == "slds.c");
  }

  try {
    slfm::parse_config(
        mutate(kPlainConfig, "\"lengthscale\": 5.0", "\"lengthscale\": -5.0"));
    FAIL("expected ConfigError");
  } catch (const slfm::ConfigError& e) {
    CHECK(e.field() == "force_priors[0].lengthscale");
  }

  CHECK_THROWS_AS(
      slfm::parse_config(mutate(kPlainConfig, "\"variance\": 0.01",
                                "\"variance\": 0.01, \"covariance\": [[1.0]]")),
      slfm::ConfigError);
  CHECK_THROWS_AS(slfm::parse_config("[1, 2]"), slfm::ConfigError);
  CHECK_THROWS_AS(slfm::parse_config("{not json"), slfm::ConfigError);

  // force_priors conflicts with an slds section.
  try {
    slfm::parse_config(mutate(
        kSwitchConfig, "\"observation_noise\"",
        "\"force_priors\": [{\"lengthscale\": 1.0}], \"observation_noise\""));
    FAIL("expected ConfigError");
  } catch (const slfm::ConfigError& e) {
    CHECK(e.field() == "force_priors");
  }
}

TEST_CASE("config: hashes are stable and text-sensitive") {
  const std::string a = kPlainConfig;
  std::string b = a;
  b.back() = ' ';  // any byte change moves the hash
  CHECK(slfm::config_hash(a) == slfm::config_hash(a));
  CHECK(slfm::config_hash(a) != slfm::config_hash(b));
  CHECK(slfm::config_hash(a).size() == 16);
}

TEST_CASE("config: named parameter access covers the fit catalog") {
  auto plain = slfm::parse_config(kPlainConfig);
  CHECK(slfm::get_param(plain, "output.A.1") == 1.0);
  CHECK(slfm::get_param(plain, "output.S.1.1") == 1.0);
  CHECK(slfm::get_param(plain, "force.1.lengthscale") == 5.0);
  CHECK(slfm::get_param(plain, "noise.variance") == 0.01);
  slfm::set_param(plain, "force.1.lengthscale", 2.5);
  CHECK(plain.force_priors[0].lengthscale == 2.5);
  slfm::set_param(plain, "output.kappa.1", 0.7);
  CHECK(plain.output.kappa(0) == 0.7);

  auto sw = slfm::parse_config(kSwitchConfig);
  CHECK(slfm::get_param(sw, "slds.lengthscale.2") == 30.0);
  CHECK(slfm::get_param(sw, "output.S.2.1") == 5.0);
  slfm::set_param(sw, "slds.lengthscale.1", 3.0);
  CHECK(sw.slds.lengthscales[0] == 3.0);

  CHECK_THROWS_AS(slfm::get_param(plain, "output.B.1"), slfm::ConfigError);
  CHECK_THROWS_AS(slfm::get_param(plain, "output.A.2"), slfm::ConfigError);
  CHECK_THROWS_AS(slfm::get_param(plain, "slds.lengthscale.1"), slfm::ConfigError);
  CHECK_THROWS_AS(slfm::get_param(sw, "force.1.lengthscale"), slfm::ConfigError);
  CHECK_THROWS_AS(slfm::get_param(plain, "banana"), slfm::ConfigError);
}

TEST_CASE("fit: the simplex maximizer climbs and respects its budget") {
  // 1-D parabola.
  auto f1 = [](const Vector& x) { return -(x(0) - 3.0) * (x(0) - 3.0); };
  const auto r1 = slfm::nelder_mead_max(f1, Vector::Zero(1));
  CHECK(r1.converged);
  CHECK(r1.evals <= 500);
  CHECK(std::abs(r1.x(0) - 3.0) <= 1e-3);
  CHECK(r1.f_final >= r1.f_initial);

  // 2-D anisotropic quadratic.
  auto f2 = [](const Vector& x) {
    return -((x(0) - 1.0) * (x(0) - 1.0) + 10.0 * (x(1) + 2.0) * (x(1) + 2.0));
  };
  Vector start(2);
  start << 4.0, 4.0;
  const auto r2 = slfm::nelder_mead_max(f2, start);
  CHECK(r2.converged);
  CHECK(std::abs(r2.x(0) - 1.0) <= 1e-3);
  CHECK(std::abs(r2.x(1) + 2.0) <= 1e-3);

  // Non-finite regions are avoided, not fatal (only the start must be finite).
  auto fenced = [](const Vector& x) {
    if (x(0) > 2.0) return std::numeric_limits<double>::quiet_NaN();
    return -(x(0) - 1.5) * (x(0) - 1.5);
  };
  const auto r3 = slfm::nelder_mead_max(fenced, Vector::Zero(1));
  CHECK(std::abs(r3.x(0) - 1.5) <= 1e-3);

  auto bad = [](const Vector&) { return std::numeric_limits<double>::quiet_NaN(); };
  CHECK_THROWS_AS(slfm::nelder_mead_max(bad, Vector::Zero(1)), slfm::NumericalError);

  // The evaluation budget is a hard stop.
  slfm::SimplexOptions tight;
  tight.max_evals = 7;
  const auto r4 = slfm::nelder_mead_max(f2, start, tight);
  CHECK(r4.evals <= 7);
  CHECK(r4.f_final >= r4.f_initial);
}

TEST_CASE("cli: simulate is byte-identical under one seed and moves with another") {
  TempDir dir;
  const std::string cfg_path = dir.file("cfg.json");
  write_file(cfg_path, kPlainConfig);

  const auto [rc1, log1] = run_quiet(
      {"simulate", "--config", cfg_path, "--out", dir.file("a.csv")});
  REQUIRE(rc1 == 0);
  CHECK(log1.find("seed: 7") != std::string::npos);
  const auto [rc2, log2] = run_quiet(
      {"simulate", "--config", cfg_path, "--out", dir.file("b.csv")});
  REQUIRE(rc2 == 0);
  CHECK(read_file(dir.file("a.csv")) == read_file(dir.file("b.csv")));
  CHECK(read_file(slfm::truth_path(dir.file("a.csv"))) ==
        read_file(slfm::truth_path(dir.file("b.csv"))));

  // A different seed produces different draws (and is echoed).
  const auto [rc3, log3] = run_quiet({"simulate", "--config", cfg_path, "--seed",
                                      "99", "--out", dir.file("c.csv")});
  REQUIRE(rc3 == 0);
  CHECK(log3.find("seed: 99") != std::string::npos);
  CHECK(read_file(dir.file("a.csv")) != read_file(dir.file("c.csv")));

  // The data file parses back into a valid grid.
  const auto grid = slfm::grid_from_table(slfm::read_csv(dir.file("a.csv")), 1);
  CHECK(grid.size() == 40);
  CHECK(grid.times(39) == doctest::Approx(3.9).epsilon(1e-12));
}

TEST_CASE("cli: switching simulate writes the mode sequence and switch times") {
  TempDir dir;
  const std::string cfg_path = dir.file("cfg.json");
  write_file(cfg_path, kSwitchConfig);
  std::ostringstream log;
  const auto cfg = slfm::parse_config(kSwitchConfig);
  slfm::do_simulate(cfg, "testhash", dir.file("d.csv"), log);

  const auto truth = slfm::read_csv(slfm::truth_path(dir.file("d.csv")));
  REQUIRE(truth.columns.back() == "model");
  REQUIRE(truth.rows.size() == 80);
  int resets = 0;
  for (const auto& row : truth.rows) {
    const double m = row.back();
    CHECK(m >= 0.0);
    CHECK(m <= 2.0);
    CHECK(m == std::floor(m));
    if (m == 2.0) ++resets;
  }
  // The echoed switch count equals the number of reset steps.
  CHECK(log.str().find("switches: " + std::to_string(resets)) != std::string::npos);
  // Header comments carry tool version and config hash.
  const std::string text = read_file(slfm::truth_path(dir.file("d.csv")));
  CHECK(text.find("# tool: slfm ") != std::string::npos);
  CHECK(text.find("# config: testhash") != std::string::npos);
}

TEST_CASE("cli: smooth tracks near-noiseless data and matches the batch oracle") {
  TempDir dir;
  // Tiny observation noise so the smoothed outputs must hug the data.
  std::string cfg_text = kPlainConfig;
  const auto at = cfg_text.find("\"variance\": 0.01");
  REQUIRE(at != std::string::npos);
  cfg_text.replace(at, 16, "\"variance\": 1e-8");
  const auto cfg = slfm::parse_config(cfg_text);

  std::ostringstream sim_log;
  slfm::do_simulate(cfg, "h", dir.file("d.csv"), sim_log);
  std::ostringstream log;
  slfm::do_smooth(cfg, "h", dir.file("d.csv"), dir.file("post.csv"), log);

  const auto data = slfm::read_csv(dir.file("d.csv"));
  const auto post = slfm::read_csv(dir.file("post.csv"));
  REQUIRE(post.rows.size() == data.rows.size());
  REQUIRE(post.columns[1] == "x1");
  for (size_t k = 0; k < post.rows.size(); ++k) {
    CHECK(std::abs(post.rows[k][1] - data.rows[k][1]) <= 3.0 * std::sqrt(1e-8));
    CHECK(post.rows[k][2] <= post.rows[k][1]);  // lo <= mean
    CHECK(post.rows[k][3] >= post.rows[k][1]);  // hi >= mean
  }

  // The printed likelihood equals the dense batch oracle's joint density.
  const auto model = slfm::model_from_config(cfg);
  const auto meas = slfm::measurement_from_config(cfg, model.layout);
  const auto grid = slfm::grid_from_table(data, 1);
  const auto joint = slfm::batch_joint(model, grid.times);
  const auto oracle = slfm::batch_condition(joint, grid.y, meas);
  const double printed = parse_logged(log.str(), "log marginal likelihood");
  CHECK(std::abs(printed - oracle.loglik) <= 1e-8 * std::max(1.0, std::abs(oracle.loglik)));
}

TEST_CASE("cli: smooth accepts missing cells and smooths across them") {
  TempDir dir;
  const auto cfg = slfm::parse_config(kPlainConfig);
  std::ostringstream sim_log;
  slfm::do_simulate(cfg, "h", dir.file("d.csv"), sim_log);

  // Blank out a run of observations.
  auto table = slfm::read_csv(dir.file("d.csv"));
  for (size_t k = 10; k < 16; ++k) {
    table.rows[k][1] = std::numeric_limits<double>::quiet_NaN();
  }
  slfm::write_csv(dir.file("gap.csv"), {}, table.columns, table.rows);

  std::ostringstream log;
  slfm::do_smooth(cfg, "h", dir.file("gap.csv"), dir.file("post.csv"), log);
  const auto post = slfm::read_csv(dir.file("post.csv"));
  REQUIRE(post.rows.size() == table.rows.size());
  for (const auto& row : post.rows) {
    for (double v : row) CHECK(std::isfinite(v));
  }
  // Interior of the gap is more uncertain than the observed neighborhood.
  const double band_gap = post.rows[12][3] - post.rows[12][2];
  const double band_obs = post.rows[5][3] - post.rows[5][2];
  CHECK(band_gap > band_obs);
  CHECK(std::isfinite(parse_logged(log.str(), "log marginal likelihood")));
}

TEST_CASE("cli: segment on switchless data finds nothing and rows normalize") {
  TempDir dir;
  // Freeze the chain (a = 1) so the generator never leaves its first model.
  std::string cfg_text = kSwitchConfig;
  const auto at = cfg_text.find("\"a\": 0.98");
  REQUIRE(at != std::string::npos);
  cfg_text.replace(at, 9, "\"a\": 1.0");
  const auto cfg = slfm::parse_config(cfg_text);

  std::ostringstream sim_log;
  slfm::do_simulate(cfg, "h", dir.file("d.csv"), sim_log);
  CHECK(sim_log.str().find("switches: 0") != std::string::npos);

  std::ostringstream log;
  slfm::do_segment(cfg, "h", dir.file("d.csv"), dir.file("seg.csv"), 0.2, log);
  CHECK(log.str().find("no switches detected") != std::string::npos);

  const auto seg = slfm::read_csv(dir.file("seg.csv"));
  REQUIRE(seg.columns[1] == "p_model1");
  REQUIRE(seg.columns[3] == "p_reset");
  for (const auto& row : seg.rows) {
    CHECK(std::abs(row[1] + row[2] + row[3] - 1.0) <= 1e-12);
    CHECK(row[3] <= 0.2);  // never above the detection threshold
  }
  const auto switches = slfm::read_csv(slfm::switches_path(dir.file("seg.csv")));
  CHECK(switches.rows.empty());
  CHECK(switches.columns == std::vector<std::string>{"t"});
}

TEST_CASE("cli: segment round-trip detects planted switches within 3 steps") {
  TempDir dir;
  const auto cfg = slfm::parse_config(kSwitchConfig);
  std::ostringstream sim_log;
  slfm::do_simulate(cfg, "h", dir.file("d.csv"), sim_log);
  // Recover the true switch times from the log line "switches: n t1 t2 ...".
  std::istringstream tail(sim_log.str().substr(sim_log.str().find("switches: ") + 10));
  int n = 0;
  tail >> n;
  std::vector<double> truth(n);
  for (int i = 0; i < n; ++i) tail >> truth[i];
  REQUIRE(n >= 1);  // seed 42 plants switches (verified by the scan above)

  std::ostringstream log;
  slfm::do_segment(cfg, "h", dir.file("d.csv"), dir.file("seg.csv"),
                   cfg.switch_threshold, log);
  const auto detected = slfm::read_csv(slfm::switches_path(dir.file("seg.csv")));
  int matched = 0;
  for (double t : truth) {
    for (const auto& row : detected.rows) {
      if (std::abs(row[0] - t) <= 3.0 * 0.5 + 1e-12) {
        ++matched;
        break;
      }
    }
  }
  CHECK(matched == n);
}

TEST_CASE("cli: fit reports identical likelihoods when nothing is free") {
  TempDir dir;
  const auto cfg = slfm::parse_config(kPlainConfig);
  std::ostringstream sim_log;
  slfm::do_simulate(cfg, "h", dir.file("d.csv"), sim_log);

  std::ostringstream log;
  slfm::do_fit(cfg, dir.file("d.csv"), log);
  CHECK(log.str().find("no free parameters") != std::string::npos);
  const double init = parse_logged(log.str(), "initial log-likelihood");
  const double fin = parse_logged(log.str(), "final log-likelihood");
  CHECK(init == fin);

  // And it equals the filter's likelihood computed directly.
  const auto model = slfm::model_from_config(cfg);
  const auto meas = slfm::measurement_from_config(cfg, model.layout);
  const auto grid = slfm::grid_from_table(slfm::read_csv(dir.file("d.csv")), 1);
  CHECK(init == doctest::Approx(slfm::kalman_filter(model, meas, grid).loglik)
                    .epsilon(1e-12));
}

TEST_CASE("cli: fit recovers a lengthscale within a factor of 1.5") {
  TempDir dir;
  // Truth: l = 5 over T = 500 samples; the search starts from l = 1.
  std::string cfg_text = kPlainConfig;
  const auto at = cfg_text.find("\"count\": 40");
  REQUIRE(at != std::string::npos);
  cfg_text.replace(at, 11, "\"count\": 500");
  const auto truth_cfg = slfm::parse_config(cfg_text);
  std::ostringstream sim_log;
  slfm::do_simulate(truth_cfg, "h", dir.file("d.csv"), sim_log);

  auto fit_cfg = truth_cfg;
  fit_cfg.free_params = {"force.1.lengthscale"};
  slfm::set_param(fit_cfg, "force.1.lengthscale", 1.0);

  std::ostringstream log;
  slfm::do_fit(fit_cfg, dir.file("d.csv"), log);
  const double init = parse_logged(log.str(), "initial log-likelihood");
  const double fin = parse_logged(log.str(), "final log-likelihood");
  CHECK(fin >= init);  // ascent contract

  const auto arrow = log.str().find("-> ");
  REQUIRE(arrow != std::string::npos);
  const double recovered = std::stod(log.str().substr(arrow + 3));
  CHECK(recovered >= 5.0 / 1.5);
  CHECK(recovered <= 5.0 * 1.5);
}

TEST_CASE("cli: exit codes separate config, data, and numerical failures") {
  TempDir dir;
  const std::string cfg_path = dir.file("cfg.json");
  write_file(cfg_path, kSwitchConfig);

  // Success path.
  const auto ok = run_quiet(
      {"simulate", "--config", cfg_path, "--out", dir.file("d.csv")});
  CHECK(ok.first == 0);

  // Config problems: missing file, unknown key, missing grid for simulate.
  CHECK(run_quiet({"simulate", "--config", dir.file("absent.json"), "--out",
                   dir.file("x.csv")})
            .first == 2);
  write_file(dir.file("typo.json"),
             std::string(kPlainConfig).replace(std::string(kPlainConfig).find("\"seed\""),
                                               6, "\"sede\""));
  const auto typo = run_quiet({"simulate", "--config", dir.file("typo.json"),
                               "--out", dir.file("x.csv")});
  CHECK(typo.first == 2);
  CHECK(typo.second.find("sede") != std::string::npos);

  // Data problems: non-increasing timestamps, wrong column count.
  write_file(dir.file("bad.csv"), "t,y_1,y_2,y_3\n1.0,0,0,0\n0.5,0,0,0\n");
  const auto bad = run_quiet({"segment", "--config", cfg_path, "--data",
                              dir.file("bad.csv"), "--out", dir.file("s.csv")});
  CHECK(bad.first == 2);
  CHECK(bad.second.find("line 3") != std::string::npos);

  // Numerical failure: data so absurd every mixture branch underflows.
  std::string absurd = "t,y_1,y_2,y_3\n";
  for (int k = 0; k < 6; ++k) {
    absurd += std::to_string(0.5 * k) + ",1e200,-1e200,1e200\n";
  }
  write_file(dir.file("absurd.csv"), absurd);
  CHECK(run_quiet({"segment", "--config", cfg_path, "--data",
                   dir.file("absurd.csv"), "--out", dir.file("s.csv")})
            .first == 3);

  // Usage problems from the argument parser map to 2; --help exits 0.
  CHECK(run_quiet({"frobnicate", "--config", cfg_path}).first == 2);
  CHECK(run_quiet({"simulate"}).first == 2);  // missing required options
  CHECK(run_quiet({"--help"}).first == 0);

  // Smoothing a switching config is a config error, not a crash.
  CHECK(run_quiet({"smooth", "--config", cfg_path, "--data", dir.file("d.csv"),
                   "--out", dir.file("x.csv")})
            .first == 2);
}

}  // TEST_SUITE
