#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "pxlap/cli.hpp"
#include "pxlap/fixtures.hpp"
#include "pxlap/spaces.hpp"

using namespace pxl;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("pxlap_test_cli_" + name);
  fs::remove_all(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

nlohmann::json report(const fs::path& dir) { return nlohmann::json::parse(slurp(dir / "report.json")); }

bool bit_equal(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

RunConfig unit_square(int n, const std::string& exponent, const fs::path& out) {
  RunConfig c;
  c.n_cells = {n, n};
  c.exponent = exponent;
  c.out_dir = out.string();
  return c;
}

}  // namespace

TEST_CASE("parse_config accepts the full schema") {
  const RunConfig c = parse_config(R"({
    "domain": {"dim": 1, "bounds": [[-1, 1]], "n_cells": [50]},
    "exponent": "2 + x1*x1",
    "fixture": {"name": "cone"},
    "kernel": {"q": 2, "eps": [0.2, 0.1], "variant": "degenerate"},
    "delta": [0.01],
    "tolerances": {"norm": 1e-8, "solve": 1e-10, "weak": 1e-5, "viscosity": 0.1, "comparison": 0.01},
    "seed": 42,
    "output": {"dir": "somewhere"},
    "n_tests": 7,
    "n_subdomains": 3,
    "mollifier_j": [4],
    "solve": {"max_iters": 9, "step_rule": "lagged_diffusivity"}
  })");
  CHECK(c.dim == 1);
  CHECK(c.bounds[0].lo == -1.0);
  CHECK(c.n_cells == std::vector<int>{50});
  CHECK(c.fixture == "cone");
  CHECK(c.eps == std::vector<double>{0.2, 0.1});
  CHECK(c.variant == KernelVariant::Degenerate);
  CHECK(c.norm_tol == 1e-8);
  CHECK(c.solve.tol == 1e-10);
  CHECK(c.solve.max_iters == 9);
  CHECK(c.solve.step_rule == StepRule::LaggedDiffusivity);
  CHECK(c.comparison_tol == 0.01);
  CHECK(c.seed == 42u);
  CHECK(c.out_dir == "somewhere");
  CHECK(c.n_tests == 7);
  CHECK(c.mollifier_j == std::vector<int>{4});
  CHECK(c.grid().node_count() == 51);
}

TEST_CASE("parse_config errors carry positions") {
  try {
    parse_config("{\n  \"exponent\": \"2\",\n  \"colour\": 3\n}");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.line() == 3);
    CHECK(e.column() == 3);
  }
  try {
    parse_config("{\n  \"exponent\": \"2\",,\n}");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.line() == 2);
    CHECK(e.column() > 0);
  }
  CHECK_THROWS_AS(parse_config(R"({"domain": {"dim": 2, "size": 3}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"exponent": "1"})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"exponent": "2 +"})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"fixture": "nonesuch"})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"seed": -1})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"kernel": {"eps": [0]}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"domain": {"n_cells": [2, 2]}})"), ConfigError);
}

TEST_CASE("exponent strings") {
  const RunConfig c = parse_config(R"({"domain": {"dim": 1, "bounds": [[0, 1]], "n_cells": [200]}})");
  const Grid g = c.grid();
  CHECK(parse_exponent("2", g).kappa() == 0.0);
  const ExponentField a = parse_exponent("2 + x1", g);
  CHECK(a.p_minus() == doctest::Approx(2.0));
  CHECK(a.p_plus() == doctest::Approx(3.0));
  CHECK(a.kappa() == doctest::Approx(1.0));
  const ExponentField s = parse_exponent("2 + 0.5*sin(3.14159*x1)", g);
  CHECK(std::abs(s.kappa() - 1.5708) <= 1e-4);
}

TEST_CASE("format_double and field files round trip") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1e3, 1e3);
  for (int k = 0; k < 200; ++k) {
    const double x = u(rng) * std::pow(10.0, k % 40 - 20);
    CHECK(bit_equal(std::stod(format_double(x)), x));
  }
  CHECK(format_double(INFINITY) == "inf");
  CHECK(format_double(-INFINITY) == "-inf");
  CHECK(format_double(NAN) == "nan");

  const Grid g = make_grid(3, {{-1, 1}, {0, 0.3}, {2, 5}}, {4, 5, 6});
  ScalarField f(g, 0.0);
  for (double& v : f.values) v = u(rng) / 7.0;
  const fs::path d = scratch("field");
  fs::create_directories(d);
  write_field(d / "f.field", f);
  const ScalarField r = read_field(d / "f.field");
  CHECK(r.grid == g);
  for (std::size_t i = 0; i < f.size(); ++i) CHECK(bit_equal(r[i], f[i]));
  std::ofstream(d / "bad.field") << "dim 2\nbounds 0 1\n";
  CHECK_THROWS(read_field(d / "bad.field"));
}

TEST_CASE("norm command") {
  const fs::path d = scratch("norm");
  RunConfig c = unit_square(16, "2 + x1", d);
  c.fixture = "constant";
  std::ostringstream log;
  CHECK(run("norm", c, log) == kExitOk);
  const auto j = report(d);
  CHECK(j["norm"]["norm"].get<double>() == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(j["norm"]["modular"].get<double>() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(j["sandwich"]["holds"].get<bool>());
  CHECK(fs::exists(d / "norm.csv"));
  CHECK(j["exit_code"].get<int>() == 0);
}

TEST_CASE("report values round trip bit-exactly") {
  const fs::path d = scratch("roundtrip");
  RunConfig c = unit_square(16, "1.5 + x1*x2", d);
  c.fixture = "cone";
  std::ostringstream log;
  REQUIRE(run("norm", c, log) == kExitOk);
  const auto j = report(d);
  const Grid g = c.grid();
  const ExponentField p = parse_exponent(c.exponent, g);
  const ScalarField u = make_fixture("cone", g, p, 0).u;
  const NormReport nr = luxemburg_norm(u, p, c.norm_tol);
  CHECK(bit_equal(j["norm"]["norm"].get<double>(), nr.norm));
  CHECK(bit_equal(j["norm"]["modular"].get<double>(), nr.modular));
  CHECK(bit_equal(j["exponent"]["p_plus"].get<double>(), p.p_plus()));
  CHECK(bit_equal(j["exponent"]["kappa"].get<double>(), p.kappa()));
}

TEST_CASE("config and exponent errors exit with 2") {
  const fs::path d = scratch("exit2");
  std::ostringstream log;
  RunConfig c = unit_square(8, "1", d);
  CHECK(run("norm", c, log) == kExitConfigError);
  CHECK(report(d)["exit_code"].get<int>() == 2);
  c.exponent = "2";
  CHECK(run("frobnicate", c, log) == kExitConfigError);
  c.fixture = "solve";
  CHECK(run("norm", c, log) == kExitConfigError);  // random fixture without seed
  c.fixture = "constant";
  CHECK(run("verify", c, log) == kExitConfigError);
  CHECK(run("equivalence", c, log) == kExitConfigError);
  c.exponent = "1.5 + x1";
  c.seed = 1;
  CHECK(run("equivalence", c, log) == kExitConfigError);  // mixed
  CHECK(log.str().find("error:") != std::string::npos);
}

TEST_CASE("other commands") {
  std::ostringstream log;
  SUBCASE("infconv") {
    const fs::path d = scratch("infconv");
    RunConfig c = unit_square(24, "2 + x1", d);
    c.fixture = "neg_cone";
    CHECK(run("infconv", c, log) == kExitOk);
    CHECK(fs::exists(d / "infconv.csv"));
    bool found = false;
    for (const auto& e : fs::directory_iterator(d)) found |= e.path().extension() == ".field";
    CHECK(found);
  }
  SUBCASE("operator") {
    const fs::path d = scratch("operator");
    RunConfig c = unit_square(16, "2 + x1", d);
    c.fixture = "concave";
    CHECK(run("operator", c, log) == kExitOk);
    CHECK(fs::exists(d / "operator.csv"));
  }
  SUBCASE("solve") {
    const fs::path d = scratch("solve");
    RunConfig c = unit_square(16, "1.5", d);
    c.fixture = "affine";
    CHECK(run("solve", c, log) == kExitOk);
    const ScalarField u = read_field(d / "solution.field");
    // Unit-slope affine data is its own solution.
    const ScalarField a = make_fixture("affine", c.grid(), parse_exponent("1.5", c.grid()), 0).u;
    for (std::size_t i = 0; i < u.size(); ++i) CHECK(std::abs(u[i] - a[i]) <= 1e-6);
    CHECK(fs::exists(d / "solve_trace.csv"));
  }
  SUBCASE("verify passes on a supersolution and fails otherwise") {
    const fs::path d = scratch("verify");
    RunConfig c = unit_square(24, "2 + x1", d);
    c.seed = 3;
    c.fixture = "neg_cone";
    CHECK(run("verify", c, log) == kExitOk);
    CHECK(fs::exists(d / "verdicts.csv"));
    c.fixture = "cone";
    CHECK(run("verify", c, log) == kExitPropertyFailed);
  }
  SUBCASE("fixture files") {
    const fs::path d = scratch("file");
    fs::create_directories(d);
    RunConfig c = unit_square(16, "2", d);
    write_field(d / "u.field", ScalarField(c.grid(), 1.0));
    c.fixture_file = (d / "u.field").string();
    CHECK(run("norm", c, log) == kExitOk);
    c.n_cells = {12, 12};
    CHECK(run("norm", c, log) == kExitConfigError);
  }
}

TEST_CASE("equivalence command is deterministic") {
  const fs::path a = scratch("eq_a");
  const fs::path b = scratch("eq_b");
  RunConfig c = unit_square(32, "2 + x1", a);
  c.seed = 2024;
  std::ostringstream log;
  CHECK(run("equivalence", c, log) == kExitOk);
  c.out_dir = b.string();
  CHECK(run("equivalence", c, log) == kExitOk);
  for (const char* f : {"report.json", "equivalence.csv", "equivalence_stages.csv"})
    CHECK(slurp(a / f) == slurp(b / f));
  const auto ja = report(a);
  CHECK(ja["equivalence"]["all_agree"].get<bool>());
  CHECK(ja["equivalence"]["fixtures"].size() >= 8);
}
