#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "finsler_forge/cli.hpp"
#include "finsler_forge/csvio.hpp"
#include "finsler_forge/expr.hpp"

using namespace finsler;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratchDir() {
  const fs::path p = fs::temp_directory_path() / "finsler_forge_cli_test";
  fs::create_directories(p);
  return p;
}

std::string writeConfig(const json& j, const std::string& name) {
  const fs::path p = scratchDir() / name;
  std::ofstream(p) << j.dump(2);
  return p.string();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json sol1VerifyConfig() {
  return json{
      {"spec_version", 1},
      {"command", "verify"},
      {"connection", "hv"},
      {"model",
       {{"type", "sol1"},
        {"psi", "0.2*sin(x1)*cos(x2)"},
        {"f", "exp(0.4*v + 0.05*sin(x1)) + 0.03*x2*v"},
        {"f0", "0.2*x2"},
        {"h0", "1 + 0.1*x1"},
        {"sigma0", "1 + 0.05*x2"},
        {"w01", "0.01"},
        {"n01", "0.02"},
        {"source",
         {{"ups2", "-0.2*sin(x1)*cos(x2)*exp(-0.2*sin(x1)*cos(x2))"},
          {"ups4", "0.3 + 0.05*cos(x1) + 0.02*v"}}}}},
      {"params", {{"method", "separated"}}},
      {"samples",
       {{"box", {{"lo", {-0.2, -0.2, 0.2, -0.1}}, {"hi", {0.5, 0.4, 0.6, 0.1}}}},
        {"count", 6},
        {"seed", 3}}},
      {"tolerance", 1e-6},
      {"output", "verify.csv"}};
}

}  // namespace

TEST_CASE("expression parser evaluates the grammar") {
  const std::vector<std::string> xy = {"x", "y"};
  auto at = [&](const std::string& e, double x, double y) {
    return field_value(parse_expression(e, xy), std::vector<double>{x, y});
  };
  CHECK(at("1 + 2*3", 0, 0) == doctest::Approx(7.0).epsilon(1e-15));
  CHECK(at("2^3^2", 0, 0) == doctest::Approx(512.0).epsilon(1e-15));  // right-assoc
  CHECK(at("-x^2", 3, 0) == doctest::Approx(-9.0).epsilon(1e-15));
  CHECK(at("(-x)^2", 3, 0) == doctest::Approx(9.0).epsilon(1e-15));
  CHECK(at("x/y - y/x", 2, 4) == doctest::Approx(0.5 - 2.0).epsilon(1e-15));
  CHECK(at("sin(x)^2 + cos(x)^2", 0.7, 0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(at("sech(x)", 0.3, 0) == doctest::Approx(1.0 / std::cosh(0.3)).epsilon(1e-15));
  CHECK(at("sqrt(exp(log(x)))", 4.0, 0) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(at("x^1.5", 4.0, 0) == doctest::Approx(8.0).epsilon(1e-14));
  CHECK(at("(-2)^3", 0, 0) == doctest::Approx(-8.0).epsilon(1e-15));
  // typeset operator glyphs
  CHECK(at("x \xe2\x88\x92 y", 5, 2) == doctest::Approx(3.0).epsilon(1e-15));
  CHECK(at("x \xc3\x97 y", 5, 2) == doctest::Approx(10.0).epsilon(1e-15));
  CHECK(at("x \xc3\xb7 y", 5, 2) == doctest::Approx(2.5).epsilon(1e-15));
}

TEST_CASE("expression fields carry exact derivatives") {
  const ScalarField f =
      parse_expression("sin(x)*exp(y) + x^3/(1 + y^2)", {"x", "y"});
  const Eigen::Vector2d u(0.4, -0.3);
  const Jet2 j = field_jet2(f, u);
  const double x = u[0], y = u[1], q = 1.0 + y * y;
  CHECK(j.value == doctest::Approx(std::sin(x) * std::exp(y) + x * x * x / q).epsilon(1e-14));
  CHECK(j.grad[0] ==
        doctest::Approx(std::cos(x) * std::exp(y) + 3.0 * x * x / q).epsilon(1e-14));
  CHECK(j.grad[1] ==
        doctest::Approx(std::sin(x) * std::exp(y) - x * x * x * 2.0 * y / (q * q)).epsilon(1e-14));
  CHECK(j.hess(0, 0) ==
        doctest::Approx(-std::sin(x) * std::exp(y) + 6.0 * x / q).epsilon(1e-13));
  CHECK(j.hess(0, 1) ==
        doctest::Approx(std::cos(x) * std::exp(y) - 6.0 * x * x * y / (q * q)).epsilon(1e-13));
}

TEST_CASE("parse errors carry position diagnostics") {
  CHECK_THROWS_AS(parse_expression("sin(", {"x"}), ExprError);
  try {
    parse_expression("sin(", {"x"});
  } catch (const ExprError& e) {
    CHECK(e.line == 1);
    CHECK(e.column == 5);
  }
  try {
    parse_expression("x +\n  bogus", {"x"});
  } catch (const ExprError& e) {
    CHECK(e.line == 2);
    CHECK(e.column == 3);
    CHECK(std::string(e.what()).find("bogus") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_expression("x @ 2", {"x"}), ExprError);
  CHECK_THROWS_AS(parse_expression("x y", {"x", "y"}), ExprError);
}

TEST_CASE("csv floats round-trip bit-exactly") {
  for (double x : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0, -0.0, 1e308,
                   3.141592653589793, -123456.78901234567}) {
    const std::string s = format_double(x);
    CHECK(std::strtod(s.c_str(), nullptr) == x);
    CHECK(s.find(',') == std::string::npos);
  }
}

TEST_CASE("csv export and re-read") {
  const fs::path dir = scratchDir();
  CsvTable t;
  t.header = {"t", "hH", "vH", "gamma", "ha", "va", "rho"};

  SUBCASE("empty rows give a header-only file") {
    const fs::path p = dir / "empty.csv";
    export_csv(t, p.string());
    CHECK(slurp(p) == "t,hH,vH,gamma,ha,va,rho\n");
  }

  SUBCASE("one row, LF endings, bit-exact re-read") {
    const std::vector<double> vals = {0.001, 0.2, 1.0 / 3.0, 0.6, 1.0000001, 0.99, 2.5e-7};
    std::vector<std::string> row;
    for (double v : vals) row.push_back(format_double(v));
    t.add_row(row);
    const fs::path p = dir / "one.csv";
    export_csv(t, p.string());
    const std::string text = slurp(p);
    CHECK(text.find('\r') == std::string::npos);
    CHECK(std::count(text.begin(), text.end(), '\n') == 2);
    const CsvTable back = read_csv(p.string());
    REQUIRE(back.header.size() == 7);
    REQUIRE(back.rows.size() == 1);
    REQUIRE(back.rows[0].size() == 7);
    for (std::size_t i = 0; i < vals.size(); ++i)
      CHECK(std::strtod(back.rows[0][i].c_str(), nullptr) == vals[i]);
  }

  SUBCASE("row width is validated") {
    CHECK_THROWS(t.add_row({"1", "2"}));
  }
}

TEST_CASE("sample point generation") {
  SampleSpec s;
  s.lo = Eigen::Vector3d(0.0, -1.0, 2.0);
  s.hi = Eigen::Vector3d(1.0, 1.0, 3.0);

  SUBCASE("quasi-random points stay in the box and depend on the seed") {
    s.count = 50;
    s.seed = 4;
    const auto pts = sample_points(s);
    REQUIRE(pts.size() == 50);
    for (const auto& u : pts)
      for (int k = 0; k < 3; ++k) {
        CHECK(u[k] >= s.lo[k]);
        CHECK(u[k] <= s.hi[k]);
      }
    const auto again = sample_points(s);
    CHECK(pts[7] == again[7]);
    s.seed = 5;
    CHECK(sample_points(s)[0] != pts[0]);
  }

  SUBCASE("grids enumerate the tensor product") {
    s.grid = true;
    s.shape = {2, 3, 1};
    const auto pts = sample_points(s);
    REQUIRE(pts.size() == 6);
    CHECK(pts[0][0] == 0.0);
    CHECK(pts[5][0] == 1.0);
    CHECK(pts[0][2] == 2.5);  // singleton axis sits at the box midpoint
  }

  SUBCASE("degenerate boxes are rejected") {
    s.hi[1] = -1.0;
    s.count = 1;
    CHECK_THROWS_AS(sample_points(s), ConfigError);
  }
}

TEST_CASE("verify command: generated solution passes, perturbed source fails") {
  const fs::path dir = scratchDir();

  const std::string good = writeConfig(sol1VerifyConfig(), "verify_good.json");
  const RunConfig cfg = load_run_config(good);
  CHECK(cfg.spec_version == 1);
  CHECK(cfg.command == Command::verify);
  REQUIRE(run(cfg, (dir / "good").string()) == 0);
  const CsvTable out = read_csv((dir / "good" / "verify.csv").string());
  REQUIRE(!out.rows.empty());
  REQUIRE(out.header[0] == "equation");
  for (const auto& row : out.rows) {
    CHECK(std::strtod(row[1].c_str(), nullptr) < 1e-6);
    CHECK(row[3] == "0");
  }

  json bad = sol1VerifyConfig();
  bad["model"]["source"]["ups4"] = "1.05*(0.3 + 0.05*cos(x1) + 0.02*v)";
  const RunConfig cfgBad = load_run_config(writeConfig(bad, "verify_bad.json"));
  REQUIRE(run(cfgBad, (dir / "bad").string()) == 1);
  const CsvTable outBad = read_csv((dir / "bad" / "verify.csv").string());
  bool named = false;
  for (const auto& row : outBad.rows)
    if (row[3] == "1") {
      named = true;
      CHECK(row[0] == "R33");  // the perturbed source violates the vv equation
    }
  CHECK(named);
}

TEST_CASE("malformed expression exits with the input-error code") {
  json j = sol1VerifyConfig();
  j["model"]["f"] = "sin(";
  const RunConfig cfg = load_run_config(writeConfig(j, "verify_parse.json"));
  CHECK(run(cfg, (scratchDir() / "parse").string()) == 2);
}

TEST_CASE("config validation errors") {
  CHECK_THROWS_AS(load_run_config("/nonexistent/nowhere.json"), ConfigError);

  json j = sol1VerifyConfig();
  j.erase("spec_version");
  CHECK_THROWS_AS(load_run_config(writeConfig(j, "no_version.json")), ConfigError);

  j = sol1VerifyConfig();
  j["spec_version"] = 99;
  CHECK_THROWS_AS(load_run_config(writeConfig(j, "bad_version.json")), ConfigError);

  j = sol1VerifyConfig();
  j["command"] = "frobnicate";
  CHECK_THROWS_AS(load_run_config(writeConfig(j, "bad_command.json")), ConfigError);

  const fs::path p = scratchDir() / "broken.json";
  std::ofstream(p) << "{ not json";
  CHECK_THROWS_AS(load_run_config(p.string()), ConfigError);
}

TEST_CASE("identical configs produce byte-identical outputs") {
  const fs::path dir = scratchDir();
  const RunConfig cfg = load_run_config(writeConfig(sol1VerifyConfig(), "verify_det.json"));
  REQUIRE(run(cfg, (dir / "det1").string()) == 0);
  REQUIRE(run(cfg, (dir / "det2").string()) == 0);
  CHECK(slurp(dir / "det1" / "verify.csv") == slurp(dir / "det2" / "verify.csv"));

  json ce{{"spec_version", 1},
          {"command", "cosmo-evolve"},
          {"params",
           {{"mode", "hubble"}, {"hH0", 0.1}, {"vH0", 0.9}, {"rho0", 1.0},
            {"t0", 0.0}, {"t1", 0.5}, {"dt", 0.001}, {"accel_flag", true}}},
          {"output", "traj.csv"}};
  const RunConfig cfg2 = load_run_config(writeConfig(ce, "evolve_det.json"));
  REQUIRE(run(cfg2, (dir / "det3").string()) == 0);
  REQUIRE(run(cfg2, (dir / "det4").string()) == 0);
  const std::string a = slurp(dir / "det3" / "traj.csv");
  CHECK(a == slurp(dir / "det4" / "traj.csv"));
  CHECK(a.substr(0, a.find('\n')) == "t,hH,vH,gamma,ha,va,rho,accel_flag");
}

TEST_CASE("cosmo-classify and soliton commands") {
  const fs::path dir = scratchDir();
  json cc{{"spec_version", 1},
          {"command", "cosmo-classify"},
          {"params",
           {{"gamma_min", -2.0}, {"gamma_max", 3.0}, {"count", 11}, {"include_literal", true}}},
          {"output", "classify.csv"}};
  REQUIRE(run(load_run_config(writeConfig(cc, "classify.json")), (dir / "cc").string()) == 0);
  const CsvTable t = read_csv((dir / "cc" / "classify.csv").string());
  REQUIRE(t.header == std::vector<std::string>{"gamma0", "label", "literal_label"});
  REQUIRE(t.rows.size() == 11);
  CHECK(t.rows.back()[1] == "accel_then_decel");  // gamma0 = 3 starts above the upper threshold

  json so{{"spec_version", 1},
          {"command", "soliton"},
          {"params", {{"cases", {{{"kappa", 1.0}, {"l", 0.0}, {"eps_sign", 1}},
                                 {{"kappa", 2.0}, {"l", 1.0}, {"eps_sign", -1}}}}}},
          {"output", "soliton.csv"}};
  REQUIRE(run(load_run_config(writeConfig(so, "soliton.json")), (dir / "so").string()) == 0);
  const CsvTable st = read_csv((dir / "so" / "soliton.csv").string());
  REQUIRE(st.rows.size() == 2);
  CHECK(std::strtod(st.rows[0][3].c_str(), nullptr) == doctest::Approx(4.0).epsilon(1e-9));
  CHECK(std::strtod(st.rows[1][3].c_str(), nullptr) == doctest::Approx(31.5).epsilon(1e-9));
}

TEST_CASE("front-end argument handling") {
  const std::string good = writeConfig(sol1VerifyConfig(), "verify_main.json");
  const fs::path out = scratchDir() / "main_out";
  const std::string outs = out.string();
  {
    const char* argv[] = {"finsler_forge", "verify", "--config", good.c_str(), "--out",
                          outs.c_str()};
    CHECK(run_main(6, argv) == 0);
  }
  {
    const char* argv[] = {"finsler_forge", "curvature", "--config", good.c_str()};
    CHECK(run_main(4, argv) == 2);  // command does not match the config
  }
  {
    const char* argv[] = {"finsler_forge", "verify", "--config", "/nonexistent.json"};
    CHECK(run_main(4, argv) == 2);
  }
}
