#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "qgeom/cli.hpp"

using namespace qgeom;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = 0;
  std::string out;
  std::string err;
};

Outcome run_cli(const std::vector<std::string>& args, const std::string& stdin_text = "") {
  std::istringstream in(stdin_text);
  std::ostringstream out, err;
  Outcome o;
  o.code = cli::run(args, in, out, err);
  o.out = out.str();
  o.err = err.str();
  return o;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "qgeom_cli_tests" / name;
  fs::remove_all(p);
  return p;
}

json read_json(const fs::path& p) {
  std::ifstream f(p);
  return json::parse(f);
}

json without_timestamp(json j) {
  j.erase("timestamp");
  return j;
}

}  // namespace

TEST_CASE("config parsing") {
  SUBCASE("defaults") {
    const cli::RunConfig c = cli::parse_config(json::parse(R"({"model": {"name": "bloch"}})"));
    CHECK(c.seed == 0);
    CHECK(c.format == "json");
    CHECK(c.scheme == FdScheme::central4);
    CHECK(!c.step);
  }
  SUBCASE("unknown keys") {
    CHECK_THROWS_AS(cli::parse_config(json::parse(R"({"model": {"name": "bloch"}, "x": 1})")),
                    cli::ConfigError);
    CHECK_THROWS_AS(cli::parse_config(json::parse(R"({"model": {"name": "bloch", "a": 2}})")),
                    cli::ConfigError);
    CHECK_THROWS_AS(
        cli::parse_config(json::parse(R"({"model": {"name": "bloch"}, "fd": {"h": 0.1}})")),
        cli::ConfigError);
    CHECK_THROWS_AS(cli::parse_config(json::parse(
                        R"({"model": {"name": "bloch"}, "tolerances": {"gauss": 1e-3}})")),
                    cli::ConfigError);
  }
  SUBCASE("invalid values") {
    CHECK_THROWS_AS(cli::parse_config(json::parse(
                        R"({"model": {"name": "bloch"}, "tolerances": {"gauss_perp": 0}})")),
                    cli::ConfigError);
    CHECK_THROWS_AS(
        cli::parse_config(json::parse(R"({"model": {"name": "bloch"}, "fd": {"step": -1}})")),
        cli::ConfigError);
    CHECK_THROWS_AS(cli::parse_config(json::parse(
                        R"({"model": {"name": "bloch"}, "fd": {"scheme": "central6"}})")),
                    cli::ConfigError);
    CHECK_THROWS_AS(cli::parse_config(json::parse(R"({"model": {"name": "bloch"}, "seed": -2})")),
                    cli::ConfigError);
    CHECK_THROWS_AS(cli::parse_config(json::parse(R"({"points": [[1, 2]]})")), cli::ConfigError);
  }
  SUBCASE("model names") {
    CHECK_THROWS_AS(cli::parse_config(json::parse(R"({"model": {"name": "torus"}})")),
                    cli::ModelError);
    const cli::RunConfig c = cli::parse_config(
        json::parse(R"({"model": {"name": "hyperbolic", "variant": "disk", "a": 2}})"));
    CHECK(c.model.name == "hyperbolic-disk");
    CHECK(c.model.a == 2.0);
  }
}

TEST_CASE("models listing") {
  const Outcome o = run_cli({"models"});
  CHECK(o.code == 0);
  const json j = json::parse(o.out);
  CHECK(j["schema"] == 1);
  std::vector<std::string> names;
  for (const auto& m : j["models"]) names.push_back(m["name"]);
  CHECK(names == std::vector<std::string>{"minkowski", "hyperbolic-half-plane", "hyperbolic-disk",
                                          "bloch", "random"});
}

TEST_CASE("verify") {
  SUBCASE("Minkowski grid passes") {
    const fs::path dir = scratch("verify_minkowski");
    const std::string cfg = R"({"model": {"name": "minkowski"},
      "grid": {"counts": [2, 1, 2, 1], "box": [[0, 1], [0, 1], [0, 1], [0, 1]]},
      "momentum": [0.3, 0.0, -0.2]})";
    const Outcome o = run_cli({"verify", "--config", "-", "--out", dir.string()}, cfg);
    CHECK(o.code == cli::kPass);
    const json r = read_json(dir / "verify_report.json");
    CHECK(r["schema"] == 1);
    CHECK(r["summary"]["points"] == 4);
    CHECK(r["summary"]["failed"] == 0);
    CHECK(r["points"][0]["records"].size() == 18);
    CHECK(r["points"][0]["coordinates"][4] == doctest::Approx(0.3));
  }
  SUBCASE("hyperbolic sample reports scheme order") {
    const fs::path dir = scratch("verify_hyperbolic");
    const std::string cfg = R"({"model": {"name": "hyperbolic-half-plane", "a": 1, "m": 1},
      "sample": {"count": 3}, "seed": 11})";
    const Outcome o = run_cli({"verify", "--config", "-", "--out", dir.string()}, cfg);
    CHECK(o.code == cli::kPass);
    const json r = read_json(dir / "verify_report.json");
    for (const auto& p : r["points"])
      for (const auto& rec : p["records"])
        if (rec["identity"] == "gauss_parallel" || rec["identity"] == "codazzi_perp")
          CHECK(rec["order"].get<double>() == doctest::Approx(4.0).epsilon(0.2));
  }
  SUBCASE("unreachable tolerance fails but still writes the report") {
    const fs::path dir = scratch("verify_fail");
    const std::string cfg = R"({"model": {"name": "bloch"}, "points": [[1.0, 0.5]],
      "tolerances": {"gauss_parallel": 1e-30}})";
    const Outcome o = run_cli({"verify", "--config", "-", "--out", dir.string()}, cfg);
    CHECK(o.code == cli::kVerificationFailure);
    const json r = read_json(dir / "verify_report.json");
    CHECK(r["pass"] == false);
    CHECK(r["summary"]["failed"] == 1);
    for (const auto& rec : r["points"][0]["records"])
      CHECK(rec["pass"] == (rec["identity"] != "gauss_parallel"));
  }
  SUBCASE("csv format") {
    const fs::path dir = scratch("verify_csv");
    const std::string cfg = R"({"model": {"name": "random", "n": 3, "rank": 1},
      "points": [[0.1, -0.2]], "seed": 4})";
    const Outcome o =
        run_cli({"verify", "--config", "-", "--out", dir.string(), "--format", "csv"}, cfg);
    CHECK(o.code == cli::kPass);
    std::ifstream f(dir / "verify_report.csv");
    std::string header;
    std::getline(f, header);
    CHECK(header == "point,identity,residual,residual_half_step,order,tolerance,pass");
  }
}

TEST_CASE("eval") {
  SUBCASE("Bloch metric on a grid") {
    const fs::path dir = scratch("eval_bloch");
    const std::string cfg = R"({"model": {"name": "bloch"},
      "grid": {"counts": [4, 3], "box": [[0.4, 2.7], [-2.5, 2.5]]},
      "output": {"tidy": true}})";
    const Outcome o = run_cli({"eval", "metric", "--config", "-", "--out", dir.string()}, cfg);
    CHECK(o.code == cli::kPass);
    const json r = read_json(dir / "eval_report.json");
    CHECK(r["rows"].size() == 12);
    const json& cols = r["columns"];
    CHECK(cols[2] == "G.0.0.theta.theta.re");
    CHECK(cols[8] == "G.0.0.phi.phi.re");
    for (const auto& row : r["rows"]) {
      const double theta = row[0];
      CHECK(std::abs(row[2].get<double>() - 0.25) <= 1e-6);
      CHECK(std::abs(row[8].get<double>() - 0.25 * std::sin(theta) * std::sin(theta)) <= 1e-6);
      CHECK(std::abs(row[4].get<double>()) <= 1e-6);
    }
    CHECK(fs::exists(dir / "eval_tidy.csv"));
  }
  SUBCASE("hyperbolic qgt with analytic columns") {
    const fs::path dir = scratch("eval_hyperbolic");
    const std::string cfg = R"({"model": {"name": "hyperbolic-half-plane"},
      "points": [[0.3, 0.8, 0.2, 0.1, 0.4, -0.3, 0.0]]})";
    const Outcome o =
        run_cli({"eval", "qgt", "--config", "-", "--out", dir.string(), "--format", "csv"}, cfg);
    CHECK(o.code == cli::kPass);
    std::ifstream f(dir / "eval_report.csv");
    std::string header, row;
    std::getline(f, header);
    std::getline(f, row);
    std::vector<std::string> names, values;
    std::stringstream hs(header), rs(row);
    for (std::string c; std::getline(hs, c, ',');) names.push_back(c);
    for (std::string c; std::getline(rs, c, ',');) values.push_back(c);
    REQUIRE(names.size() == values.size());
    // 7 coordinates, then 2 x 2 x 7 x 7 complex numeric and analytic values and moduli of differences
    CHECK(names.size() == 7 + 196 * 2 + 196 * 2 + 196);
    int diffs = 0;
    for (size_t i = 0; i < names.size(); ++i)
      if (names[i].rfind("absdiff_Q", 0) == 0) {
        ++diffs;
        CHECK(std::stod(values[i]) <= 1e-5);
      }
    CHECK(diffs == 196);
  }
  SUBCASE("empty grid is a config error") {
    const Outcome o = run_cli({"eval", "--config", "-", "--out", scratch("eval_empty").string()},
                              R"({"model": {"name": "bloch"}, "grid": {"counts": [0, 3]}})");
    CHECK(o.code == cli::kConfigError);
  }
  SUBCASE("point outside the chart is a config error") {
    const Outcome o =
        run_cli({"eval", "--config", "-", "--out", scratch("eval_outside").string()},
                R"({"model": {"name": "hyperbolic-half-plane"}, "points": [[0, -1, 0, 0, 0, 0, 0]]})");
    CHECK(o.code == cli::kConfigError);
  }
}

TEST_CASE("trace") {
  SUBCASE("free Minkowski ray") {
    const fs::path dir = scratch("trace_minkowski");
    const std::string cfg = R"({"model": {"name": "minkowski"},
      "rays": [{"x": [0, 0, 0, 0], "k": [0.3, -0.2, 0.1]}],
      "trace": {"tau_end": 2, "dt": 0.01}})";
    const Outcome o = run_cli({"trace", "--config", "-", "--out", dir.string()}, cfg);
    CHECK(o.code == cli::kPass);
    const json r = read_json(dir / "trace_summary.json");
    const json& ray = r["rays"][0];
    CHECK(ray["status"] == "ok");
    CHECK(ray["h_drift_max"].get<double>() <= 1e-12);
    CHECK(ray["kz_drift"].get<double>() <= 1e-12);
    CHECK(ray["norm_drift_max"].get<double>() <= 1e-12);
    CHECK(fs::exists(dir / "ray_0.csv"));
  }
  SUBCASE("hyperbolic planar bundle keeps k_z at zero") {
    const fs::path dir = scratch("trace_bundle");
    json cfg = json::parse(R"({"model": {"name": "hyperbolic-half-plane", "q": 0.5, "E": 0.2, "B": 1},
      "trace": {"tau_end": 3, "dt": 0.05, "halving": true}})");
    cfg["rays"] = json::array();
    for (int i = 0; i < 8; ++i) {
      const double angle = 2.0 * M_PI * i / 8.0;
      cfg["rays"].push_back({{"x", {0.0, 1.0, 0.0, 0.0}},
                             {"k", {0.2 * std::cos(angle), 0.2 * std::sin(angle), 0.0}}});
    }
    const Outcome o = run_cli({"trace", "--config", "-", "--out", dir.string(), "--workers", "3"},
                              cfg.dump());
    CHECK(o.code == cli::kPass);
    const json r = read_json(dir / "trace_summary.json");
    CHECK(r["summary"]["completed"] == 8);
    for (int i = 0; i < 8; ++i) {
      std::ifstream f(dir / ("ray_" + std::to_string(i) + ".csv"));
      std::string line;
      std::getline(f, line);
      while (std::getline(f, line)) {
        std::stringstream ls(line);
        std::string cell;
        for (int c = 0; c <= 8; ++c) std::getline(ls, cell, ',');
        CHECK(std::stod(cell) == 0.0);  // k3
      }
      CHECK(r["rays"][i]["halving"]["h_drift_ratio"].get<double>() ==
            doctest::Approx(16.0).epsilon(0.3));
    }
  }
  SUBCASE("off-shell input") {
    const Outcome o = run_cli({"trace", "--config", "-", "--out", scratch("trace_off").string()},
                              R"({"model": {"name": "minkowski"},
                                  "rays": [{"x": [0, 0, 0, 0], "k": [-1.2, 0.3, 0, 0]}]})");
    CHECK(o.code == cli::kOffShell);
  }
  SUBCASE("ray leaving the chart is recorded") {
    const fs::path dir = scratch("trace_leave");
    const Outcome o = run_cli({"trace", "--config", "-", "--out", dir.string()},
                              R"({"model": {"name": "hyperbolic-half-plane"},
                                  "rays": [{"x": [0, 0.5, 0, 0], "k": [-3, 0, 0]}],
                                  "trace": {"tau_end": 50, "dt": 0.01, "spinor": false}})");
    CHECK(o.code == cli::kPass);
    CHECK(read_json(dir / "trace_summary.json")["rays"][0]["status"] == "left_domain");
  }
  SUBCASE("non-spacetime model") {
    const Outcome o = run_cli({"trace", "--config", "-", "--out", scratch("trace_bloch").string()},
                              R"({"model": {"name": "bloch"}, "rays": []})");
    CHECK(o.code == cli::kModelError);
  }
}

TEST_CASE("determinism") {
  const std::string cfg = R"({"model": {"name": "random", "n": 4, "rank": 2, "negative": 1},
    "sample": {"count": 5}, "seed": 21})";
  const fs::path a = scratch("det_a"), b = scratch("det_b");
  CHECK(run_cli({"verify", "--config", "-", "--out", a.string(), "--workers", "1"}, cfg).code == 0);
  CHECK(run_cli({"verify", "--config", "-", "--out", b.string(), "--workers", "4"}, cfg).code == 0);
  CHECK(without_timestamp(read_json(a / "verify_report.json")).dump() ==
        without_timestamp(read_json(b / "verify_report.json")).dump());
}

TEST_CASE("command line errors") {
  CHECK(run_cli({}).code == cli::kConfigError);
  CHECK(run_cli({"verify"}).code == cli::kConfigError);
  CHECK(run_cli({"eval", "curvature", "--config", "x.json"}).code == cli::kConfigError);
  CHECK(run_cli({"verify", "--config", "/nonexistent/config.json"}).code == cli::kConfigError);
  CHECK(run_cli({"verify", "--config", "-"}, "{not json").code == cli::kConfigError);
  CHECK(run_cli({"verify", "--config", "-", "--workers", "0"}, "{}").code == cli::kConfigError);
  CHECK(run_cli({"--help"}).code == cli::kPass);
}
