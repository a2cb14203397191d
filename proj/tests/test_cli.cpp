#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "rnls/cli.hpp"
#include "rnls/manifest.hpp"

using namespace rnls;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
  auto dir = fs::temp_directory_path() / ("rnls_test_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

json minimal() {
  return json{{"d", 1}, {"b", 1}, {"sites", {{1, 0}}}, {"xi", {1e-4}}};
}

}  // namespace

TEST_CASE("config resolution fills defaults and rejects junk") {
  const auto cfg = resolve_config(minimal());
  CHECK(cfg.resolved.at("N") == 64);
  CHECK(cfg.resolved.at("dt") == 1e-3);
  CHECK(cfg.resolved.at("tau") == 5.0);  // 2b + 3
  CHECK(cfg.resolved.at("xi") == json::array({{1e-4}}));  // nested echo

  auto bad = minimal();
  bad["foo"] = 1;
  CHECK_THROWS_WITH_AS(resolve_config(bad),
                       "unknown config key \"foo\"", ConfigError);

  auto bad2 = minimal();
  bad2.erase("sites");
  CHECK_THROWS_AS(resolve_config(bad2), ConfigError);

  auto bad3 = minimal();
  bad3["xi"] = {2e-2};  // outside (0, 1e-2]
  const auto cfg3 = resolve_config(bad3);
  CHECK_THROWS_AS(cfg3.sim_config().validate(), ConfigError);
}

TEST_CASE("lattice subcommand writes the report and signals admissibility") {
  const auto dir = temp_dir("lattice");
  json user{{"d", 1}, {"b", 2}, {"sites", {{1, 0}, {-1, 0}}},
            {"R", 12},  {"atlas", true}};
  const auto cfg = resolve_config(user);
  CHECK(dispatch("lattice", cfg, dir.string(), 1) == 0);

  const auto rep = json::parse(slurp(dir / "lattice_report.json"));
  CHECK(rep.at("admissible") == true);
  CHECK(rep.at("L2").size() == 1);
  CHECK(rep.at("L2")[0].at("n") == json::array({0, 1}));
  CHECK(rep.at("L2")[0].at("m") == json::array({0, -1}));
  CHECK(rep.at("violations").empty());
  CHECK(fs::exists(dir / "lattice_atlas.csv"));
  CHECK(fs::exists(dir / "manifest.json"));

  // non-admissible set: exit code 1, violations listed
  json bad{{"d", 1}, {"b", 3}, {"sites", {{0, 0}, {1, 0}, {2, 0}}}, {"R", 12}};
  const auto dir2 = temp_dir("lattice_bad");
  CHECK(dispatch("lattice", resolve_config(bad), dir2.string(), 1) == 1);
  const auto rep2 = json::parse(slurp(dir2 / "lattice_report.json"));
  CHECK(rep2.at("admissible") == false);
  CHECK(!rep2.at("violations").empty());
}

TEST_CASE("normalform subcommand emits report and F table") {
  const auto dir = temp_dir("nf");
  json user{{"d", 1}, {"b", 2}, {"sites", {{1, 0}, {-1, 0}}}, {"nf_radius", 3}};
  CHECK(dispatch("normalform", resolve_config(user), dir.string(), 1) == 0);
  const auto rep = json::parse(slurp(dir / "normalform_report.json"));
  CHECK(rep.at("pass") == true);
  CHECK(rep.at("residual_nonresonant").get<double>() < 1e-12);
  const auto csv = slurp(dir / "normalform_F.csv");
  CHECK(csv.find("denominator") != std::string::npos);
  CHECK(std::count(csv.begin(), csv.end(), '\n') > 3);

  // a non-admissible set surfaces AmbiguousResonance (exit 2 via run_cli)
  json bad{{"d", 1}, {"b", 3}, {"sites", {{0, 0}, {1, 0}, {2, 0}}}};
  CHECK_THROWS_AS(
      dispatch("normalform", resolve_config(bad), dir.string(), 1),
      AmbiguousResonance);
}

TEST_CASE("run_cli maps errors to exit code 2") {
  const auto dir = temp_dir("cli_err");
  // missing config and sites: a config error
  CHECK(run_cli({"--out-dir", dir.string(), "normalform"}) == 2);
  // non-admissible set through the full CLI
  const auto cfgpath = dir / "bad.json";
  std::ofstream(cfgpath) << json{{"d", 1},
                                 {"b", 3},
                                 {"sites", {{0, 0}, {1, 0}, {2, 0}}},
                                 {"nf_radius", 3}}
                                .dump();
  CHECK(run_cli({"--config", cfgpath.string(), "--out-dir", dir.string(),
                 "normalform"}) == 2);
}

TEST_CASE("melnikov subcommand: single point and scan") {
  const auto dir = temp_dir("mel");
  json user{{"d", 2},     {"b", 2},      {"sites", {{1, 0}, {-1, 0}}},
            {"kmax", 5},  {"radius", 6}, {"samples", 50},
            {"gamma", 1e-5},
            {"xi_check", {{0.6312, 0.8471}, {1.5521, 1.9034}}}};
  CHECK(dispatch("melnikov", resolve_config(user), dir.string(), 1) == 0);
  const auto rep = json::parse(slurp(dir / "melnikov_report.json"));
  CHECK(rep.at("pass") == true);
  CHECK(rep.at("k_norm") == "l1");

  json scanawait = user;
  scanawait.erase("xi_check");
  scanawait["gamma_list"] = {1e-2, 1e-4};
  const auto dir2 = temp_dir("mel_scan");
  CHECK(dispatch("melnikov", resolve_config(scanawait), dir2.string(), 2) == 0);
  const auto csv = slurp(dir2 / "melnikov_scan.csv");
  CHECK(csv.find("gamma,excluded_fraction,ci_low,ci_high") != std::string::npos);
  const auto sj = json::parse(slurp(dir2 / "melnikov_scan.json"));
  CHECK(sj.at("rows").size() == 2);
  CHECK(sj.at("rows")[0].at("fraction").get<double>() >=
        sj.at("rows")[1].at("fraction").get<double>());
}

TEST_CASE("simulate subcommand: deterministic byte-identical reruns") {
  json user{{"d", 1},      {"b", 1},     {"sites", {{1, 0}}}, {"xi", {1e-4}},
            {"N", 32},     {"dt", 1e-3}, {"T", 2.0},          {"stride", 20},
            {"seed", 42}};
  const auto cfg = resolve_config(user);
  const auto dir1 = temp_dir("sim1");
  const auto dir2 = temp_dir("sim2");
  CHECK(dispatch("simulate", cfg, dir1.string(), 1) == 0);
  CHECK(dispatch("simulate", cfg, dir2.string(), 1) == 0);
  CHECK(slurp(dir1 / "trace.csv") == slurp(dir2 / "trace.csv"));
  CHECK(slurp(dir1 / "qp_verdict.json") == slurp(dir2 / "qp_verdict.json"));

  const auto v = json::parse(slurp(dir1 / "qp_verdict.json"));
  CHECK(v.at("pass") == true);
  CHECK(v.at("sign_convention") == "+i|n|^2 t");
  CHECK(v.contains("manifest_id"));

  // manifests of both runs carry the same id (wall time excluded)
  const auto m1 = json::parse(slurp(dir1 / "manifest.json"));
  const auto m2 = json::parse(slurp(dir2 / "manifest.json"));
  CHECK(m1.at("manifest_id") == m2.at("manifest_id"));
}

TEST_CASE("fnv1a64 is stable") {
  CHECK(fnv1a64_hex("") == "cbf29ce484222325");
  CHECK(fnv1a64_hex("a") == "af63dc4c8601ec8c");
}
