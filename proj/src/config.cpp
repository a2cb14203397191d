#include "rnls/config.hpp"

#include <fstream>
#include <set>

namespace rnls {

namespace {

const std::set<std::string> kKnownKeys = {
    "d",        "b",       "sites",     "xi",        "G",
    "N",        "dt",      "T",         "stride",    "seed",
    "tolerances", "dealias", "first_order_correction", "blowup_sup",
    "tracked_extra", "R",  "atlas",     "nf_radius", "gamma",
    "gamma_list", "tau",   "epsilon",   "kmax",      "radius",
    "samples",  "threads", "xi_check"};

const std::set<std::string> kToleranceKeys = {"amp_drift", "normal_sup_factor",
                                              "freq_tol", "mass_tol"};

json default_G(int d) {
  // degree-3 intensity coupling; for d = 2 the symmetric pair
  // G_1 = s_1 s_2^2, G_2 = s_1^2 s_2, otherwise no coupling term
  if (d != 2) return json::array();
  json g = json::array();
  g.push_back({{"terms", {{{"c", 1.0}, {"p", {1, 2}}}}}});
  g.push_back({{"terms", {{{"c", 1.0}, {"p", {2, 1}}}}}});
  return g;
}

std::vector<Site> parse_sites(const json& arr, const char* key) {
  if (!arr.is_array()) throw ConfigError(std::string(key) + " must be an array");
  std::vector<Site> out;
  for (const auto& e : arr) {
    if (!e.is_array() || e.size() != 2)
      throw ConfigError(std::string(key) + " entries must be [n1, n2]");
    out.push_back({e[0].get<int>(), e[1].get<int>()});
  }
  return out;
}

}  // namespace

std::vector<Site> Config::sites() const {
  return parse_sites(resolved.at("sites"), "sites");
}

std::vector<double> Config::gamma_list() const {
  return resolved.at("gamma_list").get<std::vector<double>>();
}

std::vector<std::vector<double>> Config::xi_check() const {
  return resolved.at("xi_check").get<std::vector<std::vector<double>>>();
}

SimConfig Config::sim_config() const {
  SimConfig sc;
  sc.d = d();
  sc.b = b();
  sc.sites = sites();
  sc.xi = resolved.at("xi").get<std::vector<std::vector<double>>>();
  for (const auto& g : resolved.at("G")) {
    GPoly poly;
    for (const auto& t : g.at("terms"))
      poly.terms.push_back(
          {t.at("c").get<double>(), t.at("p").get<std::vector<int>>()});
    sc.G.push_back(std::move(poly));
  }
  sc.N = resolved.at("N").get<int>();
  sc.dt = resolved.at("dt").get<double>();
  sc.T = resolved.at("T").get<double>();
  sc.stride = resolved.at("stride").get<int>();
  sc.seed = seed();
  const auto& tol = resolved.at("tolerances");
  sc.tol.amp_drift = tol.at("amp_drift").get<double>();
  sc.tol.normal_sup_factor = tol.at("normal_sup_factor").get<double>();
  sc.tol.freq_tol = tol.at("freq_tol").get<double>();
  sc.tol.mass_tol = tol.at("mass_tol").get<double>();
  sc.dealias = resolved.at("dealias").get<bool>();
  sc.first_order_correction = resolved.at("first_order_correction").get<bool>();
  sc.blowup_sup = resolved.at("blowup_sup").get<double>();
  sc.tracked_extra = parse_sites(resolved.at("tracked_extra"), "tracked_extra");
  return sc;
}

Config resolve_config(const json& user) {
  if (!user.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [key, value] : user.items()) {
    (void)value;
    if (!kKnownKeys.count(key))
      throw ConfigError("unknown config key \"" + key + "\"");
  }
  for (const char* req : {"d", "b", "sites"})
    if (!user.contains(req))
      throw ConfigError(std::string("missing required key \"") + req + "\"");

  json r = user;
  const int d = r.at("d").get<int>();
  const int b = r.at("b").get<int>();
  if (d < 1) throw ConfigError("d must be >= 1");
  if (b < 1) throw ConfigError("b must be >= 1");
  const auto sites = parse_sites(r.at("sites"), "sites");
  if (int(sites.size()) != b)
    throw ConfigError("sites must list exactly b entries");

  // xi: accept a flat list when d == 1
  if (r.contains("xi")) {
    auto& xi = r.at("xi");
    if (xi.is_array() && !xi.empty() && xi[0].is_number()) {
      if (d != 1) throw ConfigError("flat xi list only allowed for d = 1");
      r["xi"] = json::array({xi});
    }
    const auto rows = r["xi"].get<std::vector<std::vector<double>>>();
    if (int(rows.size()) != d) throw ConfigError("xi must have d rows");
    for (const auto& row : rows)
      if (int(row.size()) != b) throw ConfigError("xi rows must have b entries");
  } else {
    r["xi"] = json();
  }

  auto fill = [&r](const char* key, json v) {
    if (!r.contains(key)) r[key] = std::move(v);
  };
  fill("G", default_G(d));
  fill("N", 64);
  fill("dt", 1e-3);
  fill("T", 100.0);
  fill("stride", 50);
  fill("seed", 0);
  fill("dealias", true);
  fill("first_order_correction", false);
  fill("blowup_sup", 100.0);
  fill("tracked_extra", json::array());
  fill("R", 20);
  fill("atlas", false);
  fill("nf_radius", 3);
  fill("gamma", 1e-3);
  fill("gamma_list", json::array({1e-2, 1e-3, 1e-4, 1e-5}));
  fill("tau", 2.0 * b + 3.0);
  fill("epsilon", 0.1);
  fill("kmax", 15);
  fill("radius", 15);
  fill("samples", 10000);
  fill("threads", 0);
  fill("xi_check", json());

  if (!r.contains("tolerances")) r["tolerances"] = json::object();
  auto& tol = r["tolerances"];
  for (const auto& [key, value] : tol.items()) {
    (void)value;
    if (!kToleranceKeys.count(key))
      throw ConfigError("unknown config key \"tolerances." + key + "\"");
  }
  SimTolerances defaults;
  if (!tol.contains("amp_drift")) tol["amp_drift"] = defaults.amp_drift;
  if (!tol.contains("normal_sup_factor"))
    tol["normal_sup_factor"] = defaults.normal_sup_factor;
  if (!tol.contains("freq_tol")) tol["freq_tol"] = defaults.freq_tol;
  if (!tol.contains("mass_tol")) tol["mass_tol"] = defaults.mass_tol;

  Config cfg{std::move(r)};
  return cfg;
}

Config parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  json user;
  try {
    in >> user;
  } catch (const std::exception& e) {
    throw ConfigError("config parse error in " + path + ": " + e.what());
  }
  return resolve_config(user);
}

}  // namespace rnls
