#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rnls/melnikov.hpp"
#include "rnls/simulate.hpp"

namespace rnls {

using json = nlohmann::json;

/// Fully resolved run configuration: every default filled in, unknown keys
/// rejected. The resolved JSON is what run manifests embed.
struct Config {
  json resolved;

  int d() const { return resolved.at("d").get<int>(); }
  int b() const { return resolved.at("b").get<int>(); }
  std::vector<Site> sites() const;
  TangentialSet tangential_set() const { return TangentialSet(sites()); }

  int lattice_radius() const { return resolved.at("R").get<int>(); }
  bool atlas() const { return resolved.at("atlas").get<bool>(); }
  int nf_radius() const { return resolved.at("nf_radius").get<int>(); }

  double gamma() const { return resolved.at("gamma").get<double>(); }
  std::vector<double> gamma_list() const;
  double tau() const { return resolved.at("tau").get<double>(); }
  double epsilon() const { return resolved.at("epsilon").get<double>(); }
  int kmax() const { return resolved.at("kmax").get<int>(); }
  int mel_radius() const { return resolved.at("radius").get<int>(); }
  std::size_t samples() const { return resolved.at("samples").get<std::size_t>(); }
  int threads() const { return resolved.at("threads").get<int>(); }
  std::uint64_t seed() const { return resolved.at("seed").get<std::uint64_t>(); }
  /// Single-xi Melnikov check point, if configured.
  bool has_xi_check() const { return !resolved.at("xi_check").is_null(); }
  std::vector<std::vector<double>> xi_check() const;

  /// Simulation configuration; validates the amplitude domain.
  SimConfig sim_config() const;
};

/// Loads and resolves a config file (strict JSON schema). Throws
/// ConfigError with the offending key on unknown keys, missing required
/// keys or domain violations.
Config parse_config(const std::string& path);

/// Same, from an already-parsed JSON object.
Config resolve_config(const json& user);

}  // namespace rnls
