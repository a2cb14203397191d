#pragma once

#include <cstdint>
#include <string>

#include <nlohmann/json.hpp>

namespace rnls {

inline constexpr const char* kToolVersion = "0.1.0";

/// Provenance record for one CLI run. Identical manifests (ignoring wall
/// time) produce byte-identical data files; every output references the
/// manifest by its id.
struct RunManifest {
  std::string subcommand;
  std::string version = kToolVersion;
  std::uint64_t seed = 0;
  nlohmann::json config;       // fully resolved
  nlohmann::json input_hashes; // name -> fnv1a64 hex of the raw bytes
  double wall_time_s = 0.0;

  /// FNV-1a 64 hash over the canonical serialization without wall time.
  std::string id() const;
  nlohmann::json to_json() const;
};

std::uint64_t fnv1a64(const void* data, std::size_t len);
std::string fnv1a64_hex(const std::string& bytes);

}  // namespace rnls
