#include "rnls/manifest.hpp"

#include <cstdio>

namespace rnls {

std::uint64_t fnv1a64(const void* data, std::size_t len) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string fnv1a64_hex(const std::string& bytes) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(bytes.data(), bytes.size())));
  return buf;
}

std::string RunManifest::id() const {
  nlohmann::json j;
  j["subcommand"] = subcommand;
  j["version"] = version;
  j["seed"] = seed;
  j["config"] = config;
  j["input_hashes"] = input_hashes;
  return fnv1a64_hex(j.dump());
}

nlohmann::json RunManifest::to_json() const {
  nlohmann::json j;
  j["subcommand"] = subcommand;
  j["version"] = version;
  j["seed"] = seed;
  j["config"] = config;
  j["input_hashes"] = input_hashes;
  j["wall_time_s"] = wall_time_s;
  j["manifest_id"] = id();
  return j;
}

}  // namespace rnls
