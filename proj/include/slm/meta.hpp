#pragma once

#include <cstdio>
#include <string>
#include <string_view>

#include "json.hpp"
#include "slm/random.hpp"

namespace slm {

inline constexpr std::string_view kToolName = "slm";
inline constexpr std::string_view kToolVersion = "0.1.0";

// 16 hex digits of the FNV-1a hash of the canonical dump of `config`.
inline std::string config_hash(const nlohmann::json& config) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(config.dump())));
  return buf;
}

// First line of every JSONL file the tool writes.
inline nlohmann::json metadata_record(const nlohmann::json& config) {
  return {{"_meta",
           {{"tool", kToolName},
            {"version", kToolVersion},
            {"rng", kRngName},
            {"config_hash", config_hash(config)},
            {"config", config}}}};
}

inline bool is_metadata_record(const nlohmann::json& j) {
  return j.is_object() && j.contains("_meta");
}

}  // namespace slm
