#pragma once

#include <string>

#include <json.hpp>

#include "p2pi/common/error.hpp"

namespace p2pi {

using json = nlohmann::json;

/// Parse a JSON file. Throws ConfigError with "<path>:<line>:<col>" on
/// syntax errors, IoError if the file cannot be read.
json load_json(const std::string& path);

/// Write pretty-printed JSON (trailing newline, 2-space indent).
void save_json(const std::string& path, const json& j);

/// Fetch j[key] as T, or `fallback` when absent. Wrong type throws ConfigError.
template <typename T>
T json_get(const json& j, const std::string& key, const T& fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("config key '" + key + "': " + e.what());
  }
}

}  // namespace p2pi
