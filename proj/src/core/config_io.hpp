#pragma once

// Strict YAML helpers: unknown keys and type mismatches are errors that
// carry the offending key and its 1-based line number.

#include <yaml-cpp/yaml.h>

#include <filesystem>
#include <initializer_list>
#include <string>
#include <string_view>

#include "core/corrupt.hpp"
#include "core/error.hpp"

namespace uqr::config {

YAML::Node parse_text(const std::string& text, const std::string& source);
YAML::Node load_file(const std::filesystem::path& path);

std::string where(const YAML::Node& node);

// Shortest text that parses back to the same double.
std::string format_double(double v);

void require_map(const YAML::Node& node, const std::string& context);
void check_keys(const YAML::Node& map, std::initializer_list<std::string_view> allowed, const std::string& context);

template <typename T>
T get_or(const YAML::Node& map, const std::string& key, T fallback, const std::string& context) {
  const YAML::Node v = map[key];
  if (!v) return fallback;
  try {
    return v.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError(context + "." + key + ": invalid value" + where(v));
  }
}

template <typename T>
T get_required(const YAML::Node& map, const std::string& key, const std::string& context) {
  const YAML::Node v = map[key];
  if (!v) throw ConfigError(context + ": missing key '" + key + "'" + where(map));
  return get_or<T>(map, key, T{}, context);
}

// ---- recipes ----------------------------------------------------------------
//
//   steps:
//     - rician: {snr_db: 5}
//     - motion:
//         segments:
//           - {lines: [0, 8], shift: [3, 0], rotation_deg: 0}
//     - bias: {order: 1, coefficients: [0, 1, 0]}
//     - region:
//         mask: {rect: [48, 64, 0, 64]}   # or {file: m.lbl} or {bitmap: ["0110", ...]}
//         steps:
//           - rician: {snr_db: 0}
//
// An empty document is the identity recipe.

corrupt::Recipe parse_recipe(const YAML::Node& root);
corrupt::Recipe load_recipe(const std::filesystem::path& path);
std::string serialise_recipe(const corrupt::Recipe& recipe);

}  // namespace uqr::config
