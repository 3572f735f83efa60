#pragma once

#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "bitesim/core.hpp"
#include "bitesim/error.hpp"

namespace bitesim {

using Json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

namespace detail {

inline std::string line_col(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

}  // namespace detail

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Parses JSON text, reporting syntax errors with line/column.
inline Json parse_json_text(const std::string& text, const std::string& origin) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ConfigError(origin + ": syntax error at " +
                      detail::line_col(text, e.byte > 0 ? e.byte - 1 : 0));
  }
}

inline Json load_json_file(const std::string& path) {
  return parse_json_text(read_text_file(path), path);
}

inline void check_schema_version(const Json& doc, const std::string& origin) {
  if (!doc.is_object() || !doc.contains("schema_version"))
    throw ConfigError(origin + ": missing field 'schema_version'");
  if (!doc["schema_version"].is_number_integer() ||
      doc["schema_version"].get<int>() != kSchemaVersion)
    throw ConfigError(origin + ": unsupported schema_version (expected " +
                      std::to_string(kSchemaVersion) + ")");
}

inline const Json& require(const Json& j, const std::string& key,
                           const std::string& where) {
  if (!j.is_object() || !j.contains(key))
    throw ConfigError(where + ": missing field '" + key + "'");
  return j.at(key);
}

template <typename T>
T get_as(const Json& j, const std::string& where) {
  try {
    return j.get<T>();
  } catch (const Json::exception&) {
    throw ConfigError(where + ": wrong type");
  }
}

template <typename T>
T field_or(const Json& j, const std::string& key, T fallback,
           const std::string& where) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  return get_as<T>(j.at(key), where + "." + key);
}

// Accepts a number or one of the strings "-inf" / "inf".
inline double get_extended_double(const Json& j, const std::string& where) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "inf") return std::numeric_limits<double>::infinity();
  }
  throw ConfigError(where + ": expected a number, \"-inf\" or \"inf\"");
}

inline Json extended_double_to_json(double v) {
  if (std::isinf(v)) return v < 0 ? Json("-inf") : Json("inf");
  return Json(v);
}

using LevelDistribution = std::array<double, kLevels>;

inline LevelDistribution point_mass(int level) {
  LevelDistribution d{};
  d[PropertyLevel(level).index()] = 1.0;
  return d;
}

// A level distribution given either as a single level (point mass) or as
// five non-negative weights; weights are normalized.
inline LevelDistribution parse_level_weights(const Json& j, const std::string& where) {
  if (j.is_number_integer()) {
    try {
      return point_mass(j.get<int>());
    } catch (const std::out_of_range&) {
      throw ConfigError(where + ": level outside [1, 5]");
    }
  }
  if (!j.is_array() || j.size() != kLevels)
    throw ConfigError(where + ": expected a level 1..5 or an array of 5 weights");
  LevelDistribution d{};
  double total = 0.0;
  for (std::size_t i = 0; i < kLevels; ++i) {
    d[i] = get_as<double>(j[i], where + "[" + std::to_string(i) + "]");
    if (!(d[i] >= 0.0) || !std::isfinite(d[i]))
      throw ConfigError(where + ": weights must be finite and non-negative");
    total += d[i];
  }
  if (total <= 0.0) throw ConfigError(where + ": weights sum to zero");
  for (auto& x : d) x /= total;
  return d;
}

inline Shape parse_shape_field(const Json& j, const std::string& where) {
  auto s = parse_shape(get_as<std::string>(j, where));
  if (!s) throw ConfigError(where + ": unknown shape '" + j.get<std::string>() + "'");
  return *s;
}

inline Size parse_size_field(const Json& j, const std::string& where) {
  auto s = parse_size(get_as<std::string>(j, where));
  if (!s) throw ConfigError(where + ": unknown size '" + j.get<std::string>() + "'");
  return *s;
}

inline Skill parse_skill_field(const Json& j, const std::string& where) {
  auto s = parse_skill(get_as<std::string>(j, where));
  if (!s) throw ConfigError(where + ": unknown skill '" + j.get<std::string>() + "'");
  return *s;
}

}  // namespace bitesim
