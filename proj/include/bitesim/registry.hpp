#pragma once
//
// Food registry, tool registry, plate specs, and plate instantiation.
//

#include <cmath>
#include <map>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "bitesim/core.hpp"
#include "bitesim/json_util.hpp"
#include "bitesim/rng.hpp"

namespace bitesim {

struct FoodEntry {
  std::string label;
  std::string display_name;
  std::string category;
  Shape shape = Shape::round;
  Size size = Size::bite_sized;
  LevelDistribution softness{};
  LevelDistribution moisture{};
  LevelDistribution viscosity{};
  DriftParams drift;
  bool dippable = false;

  const LevelDistribution& distribution(Property p) const {
    switch (p) {
      case Property::softness: return softness;
      case Property::moisture: return moisture;
      case Property::viscosity: return viscosity;
    }
    return softness;
  }
};

class FoodRegistry {
 public:
  FoodRegistry() = default;
  explicit FoodRegistry(std::map<std::string, FoodEntry> foods)
      : foods_(std::move(foods)) {}

  static FoodRegistry from_json(const Json& doc, const std::string& origin = "registry") {
    check_schema_version(doc, origin);
    const Json& foods = require(doc, "foods", origin);
    if (!foods.is_object()) throw ConfigError(origin + ".foods: expected an object");
    std::map<std::string, FoodEntry> out;
    for (const auto& [label, f] : foods.items()) {
      const std::string where = origin + ".foods." + label;
      FoodEntry e;
      e.label = label;
      e.display_name = field_or<std::string>(f, "display_name", label, where);
      e.category = field_or<std::string>(f, "category", "other", where);
      e.shape = parse_shape_field(require(f, "shape", where), where + ".shape");
      e.size = parse_size_field(require(f, "size", where), where + ".size");
      e.softness = parse_level_weights(require(f, "softness", where), where + ".softness");
      e.moisture = parse_level_weights(require(f, "moisture", where), where + ".moisture");
      e.viscosity = parse_level_weights(require(f, "viscosity", where), where + ".viscosity");
      e.dippable = field_or<bool>(f, "dippable", false, where);
      if (f.contains("drift")) {
        const Json& d = f["drift"];
        e.drift.softness_rate = field_or<double>(d, "softness_rate", 0.0, where + ".drift");
        e.drift.onset = field_or<int>(d, "onset", 0, where + ".drift");
      }
      out.emplace(label, std::move(e));
    }
    return FoodRegistry(std::move(out));
  }

  static FoodRegistry load(const std::string& path) {
    return from_json(load_json_file(path), path);
  }

  bool contains(const std::string& label) const { return foods_.count(label) != 0; }

  const FoodEntry& at(const std::string& label) const {
    auto it = foods_.find(label);
    if (it == foods_.end()) throw RegistryError("unknown food label '" + label + "'");
    return it->second;
  }

  const std::map<std::string, FoodEntry>& foods() const { return foods_; }
  std::size_t size() const { return foods_.size(); }

  // Most probable level for each scalar property (lowest level on ties).
  PropertyVector mode_properties(const std::string& label) const {
    const FoodEntry& e = at(label);
    auto mode = [](const LevelDistribution& d) {
      std::size_t best = 0;
      for (std::size_t i = 1; i < d.size(); ++i)
        if (d[i] > d[best]) best = i;
      return PropertyLevel(static_cast<int>(best) + 1);
    };
    return PropertyVector{e.shape, e.size, mode(e.softness), mode(e.moisture),
                          mode(e.viscosity)};
  }

 private:
  std::map<std::string, FoodEntry> foods_;
};

class ToolRegistry {
 public:
  static ToolRegistry from_json(const Json& doc, const std::string& origin = "tools") {
    check_schema_version(doc, origin);
    const Json& tools = require(doc, "tools", origin);
    ToolRegistry r;
    for (const auto& [name, t] : tools.items()) {
      const std::string where = origin + ".tools." + name;
      r.tools_[name] = Tool{name, field_or<double>(t, "hardness_offset", 0.0, where),
                            field_or<double>(t, "scoop_capacity", 0.0, where)};
    }
    return r;
  }

  static ToolRegistry load(const std::string& path) {
    return from_json(load_json_file(path), path);
  }

  bool contains(const std::string& name) const { return tools_.count(name) != 0; }

  const Tool& at(const std::string& name) const {
    auto it = tools_.find(name);
    if (it == tools_.end()) throw RegistryError("unknown tool '" + name + "'");
    return it->second;
  }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : tools_) out.push_back(k);
    return out;
  }

 private:
  std::map<std::string, Tool> tools_;
};

// ---------------------------------------------------------------------------
// Plates

struct PlateSpec {
  std::string plate_id;
  double radius_cm = 12.0;
  std::vector<std::pair<std::string, int>> items;  // (label, count), in serving order
};

inline PlateSpec plate_spec_from_json(const Json& j, const std::string& where) {
  PlateSpec spec;
  spec.plate_id = get_as<std::string>(require(j, "plate_id", where), where + ".plate_id");
  spec.radius_cm = field_or<double>(j, "radius_cm", 12.0, where);
  const Json& items = require(j, "items", where);
  if (!items.is_array()) throw ConfigError(where + ".items: expected an array");
  for (std::size_t i = 0; i < items.size(); ++i) {
    const std::string w = where + ".items[" + std::to_string(i) + "]";
    const auto label = get_as<std::string>(require(items[i], "label", w), w + ".label");
    const int count = field_or<int>(items[i], "count", 1, w);
    if (count < 0) throw ConfigError(w + ".count: must be non-negative");
    spec.items.emplace_back(label, count);
  }
  return spec;
}

inline Json plate_spec_to_json(const PlateSpec& spec) {
  Json items = Json::array();
  for (const auto& [label, count] : spec.items)
    items.push_back({{"label", label}, {"count", count}});
  return {{"plate_id", spec.plate_id}, {"radius_cm", spec.radius_cm}, {"items", items}};
}

namespace detail {

inline PropertyLevel sample_level(Rng& rng, const LevelDistribution& d) {
  const double u = uniform01(rng);
  double acc = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    acc += d[i];
    if (u < acc) return PropertyLevel(static_cast<int>(i) + 1);
  }
  for (std::size_t i = d.size(); i-- > 0;)
    if (d[i] > 0.0) return PropertyLevel(static_cast<int>(i) + 1);
  return PropertyLevel(1);
}

}  // namespace detail

// Instantiates a plate: samples each item's properties from the registry and
// places items on a disc without overlap.
inline PlateState make_plate(const FoodRegistry& registry, const PlateSpec& spec,
                             std::uint64_t seed) {
  // Validate labels before consuming any randomness.
  double area = 0.0;
  for (const auto& [label, count] : spec.items) {
    const FoodEntry& e = registry.at(label);
    const double r = footprint_radius_cm(e.size);
    area += count * std::numbers::pi * r * r;
  }
  const double plate_area = std::numbers::pi * spec.radius_cm * spec.radius_cm;
  // Random disc packing rarely exceeds ~55% coverage.
  if (area > 0.55 * plate_area)
    throw LayoutError("plate '" + spec.plate_id + "' over capacity");

  Rng rng = make_rng(seed);
  PlateState plate;
  plate.plate_id = spec.plate_id;
  plate.radius_cm = spec.radius_cm;
  plate.ee_pose = {0.0, 0.0, 30.0, 0.0, 0.0, 0.0};
  int next_id = 0;
  for (const auto& [label, count] : spec.items) {
    const FoodEntry& e = registry.at(label);
    for (int c = 0; c < count; ++c) {
      FoodItemState item;
      item.item_id = next_id++;
      item.label = label;
      item.true_props = PropertyVector{e.shape, e.size,
                                       detail::sample_level(rng, e.softness),
                                       detail::sample_level(rng, e.moisture),
                                       detail::sample_level(rng, e.viscosity)};
      item.drift = e.drift;
      item.dippable = e.dippable;
      const double r = footprint_radius_cm(e.size);
      bool placed = false;
      for (int tries = 0; tries < 2000 && !placed; ++tries) {
        const double reach = spec.radius_cm - r;
        if (reach < 0) break;
        const double x = uniform(rng, -reach, reach);
        const double y = uniform(rng, -reach, reach);
        if (std::hypot(x, y) > reach) continue;
        bool clear = true;
        for (const auto& other : plate.items) {
          const double need = r + footprint_radius_cm(other.true_props.size);
          if (std::hypot(x - other.position.x_cm, y - other.position.y_cm) < need) {
            clear = false;
            break;
          }
        }
        if (clear) {
          item.position = {x, y};
          placed = true;
        }
      }
      if (!placed)
        throw LayoutError("could not place '" + label + "' on plate '" +
                          spec.plate_id + "'");
      plate.items.push_back(std::move(item));
    }
  }
  return plate;
}

}  // namespace bitesim
