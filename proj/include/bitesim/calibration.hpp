#pragma once
//
// Offline tool calibration: repeated skill executions on a fixed food set,
// success tallies, the natural-language summary handed to the planner, and
// dataset persistence.
//

#include <algorithm>
#include <cctype>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "bitesim/core.hpp"
#include "bitesim/interaction.hpp"
#include "bitesim/json_util.hpp"
#include "bitesim/registry.hpp"
#include "bitesim/rng.hpp"

namespace bitesim {

struct Tally {
  int successes = 0;
  int trials = 0;
  friend bool operator==(const Tally&, const Tally&) = default;
};

struct CalibrationRecord {
  std::string tool;
  std::string label;
  std::string display_name;
  PropertyVector props;  // annotated properties
  std::array<Tally, 6> tallies{};  // indexed by skill_index

  const Tally& tally(Skill s) const { return tallies[skill_index(s)]; }
};

struct Rollout {
  std::string label;
  Skill skill = Skill::skewer;
  int trial = 0;
  PropertyVector props;
  Outcome outcome;
  ObservationSeries observation;
};

struct CalibrationDataset {
  std::string tool;
  int trials_per_skill = 0;
  std::vector<CalibrationRecord> records;
  std::vector<Rollout> rollouts;

  bool covers(Skill s) const {
    return std::any_of(records.begin(), records.end(),
                       [&](const auto& r) { return r.tally(s).trials > 0; });
  }
};

// Foods and trial count of the default calibration protocol.
inline const std::vector<std::string>& default_calibration_foods() {
  static const std::vector<std::string> foods{"nuts", "cheese", "raw_carrot", "cooked_carrot",
                                              "soft_tofu"};
  return foods;
}
inline constexpr int kDefaultCalibrationTrials = 5;

struct CalibrationOptions {
  // Stratify the uniform outcome draws of the trials of one (food, skill)
  // cell: each draw stays marginally uniform, the tally concentrates on
  // round(trials * p).
  bool stratified = true;
};

inline CalibrationDataset run_calibration(std::uint64_t seed, const InteractionModel& model,
                                          const Tool& tool, const FoodRegistry& registry,
                                          const std::vector<std::string>& foods,
                                          int trials_per_skill,
                                          CalibrationOptions options = {}) {
  if (foods.empty()) throw std::invalid_argument("run_calibration: empty food list");
  if (trials_per_skill < 1)
    throw std::invalid_argument("run_calibration: trials_per_skill must be >= 1");
  for (const auto& f : foods) (void)registry.at(f);

  CalibrationDataset ds;
  ds.tool = tool.name;
  ds.trials_per_skill = trials_per_skill;
  for (const auto& label : foods) {
    const FoodEntry& entry = registry.at(label);
    CalibrationRecord rec;
    rec.tool = tool.name;
    rec.label = label;
    rec.display_name = entry.display_name;
    rec.props = registry.mode_properties(label);

    for (Skill skill : kAllSkills) {
      const std::uint64_t cell = derive_seed(seed, {hash_tag(label), skill_index(skill)});
      Rng cell_rng = make_rng(cell);
      std::vector<double> draws(static_cast<std::size_t>(trials_per_skill));
      if (options.stratified) {
        std::vector<std::size_t> strata(draws.size());
        std::iota(strata.begin(), strata.end(), std::size_t{0});
        for (std::size_t i = strata.size(); i > 1; --i)
          std::swap(strata[i - 1], strata[uniform_index(cell_rng, i)]);
        for (std::size_t t = 0; t < draws.size(); ++t)
          draws[t] = (static_cast<double>(strata[t]) + uniform01(cell_rng)) /
                     static_cast<double>(draws.size());
      } else {
        for (auto& u : draws) u = uniform01(cell_rng);
      }

      Tally& tally = rec.tallies[skill_index(skill)];
      for (int t = 0; t < trials_per_skill; ++t) {
        FoodItemState item;
        item.item_id = t;
        item.label = label;
        item.true_props = rec.props;
        item.dippable = entry.dippable;
        Rng obs_rng = make_rng(derive_seed(cell, {static_cast<std::uint64_t>(t), hash_tag("obs")}));
        ExecutionResult res = execute_skill_with_draw(draws[static_cast<std::size_t>(t)], obs_rng,
                                                      model, tool, skill, item, 0, t + 1);
        ++tally.trials;
        if (res.outcome.success) ++tally.successes;
        ds.rollouts.push_back(Rollout{label, skill, t, effective_properties(item, 0),
                                      res.outcome, res.observation});
      }
    }
    ds.records.push_back(std::move(rec));
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Summary text

namespace detail {

inline std::string capitalize(std::string s) {
  if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s;
}

inline std::string tool_phrase(const std::string& tool) {
  std::string out = tool;
  std::replace(out.begin(), out.end(), '_', ' ');
  return out;
}

}  // namespace detail

inline std::string property_line(const PropertyVector& p) {
  return "Shape: " + detail::capitalize(std::string(to_string(p.shape))) +
         ", Size: " + detail::capitalize(std::string(to_string(p.size))) +
         ", Softness: " + std::to_string(p.softness.value()) +
         ", Moisture: " + std::to_string(p.moisture.value()) +
         ", Viscosity: " + std::to_string(p.viscosity.value());
}

inline std::string render_record(const CalibrationRecord& r) {
  static constexpr std::array<Skill, 5> order{Skill::skewer, Skill::scoop, Skill::cut,
                                              Skill::push, Skill::dip};
  std::string out = "Food Item: " + r.display_name + "\n" + property_line(r.props) +
                    "\nSkill with Success Rate: ";
  for (std::size_t i = 0; i < order.size(); ++i) {
    const Tally& t = r.tally(order[i]);
    if (i) out += ", ";
    out += detail::capitalize(std::string(to_string(order[i]))) + " " +
           std::to_string(t.successes) + "/" + std::to_string(t.trials);
  }
  return out;
}

// The calibration summary injected into the planner context.
inline std::string render_summary(const CalibrationDataset& ds) {
  if (ds.records.empty()) throw std::invalid_argument("render_summary: empty dataset");
  std::string out = "The robot interacts with various food items using a " +
                    detail::tool_phrase(ds.tool) +
                    ". We summarize the history as follows:\n";
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    if (i) out += "\n\n";
    out += render_record(ds.records[i]);
  }
  out += "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Persistence

inline Json props_to_json(const PropertyVector& p) {
  return {{"shape", std::string(to_string(p.shape))},
          {"size", std::string(to_string(p.size))},
          {"softness", p.softness.value()},
          {"moisture", p.moisture.value()},
          {"viscosity", p.viscosity.value()}};
}

inline PropertyVector props_from_json(const Json& j, const std::string& where) {
  auto level = [&](const char* key) {
    const int v = get_as<int>(require(j, key, where), where + "." + key);
    if (v < 1 || v > kLevels) throw ConfigError(where + "." + key + ": level outside [1, 5]");
    return PropertyLevel(v);
  };
  return PropertyVector{parse_shape_field(require(j, "shape", where), where + ".shape"),
                        parse_size_field(require(j, "size", where), where + ".size"),
                        level("softness"), level("moisture"), level("viscosity")};
}

inline Json dataset_to_json(const CalibrationDataset& ds) {
  Json records = Json::array();
  for (const auto& r : ds.records) {
    Json tallies = Json::object();
    for (Skill s : kAllSkills)
      tallies[std::string(to_string(s))] = {r.tally(s).successes, r.tally(s).trials};
    records.push_back({{"label", r.label},
                       {"display_name", r.display_name},
                       {"props", props_to_json(r.props)},
                       {"tallies", tallies}});
  }
  Json rollouts = Json::array();
  for (const auto& ro : ds.rollouts) {
    Json features = Json::object();
    for (Channel c : kChannels) features[std::string(to_string(c))] = ro.observation[c];
    rollouts.push_back({{"label", ro.label},
                        {"skill", std::string(to_string(ro.skill))},
                        {"trial", ro.trial},
                        {"props", props_to_json(ro.props)},
                        {"success", ro.outcome.success},
                        {"features", features},
                        {"length", ro.observation.length}});
  }
  return {{"schema_version", kSchemaVersion},
          {"tool", ds.tool},
          {"trials_per_skill", ds.trials_per_skill},
          {"records", records},
          {"rollouts", rollouts}};
}

inline CalibrationDataset dataset_from_json(const Json& doc,
                                            const std::string& origin = "calibration") {
  check_schema_version(doc, origin);
  CalibrationDataset ds;
  ds.tool = get_as<std::string>(require(doc, "tool", origin), origin + ".tool");
  ds.trials_per_skill = field_or<int>(doc, "trials_per_skill", 0, origin);
  const Json& records = require(doc, "records", origin);
  for (std::size_t i = 0; i < records.size(); ++i) {
    const std::string w = origin + ".records[" + std::to_string(i) + "]";
    const Json& rj = records[i];
    CalibrationRecord r;
    r.tool = ds.tool;
    r.label = get_as<std::string>(require(rj, "label", w), w + ".label");
    r.display_name = field_or<std::string>(rj, "display_name", r.label, w);
    r.props = props_from_json(require(rj, "props", w), w + ".props");
    const Json& tj = require(rj, "tallies", w);
    for (const auto& [name, pair] : tj.items()) {
      auto s = parse_skill(name);
      if (!s) throw ConfigError(w + ".tallies: unknown skill '" + name + "'");
      if (!pair.is_array() || pair.size() != 2)
        throw ConfigError(w + ".tallies." + name + ": expected [successes, trials]");
      Tally t{get_as<int>(pair[0], w), get_as<int>(pair[1], w)};
      if (t.successes < 0 || t.successes > t.trials)
        throw ConfigError(w + ".tallies." + name + ": need 0 <= successes <= trials");
      r.tallies[skill_index(*s)] = t;
    }
    ds.records.push_back(std::move(r));
  }
  if (doc.contains("rollouts")) {
    const Json& rollouts = doc["rollouts"];
    for (std::size_t i = 0; i < rollouts.size(); ++i) {
      const std::string w = origin + ".rollouts[" + std::to_string(i) + "]";
      const Json& rj = rollouts[i];
      Rollout ro;
      ro.label = get_as<std::string>(require(rj, "label", w), w + ".label");
      ro.skill = parse_skill_field(require(rj, "skill", w), w + ".skill");
      ro.trial = field_or<int>(rj, "trial", 0, w);
      ro.props = props_from_json(require(rj, "props", w), w + ".props");
      ro.outcome = Outcome{get_as<bool>(require(rj, "success", w), w + ".success"),
                           ro.trial + 1, ro.skill};
      const Json& fj = require(rj, "features", w);
      for (Channel c : kChannels)
        ro.observation[c] = get_as<double>(require(fj, std::string(to_string(c)), w + ".features"),
                                           w + ".features");
      ro.observation.length = field_or<int>(rj, "length", 1, w);
      ds.rollouts.push_back(std::move(ro));
    }
  }
  return ds;
}

inline CalibrationDataset load_dataset(const std::string& path) {
  return dataset_from_json(load_json_file(path), path);
}

}  // namespace bitesim
