#pragma once
//
// Stochastic interaction simulator: the ground-truth skill outcome model and
// the synthetic visuo-haptic observation model.
//

#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <utility>

#include "bitesim/core.hpp"
#include "bitesim/json_util.hpp"
#include "bitesim/rng.hpp"

namespace bitesim {

// ---------------------------------------------------------------------------
// Observation features

enum class Channel : std::uint8_t {
  peak_force = 0,
  force_slope,
  penetration_depth,
  deformation_ratio,
  gloss,
  residue,
  descent_depth,
};
inline constexpr std::size_t kChannelCount = 7;
inline constexpr std::array<Channel, kChannelCount> kChannels{
    Channel::peak_force, Channel::force_slope, Channel::penetration_depth,
    Channel::deformation_ratio, Channel::gloss, Channel::residue,
    Channel::descent_depth};

enum class Modality : std::uint8_t { haptic, visual, pose };

inline constexpr Modality modality(Channel c) {
  switch (c) {
    case Channel::peak_force:
    case Channel::force_slope:
    case Channel::penetration_depth: return Modality::haptic;
    case Channel::deformation_ratio:
    case Channel::gloss:
    case Channel::residue: return Modality::visual;
    case Channel::descent_depth: return Modality::pose;
  }
  return Modality::pose;
}

inline constexpr std::string_view to_string(Channel c) {
  switch (c) {
    case Channel::peak_force: return "peak_force";
    case Channel::force_slope: return "force_slope";
    case Channel::penetration_depth: return "penetration_depth";
    case Channel::deformation_ratio: return "deformation_ratio";
    case Channel::gloss: return "gloss";
    case Channel::residue: return "residue";
    case Channel::descent_depth: return "descent_depth";
  }
  return "?";
}

inline std::optional<Channel> parse_channel(std::string_view s) {
  for (Channel c : kChannels)
    if (to_string(c) == s) return c;
  return std::nullopt;
}

inline constexpr std::size_t channel_index(Channel c) { return static_cast<std::size_t>(c); }

// Per-attempt summary of the force, image and pose tracks.
struct ObservationSeries {
  std::array<double, kChannelCount> features{};
  int length = 1;  // number of time steps in the underlying series

  double operator[](Channel c) const { return features[channel_index(c)]; }
  double& operator[](Channel c) { return features[channel_index(c)]; }

  bool valid() const {
    if (length < 1) return false;
    for (double f : features)
      if (!std::isfinite(f)) return false;
    return true;
  }

  friend bool operator==(const ObservationSeries&, const ObservationSeries&) = default;
};

struct ChannelSpec {
  Property governing = Property::softness;
  std::array<double, kLevels> means{};  // by level of the governing property
  double noise_std = 0.0;
  double failure_shift = 0.0;  // added to the mean when the attempt fails
};

class ObservationModel {
 public:
  std::array<ChannelSpec, kChannelCount> channels{};
  // scale[modality][skill] multiplies the level mean.
  std::array<std::array<double, 6>, 3> scale{};
  std::array<int, 6> base_length{};
  double noise_scale = 1.0;

  const ChannelSpec& channel(Channel c) const { return channels[channel_index(c)]; }

  double mean(Channel c, Skill skill, PropertyLevel level, bool success) const {
    const ChannelSpec& ch = channel(c);
    return ch.means[level.index()] *
               scale[static_cast<std::size_t>(modality(c))][skill_index(skill)] +
           (success ? 0.0 : ch.failure_shift);
  }

  static ObservationModel from_json(const Json& j, const std::string& where) {
    ObservationModel m;
    const Json& chans = require(j, "channels", where);
    for (Channel c : kChannels) {
      const std::string name(to_string(c));
      const std::string w = where + ".channels." + name;
      const Json& cj = require(chans, name, where + ".channels");
      ChannelSpec& spec = m.channels[channel_index(c)];
      const auto prop = get_as<std::string>(require(cj, "property", w), w + ".property");
      if (prop == "softness") spec.governing = Property::softness;
      else if (prop == "moisture") spec.governing = Property::moisture;
      else if (prop == "viscosity") spec.governing = Property::viscosity;
      else throw ConfigError(w + ".property: unknown property '" + prop + "'");
      const Json& means = require(cj, "means", w);
      if (!means.is_array() || means.size() != kLevels)
        throw ConfigError(w + ".means: expected 5 numbers");
      for (std::size_t i = 0; i < kLevels; ++i) {
        spec.means[i] = get_as<double>(means[i], w + ".means");
        if (!(spec.means[i] > 0.0))
          throw ConfigError(w + ".means: level means must be positive");
      }
      const bool inc = spec.means[1] > spec.means[0];
      for (std::size_t i = 1; i < kLevels; ++i)
        if (inc ? !(spec.means[i] > spec.means[i - 1]) : !(spec.means[i] < spec.means[i - 1]))
          throw ConfigError(w + ".means: must be strictly monotone in level");
      spec.noise_std = get_as<double>(require(cj, "noise_std", w), w + ".noise_std");
      if (spec.noise_std < 0) throw ConfigError(w + ".noise_std: must be >= 0");
      spec.failure_shift = field_or<double>(cj, "failure_shift", 0.0, w);
    }
    const Json& scale = require(j, "skill_scale", where);
    const std::array<std::string, 3> groups{"haptic", "visual", "pose"};
    for (std::size_t g = 0; g < 3; ++g) {
      const std::string w = where + ".skill_scale." + groups[g];
      const Json& gj = require(scale, groups[g], where + ".skill_scale");
      for (Skill s : kAllSkills) {
        const double v = get_as<double>(require(gj, std::string(to_string(s)), w), w);
        if (!(v > 0.0)) throw ConfigError(w + ": scales must be positive");
        m.scale[g][skill_index(s)] = v;
      }
    }
    const Json& len = require(j, "base_length", where);
    for (Skill s : kAllSkills) {
      m.base_length[skill_index(s)] =
          get_as<int>(require(len, std::string(to_string(s)), where + ".base_length"),
                      where + ".base_length");
      if (m.base_length[skill_index(s)] < 1)
        throw ConfigError(where + ".base_length: must be >= 1");
    }
    m.noise_scale = field_or<double>(j, "noise_scale", 1.0, where);
    return m;
  }
};

// Draws one observation summary for an executed skill.
inline ObservationSeries synth_observations(Rng& rng, const ObservationModel& model,
                                            const Tool& /*tool*/, Skill skill,
                                            const PropertyVector& props, bool success) {
  ObservationSeries obs;
  for (Channel c : kChannels) {
    const ChannelSpec& ch = model.channel(c);
    const double mu = model.mean(c, skill, props.level(ch.governing), success);
    // Always draw, so the stream position does not depend on noise settings.
    const double z = standard_normal(rng);
    obs[c] = mu + model.noise_scale * ch.noise_std * z;
  }
  obs.length = model.base_length[skill_index(skill)] +
               static_cast<int>(uniform_index(rng, 11));
  return obs;
}

// ---------------------------------------------------------------------------
// Outcome model

struct SkillCoefficients {
  double bias = 0.0;
  std::array<double, kLevels> softness{};
  std::array<double, kLevels> moisture{};
  std::array<double, kLevels> viscosity{};
  std::array<std::array<double, kLevels>, kLevels> softness_moisture{};  // [s][m]
  double large = 0.0;
  double braced = 0.0;
  double cut_applied = 0.0;

  double logit(const PropertyVector& p, ItemFlags flags) const {
    double x = bias + softness[p.softness.index()] + moisture[p.moisture.index()] +
               viscosity[p.viscosity.index()] +
               softness_moisture[p.softness.index()][p.moisture.index()];
    if (p.size == Size::large) x += large;
    if (flags.has(ItemFlag::braced)) x += braced;
    if (flags.has(ItemFlag::cut_applied)) x += cut_applied;
    return x;
  }

  static SkillCoefficients from_json(const Json& j, const std::string& where) {
    SkillCoefficients c;
    c.bias = field_or<double>(j, "bias", 0.0, where);
    auto arr5 = [&](const char* key, std::array<double, kLevels>& out) {
      if (!j.contains(key)) return;
      const Json& a = j.at(key);
      if (!a.is_array() || a.size() != kLevels)
        throw ConfigError(where + "." + key + ": expected 5 numbers");
      for (std::size_t i = 0; i < kLevels; ++i)
        out[i] = get_as<double>(a[i], where + "." + key);
    };
    arr5("softness", c.softness);
    arr5("moisture", c.moisture);
    arr5("viscosity", c.viscosity);
    if (j.contains("softness_moisture")) {
      const Json& a = j.at("softness_moisture");
      if (!a.is_array() || a.size() != kLevels)
        throw ConfigError(where + ".softness_moisture: expected 5 rows");
      for (std::size_t s = 0; s < kLevels; ++s) {
        if (!a[s].is_array() || a[s].size() != kLevels)
          throw ConfigError(where + ".softness_moisture: expected 5x5");
        for (std::size_t m = 0; m < kLevels; ++m)
          c.softness_moisture[s][m] = get_as<double>(a[s][m], where + ".softness_moisture");
      }
    }
    c.large = field_or<double>(j, "large", 0.0, where);
    c.braced = field_or<double>(j, "braced", 0.0, where);
    c.cut_applied = field_or<double>(j, "cut_applied", 0.0, where);
    return c;
  }
};

class GroundTruthOutcomeModel {
 public:
  GroundTruthOutcomeModel() = default;

  // Test double: every execution succeeds with probability p, regardless
  // of properties or feasibility.
  static GroundTruthOutcomeModel forced(double p) {
    GroundTruthOutcomeModel m;
    m.forced_ = p;
    return m;
  }

  std::optional<double> forced_probability() const { return forced_; }

  void set(Skill s, SkillCoefficients c) { base_[s] = c; }
  void set_override(const std::string& tool, Skill s, SkillCoefficients c) {
    overrides_[{tool, s}] = c;
  }

  const SkillCoefficients* find(const std::string& tool, Skill s) const {
    if (auto it = overrides_.find({tool, s}); it != overrides_.end()) return &it->second;
    if (auto it = base_.find(s); it != base_.end()) return &it->second;
    return nullptr;
  }

  static GroundTruthOutcomeModel from_json(const Json& j, const std::string& where) {
    GroundTruthOutcomeModel m;
    const Json& skills = require(j, "skills", where);
    for (const auto& [name, cj] : skills.items()) {
      auto s = parse_skill(name);
      if (!s) throw ConfigError(where + ".skills: unknown skill '" + name + "'");
      m.base_[*s] = SkillCoefficients::from_json(cj, where + ".skills." + name);
    }
    for (Skill s : kAcquisitionSkills)
      if (!m.base_.count(s))
        throw ConfigError(where + ".skills: missing acquisition skill '" +
                          std::string(to_string(s)) + "'");
    if (j.contains("tool_overrides")) {
      for (const auto& [tool, tj] : j.at("tool_overrides").items()) {
        for (const auto& [name, cj] : tj.items()) {
          auto s = parse_skill(name);
          if (!s) throw ConfigError(where + ".tool_overrides." + tool + ": unknown skill");
          m.overrides_[{tool, *s}] =
              SkillCoefficients::from_json(cj, where + ".tool_overrides." + tool + "." + name);
        }
      }
    }
    return m;
  }

 private:
  std::map<Skill, SkillCoefficients> base_;
  std::map<std::pair<std::string, Skill>, SkillCoefficients> overrides_;
  std::optional<double> forced_;
};

inline double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Probability that `skill` succeeds on an item with properties `props`. For
// push and cut this is the probability that the manipulation takes effect.
inline double success_probability(const GroundTruthOutcomeModel& model, const Tool& tool,
                                  Skill skill, const PropertyVector& props,
                                  ItemFlags flags = {}) {
  if (auto f = model.forced_probability()) return *f;
  if (skill == Skill::twirl && props.shape != Shape::noodle) return 0.0;
  const SkillCoefficients* c = model.find(tool.name, skill);
  if (!c) {
    if (!is_acquisition(skill)) return 1.0;
    throw ModelError("no outcome coefficients for skill '" +
                     std::string(to_string(skill)) + "'");
  }
  double x = c->logit(props, flags);
  if (skill == Skill::skewer || skill == Skill::cut) x += tool.hardness_offset;
  if (skill == Skill::scoop) x += tool.scoop_capacity;
  return logistic(x);
}

// Outcome and observation models bundled as the simulator's world.
struct InteractionModel {
  GroundTruthOutcomeModel outcome;
  ObservationModel observation;

  static InteractionModel from_json(const Json& doc, const std::string& origin = "world") {
    check_schema_version(doc, origin);
    return InteractionModel{
        GroundTruthOutcomeModel::from_json(require(doc, "outcome", origin), origin + ".outcome"),
        ObservationModel::from_json(require(doc, "observation", origin), origin + ".observation")};
  }

  static InteractionModel load(const std::string& path) {
    return from_json(load_json_file(path), path);
  }
};

struct Outcome {
  bool success = false;
  int attempt_index = 1;
  Skill skill = Skill::skewer;
  friend bool operator==(const Outcome&, const Outcome&) = default;
};

struct ExecutionResult {
  Outcome outcome;
  ObservationSeries observation;
  FoodItemState item;
};

// Executes `skill` with a pre-drawn uniform `u` deciding the outcome.
// Calibration uses this to stratify draws across repeated trials.
inline ExecutionResult execute_skill_with_draw(double u, Rng& obs_rng,
                                               const InteractionModel& model,
                                               const Tool& tool, Skill skill,
                                               const FoodItemState& item, int clock,
                                               int attempt_index,
                                               double plate_radius_cm = 12.0) {
  if (item.flags.terminal())
    throw StateError("execute_skill on finished item " + std::to_string(item.item_id));
  const PropertyVector props = effective_properties(item, clock);
  double p = 0.0;
  if (auto f = model.outcome.forced_probability()) {
    p = *f;
  } else {
    // Infeasible executions are failed attempts, not errors.
    const bool feasible = !(skill == Skill::twirl && props.shape != Shape::noodle) &&
                          !(skill == Skill::dip && !item.dippable);
    p = feasible ? success_probability(model.outcome, tool, skill, props, item.flags) : 0.0;
  }
  const bool success = u < p;

  FoodItemState next = item;
  if (success) {
    switch (skill) {
      case Skill::cut: next.flags = next.flags.with(ItemFlag::cut_applied); break;
      case Skill::push: {
        next.flags = next.flags.with(ItemFlag::braced);
        // Pushed outward until it rests against the rim.
        const double reach = plate_radius_cm - footprint_radius_cm(props.size);
        const double r = std::hypot(item.position.x_cm, item.position.y_cm);
        if (r > 1e-9 && reach > 0) {
          next.position = {item.position.x_cm * reach / r, item.position.y_cm * reach / r};
        } else if (reach > 0) {
          next.position = {reach, 0.0};
        }
        break;
      }
      default: next.flags = next.flags.with(ItemFlag::acquired); break;
    }
  }
  ExecutionResult out{Outcome{success, attempt_index, skill},
                      synth_observations(obs_rng, model.observation, tool, skill, props, success),
                      std::move(next)};
  return out;
}

inline ExecutionResult execute_skill(Rng& rng, const InteractionModel& model, const Tool& tool,
                                     Skill skill, const FoodItemState& item, int clock,
                                     int attempt_index, double plate_radius_cm = 12.0) {
  const double u = uniform01(rng);
  return execute_skill_with_draw(u, rng, model, tool, skill, item, clock, attempt_index,
                                 plate_radius_cm);
}

}  // namespace bitesim
