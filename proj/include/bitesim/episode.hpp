#pragma once
//
// Episode loop: serve each item of a plate in order, choose a skill per
// policy, execute it, refine the belief, and stop after acquisition or an
// exhausted attempt budget.
//

#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "bitesim/attempt.hpp"
#include "bitesim/backend.hpp"
#include "bitesim/calibration.hpp"
#include "bitesim/estimator.hpp"
#include "bitesim/interaction.hpp"
#include "bitesim/likelihood.hpp"
#include "bitesim/planner.hpp"
#include "bitesim/registry.hpp"
#include "bitesim/rng.hpp"

namespace bitesim {

enum class PolicyKind : std::uint8_t {
  savor,
  savor_no_calibration,
  vision_only,
  haptic_only,
  category_baseline,
  random,
};

inline constexpr std::array<PolicyKind, 6> kPolicies{
    PolicyKind::savor,       PolicyKind::savor_no_calibration, PolicyKind::vision_only,
    PolicyKind::haptic_only, PolicyKind::category_baseline,    PolicyKind::random};

inline constexpr std::string_view to_string(PolicyKind p) {
  switch (p) {
    case PolicyKind::savor: return "savor";
    case PolicyKind::savor_no_calibration: return "savor-no-calibration";
    case PolicyKind::vision_only: return "vision-only";
    case PolicyKind::haptic_only: return "haptic-only";
    case PolicyKind::category_baseline: return "category-baseline";
    case PolicyKind::random: return "random";
  }
  return "?";
}

inline std::optional<PolicyKind> parse_policy(std::string_view s) {
  for (PolicyKind p : kPolicies)
    if (to_string(p) == s) return p;
  return std::nullopt;
}

inline PolicyKind require_policy(std::string_view s) {
  auto p = parse_policy(s);
  if (!p) throw ConfigError("unknown policy '" + std::string(s) + "'");
  return *p;
}

// Policies that refine a belief and plan over it.
inline constexpr bool uses_estimator(PolicyKind p) {
  return p == PolicyKind::savor || p == PolicyKind::savor_no_calibration ||
         p == PolicyKind::vision_only || p == PolicyKind::haptic_only;
}

inline constexpr bool needs_calibration(PolicyKind p) {
  return uses_estimator(p);  // no-calibration still fits its likelihoods from it
}

inline ChannelMask policy_mask(PolicyKind p) {
  switch (p) {
    case PolicyKind::vision_only: return modality_mask({Modality::visual});
    case PolicyKind::haptic_only: return modality_mask({Modality::haptic, Modality::pose});
    default: return all_channels();
  }
}

// Fixed label -> skill lookup of the category baseline.
class CategoryTable {
 public:
  static CategoryTable from_json(const Json& doc, const std::string& origin = "category_table") {
    check_schema_version(doc, origin);
    CategoryTable t;
    t.fallback_ = parse_skill_field(require(doc, "default_skill", origin), origin + ".default_skill");
    if (!is_acquisition(t.fallback_))
      throw ConfigError(origin + ".default_skill: must be an acquisition skill");
    const Json& labels = require(doc, "labels", origin);
    for (const auto& [label, skill] : labels.items()) {
      const Skill s = parse_skill_field(skill, origin + ".labels." + label);
      if (!is_acquisition(s))
        throw ConfigError(origin + ".labels." + label + ": must be an acquisition skill");
      t.skills_[label] = s;
    }
    return t;
  }

  static CategoryTable load(const std::string& path) { return from_json(load_json_file(path), path); }

  void set(const std::string& label, Skill s) { skills_[label] = s; }

  Skill skill_for(const std::string& label) const {
    auto it = skills_.find(label);
    return it == skills_.end() ? fallback_ : it->second;
  }

 private:
  std::map<std::string, Skill> skills_;
  Skill fallback_ = Skill::skewer;
};

struct EstimatorParams {
  double theta_th = std::log(0.4);
  double blend_w = 0.7;
};

struct PromptAssets {
  std::string planner_template;
  std::string skill_descriptions;
  std::string property_template;
};

// Everything an episode reads; shared read-only between parallel episodes.
struct EpisodeContext {
  const InteractionModel* world = nullptr;
  Tool tool;
  const FoodRegistry* registry = nullptr;
  const PriorTable* priors = nullptr;
  const CategoryTable* category = nullptr;
  const LikelihoodModel* likelihood = nullptr;
  const SkillEstimateTable* estimates = nullptr;  // calibrated planner table
  std::string calibration_summary;
  PlannerParams planner;
  EstimatorParams estimator;
  int budget = 3;
  LanguageBackend* backend = nullptr;  // optional; deterministic selector otherwise
  PromptAssets prompts;
};

struct ItemResult {
  int item_id = 0;
  std::string label;
  bool acquired = false;
  int attempts = 0;
  friend bool operator==(const ItemResult&, const ItemResult&) = default;
};

struct EpisodeLog {
  std::string policy;
  std::string plate_id;
  int seed_index = 0;
  std::uint64_t seed = 0;
  std::vector<AttemptRecord> attempts;
  std::vector<ItemResult> items;
  friend bool operator==(const EpisodeLog&, const EpisodeLog&) = default;
};

namespace detail {

inline constexpr std::uint64_t kOutcomeTag = 0x6f7574636f6d65ULL;  // "outcome"
inline constexpr std::uint64_t kObservationTag = 0x6f6273ULL;      // "obs"
inline constexpr std::uint64_t kPolicyTag = 0x706f6c696379ULL;     // "policy"

// Outcome and observation streams depend only on (plate seed, item, attempt,
// skill), so every policy sees the same draw for the same action.
inline std::uint64_t action_seed(std::uint64_t plate_seed, int item_id, int attempt, Skill skill,
                                 std::uint64_t tag) {
  return derive_seed(plate_seed, {static_cast<std::uint64_t>(item_id),
                                  static_cast<std::uint64_t>(attempt), skill_index(skill), tag});
}

}  // namespace detail

inline EpisodeLog run_episode(std::uint64_t plate_seed, PlateState plate, PolicyKind policy,
                              const EpisodeContext& ctx) {
  if (ctx.budget < 1) throw std::invalid_argument("run_episode: budget must be >= 1");
  if (!ctx.world || !ctx.registry || !ctx.priors)
    throw std::invalid_argument("run_episode: incomplete context");
  if (policy == PolicyKind::category_baseline && !ctx.category)
    throw ConfigError("category-baseline policy needs a category table");
  if (uses_estimator(policy) && !ctx.likelihood)
    throw ConfigError(std::string(to_string(policy)) + " policy needs fitted likelihoods");
  if (policy != PolicyKind::savor_no_calibration && uses_estimator(policy) && !ctx.estimates)
    throw ConfigError(std::string(to_string(policy)) + " policy needs a calibration dataset");

  static const SkillEstimateTable uncalibrated = SkillEstimateTable::constant(0.5);
  const SkillEstimateTable& table =
      policy == PolicyKind::savor_no_calibration ? uncalibrated
                                                 : (ctx.estimates ? *ctx.estimates : uncalibrated);
  const ChannelMask mask = policy_mask(policy);

  EpisodeLog log;
  log.policy = std::string(to_string(policy));
  log.plate_id = plate.plate_id;
  log.seed = plate_seed;

  // With a backend, its answer replaces the table prior of each label.
  PriorTable priors = *ctx.priors;
  if (ctx.backend && uses_estimator(policy) && !ctx.prompts.property_template.empty()) {
    std::set<std::string> asked;
    for (const auto& item : plate.items) {
      if (!asked.insert(item.label).second) continue;
      const auto reply = ctx.backend->complete(
          build_property_prompt(ctx.prompts.property_template, item.label, "image of " + item.label),
          "image of " + item.label);
      if (reply)
        if (auto row = parse_property_answer(*reply)) priors.set(item.label, *row);
    }
  }

  Belief belief;
  for (std::size_t idx = 0; idx < plate.items.size(); ++idx) {
    const int id = plate.items[idx].item_id;
    const std::string label = plate.items[idx].label;
    belief = transfer_prior(belief, id, label, log.attempts, priors, ctx.estimator.blend_w,
                            ctx.registry);
    std::vector<AttemptRecord> item_history;
    ItemResult result{id, label, false, 0};

    for (int attempt = 1; attempt <= ctx.budget && !plate.items[idx].flags.terminal(); ++attempt) {
      FoodItemState& item = plate.items[idx];
      const PropertyVector seen = effective_properties(item, plate.clock);
      // Shape and size are read off the scene directly.
      BeliefEntry& entry = belief.entries.at(id);
      entry.shape = seen.shape;
      entry.size = seen.size;
      const PlannerTarget target{label, seen.shape, seen.size, item.dippable, item.flags};

      Skill skill = Skill::skewer;
      switch (policy) {
        case PolicyKind::category_baseline:
          if (seen.size == Size::large &&
              std::none_of(item_history.begin(), item_history.end(),
                           [](const AttemptRecord& r) { return r.skill == Skill::cut; }))
            skill = Skill::cut;
          else
            skill = ctx.category->skill_for(label);
          break;
        case PolicyKind::random: {
          Rng rng = make_rng(derive_seed(plate_seed, {static_cast<std::uint64_t>(id),
                                                      static_cast<std::uint64_t>(attempt),
                                                      detail::kPolicyTag}));
          skill = kAcquisitionSkills[uniform_index(rng, kAcquisitionSkills.size())];
          break;
        }
        default: {
          const auto scores = score_skills(table, entry, target, ctx.planner);
          skill = select_skill(scores, target, item_history);
          if (ctx.backend) {
            PlannerContext pc{ctx.calibration_summary, ctx.tool.name, ctx.prompts.skill_descriptions,
                              render_history(log.attempts, belief), label, entry.point_estimate()};
            const auto reply =
                ctx.backend->complete(build_planner_prompt(ctx.prompts.planner_template, pc),
                                      "image of " + label);
            if (reply)
              if (auto s = parse_answer_skill(*reply)) skill = *s;
          }
        }
      }

      AttemptRecord rec;
      rec.plate_id = plate.plate_id;
      rec.item_id = id;
      rec.label = label;
      rec.attempt_index = attempt;
      rec.skill = skill;
      rec.entropy_pre = entry.entropy();

      Rng outcome_rng =
          make_rng(detail::action_seed(plate_seed, id, attempt, skill, detail::kOutcomeTag));
      const double u = uniform01(outcome_rng);
      Rng obs_rng =
          make_rng(detail::action_seed(plate_seed, id, attempt, skill, detail::kObservationTag));
      ExecutionResult res = execute_skill_with_draw(u, obs_rng, *ctx.world, ctx.tool, skill, item,
                                                    plate.clock, attempt, plate.radius_cm);
      rec.success = res.outcome.success;
      item = res.item;

      if (uses_estimator(policy)) {
        UpdateResult up =
            update_belief(belief, id, res.observation, *ctx.likelihood, ctx.estimator.theta_th, mask);
        for (Property p : kScalarProperties) {
          const auto i = static_cast<std::size_t>(p);
          rec.psi_max[i] = up.logits.row_max(p);
          rec.gated[i] = !up.updated[i];
        }
        belief = std::move(up.belief);
      }
      rec.entropy_post = belief.at(id).entropy();

      plate = advance_clock(std::move(plate));
      log.attempts.push_back(rec);
      item_history.push_back(rec);
      ++result.attempts;
      if (rec.acquired()) result.acquired = true;
    }
    FoodItemState& item = plate.items[idx];
    if (!item.flags.terminal()) item.flags = item.flags.with(ItemFlag::removed);
    log.items.push_back(result);
  }
  return log;
}

}  // namespace bitesim
