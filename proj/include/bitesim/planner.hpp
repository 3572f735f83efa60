#pragma once
//
// Skill selection: calibration-derived success estimates marginalized over
// the belief, feasibility rules, the pre-acquisition fallback, and the
// prompt/answer plumbing for an optional language-model backend.
//

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "bitesim/attempt.hpp"
#include "bitesim/calibration.hpp"
#include "bitesim/core.hpp"
#include "bitesim/error.hpp"
#include "bitesim/estimator.hpp"

namespace bitesim {

struct PlannerParams {
  double tau = 1.0;
  double alpha = 1.0;
  double theta_feas = 0.35;
};

// Kernel-weighted, Laplace-smoothed success rate of `skill` at the level
// triple (s, m, v), from the calibration tallies.
inline double calibration_success_estimate(const CalibrationDataset& ds, Skill skill, int s, int m,
                                           int v, double tau, double alpha) {
  if (!(tau > 0.0)) throw std::invalid_argument("tau must be > 0");
  if (!(alpha > 0.0)) throw std::invalid_argument("alpha must be > 0");
  double num = alpha, den = 2.0 * alpha;
  bool covered = false;
  for (const auto& r : ds.records) {
    const Tally& t = r.tally(skill);
    if (t.trials == 0) continue;
    covered = true;
    const int d = std::abs(r.props.softness.value() - s) + std::abs(r.props.moisture.value() - m) +
                  std::abs(r.props.viscosity.value() - v);
    const double k = std::exp(-d / tau);
    num += k * t.successes;
    den += k * t.trials;
  }
  if (!covered)
    throw CoverageError("no calibration records for skill '" + std::string(to_string(skill)) + "'");
  return num / den;
}

inline double calibration_success_estimate(const CalibrationDataset& ds, Skill skill,
                                           const PropertyVector& p, double tau, double alpha) {
  return calibration_success_estimate(ds, skill, p.softness.value(), p.moisture.value(),
                                      p.viscosity.value(), tau, alpha);
}

// ĝ for every acquisition skill on all 125 level triples.
class SkillEstimateTable {
 public:
  static constexpr std::size_t kTriples = kLevels * kLevels * kLevels;

  static SkillEstimateTable from_calibration(const CalibrationDataset& ds, double tau,
                                             double alpha) {
    SkillEstimateTable t;
    for (Skill sk : kAcquisitionSkills)
      for (int s = 1; s <= kLevels; ++s)
        for (int m = 1; m <= kLevels; ++m)
          for (int v = 1; v <= kLevels; ++v)
            t.g_[skill_index(sk)][index(s, m, v)] =
                calibration_success_estimate(ds, sk, s, m, v, tau, alpha);
    return t;
  }

  // Every estimate fixed at `p`; used when no calibration is available.
  static SkillEstimateTable constant(double p) {
    SkillEstimateTable t;
    for (auto& row : t.g_) row.fill(p);
    return t;
  }

  static constexpr std::size_t index(int s, int m, int v) {
    return static_cast<std::size_t>(((s - 1) * kLevels + (m - 1)) * kLevels + (v - 1));
  }

  double at(Skill sk, int s, int m, int v) const { return g_[skill_index(sk)][index(s, m, v)]; }

 private:
  std::array<std::array<double, kTriples>, 4> g_{};
};

struct SkillScore {
  Skill skill = Skill::skewer;
  double probability = 0.0;
  bool feasible = false;
};

// What the planner sees of the target besides the property belief.
struct PlannerTarget {
  std::string label;
  Shape shape = Shape::amorphous;
  Size size = Size::bite_sized;
  bool dippable = false;
  ItemFlags flags;
};

// Shape/size/medium rules that hold regardless of the estimate.
inline bool geometrically_feasible(Skill s, const PlannerTarget& t) {
  switch (s) {
    case Skill::twirl: return t.shape == Shape::noodle;
    case Skill::skewer:
    case Skill::scoop: return t.size != Size::large;
    case Skill::dip: return t.dippable;
    default: return true;
  }
}

// Expected success of each acquisition skill under the belief: the sum over
// all level triples of belief mass times the table estimate.
inline std::vector<SkillScore> score_skills(const SkillEstimateTable& table,
                                            const BeliefEntry& belief, const PlannerTarget& target,
                                            const PlannerParams& params = {}) {
  const Dist& ds = belief.dist(Property::softness);
  const Dist& dm = belief.dist(Property::moisture);
  const Dist& dv = belief.dist(Property::viscosity);
  std::vector<SkillScore> out;
  for (Skill sk : kAcquisitionSkills) {
    double e = 0.0;
    for (int s = 1; s <= kLevels; ++s)
      for (int m = 1; m <= kLevels; ++m) {
        const double w = ds[static_cast<std::size_t>(s - 1)] * dm[static_cast<std::size_t>(m - 1)];
        if (w == 0.0) continue;
        for (int v = 1; v <= kLevels; ++v)
          e += w * dv[static_cast<std::size_t>(v - 1)] * table.at(sk, s, m, v);
      }
    e = std::clamp(e, 0.0, 1.0);
    out.push_back({sk, e, e >= params.theta_feas && geometrically_feasible(sk, target)});
  }
  return out;
}

inline std::vector<SkillScore> score_skills(const CalibrationDataset& ds,
                                            const BeliefEntry& belief, const PlannerTarget& target,
                                            const PlannerParams& params = {}) {
  return score_skills(SkillEstimateTable::from_calibration(ds, params.tau, params.alpha), belief,
                      target, params);
}

// Highest-probability feasible acquisition skill; ties go to the earlier
// skill in (skewer, scoop, twirl, dip). With nothing feasible: cut a large
// item once, else push an unbraced item once, else force the best
// geometrically possible acquisition skill.
inline Skill select_skill(const std::vector<SkillScore>& scores, const PlannerTarget& target,
                          const std::vector<AttemptRecord>& item_history) {
  if (scores.empty()) throw std::invalid_argument("select_skill: no scores");
  auto best_of = [&](auto pred) -> const SkillScore* {
    const SkillScore* best = nullptr;
    for (Skill sk : kAcquisitionSkills) {
      auto it = std::find_if(scores.begin(), scores.end(),
                             [&](const SkillScore& s) { return s.skill == sk; });
      if (it == scores.end() || !pred(*it)) continue;
      if (!best || it->probability > best->probability) best = &*it;
    }
    return best;
  };
  if (const SkillScore* s = best_of([](const SkillScore& s) { return s.feasible; })) return s->skill;

  auto tried = [&](Skill sk) {
    return std::any_of(item_history.begin(), item_history.end(),
                       [&](const AttemptRecord& r) { return r.skill == sk; });
  };
  if (target.size == Size::large && !target.flags.has(ItemFlag::cut_applied) && !tried(Skill::cut))
    return Skill::cut;
  if (!target.flags.has(ItemFlag::braced) && !tried(Skill::push)) return Skill::push;
  if (const SkillScore* s =
          best_of([&](const SkillScore& s) { return geometrically_feasible(s.skill, target); }))
    return s->skill;
  return best_of([](const SkillScore&) { return true; })->skill;
}

// ---------------------------------------------------------------------------
// Prompt assembly for a remote backend

struct PlannerContext {
  std::string calibration_summary;
  std::string tool;
  std::string skill_descriptions;
  std::string history;
  std::string label;
  PropertyVector estimate;
};

namespace detail {

inline std::string tool_words(const std::string& tool) {
  std::string out = tool;
  std::replace(out.begin(), out.end(), '_', ' ');
  return out;
}

}  // namespace detail

// Attempt history grouped by item in order of first appearance. Each item
// block lists the current point estimate then one "skill: outcome" line per
// attempt.
inline std::string render_history(const std::vector<AttemptRecord>& history, const Belief& belief) {
  std::vector<int> order;
  for (const auto& r : history)
    if (std::find(order.begin(), order.end(), r.item_id) == order.end()) order.push_back(r.item_id);
  std::string out;
  for (int id : order) {
    const auto first = std::find_if(history.begin(), history.end(),
                                    [&](const AttemptRecord& r) { return r.item_id == id; });
    if (!out.empty()) out += "\n";
    out += detail::capitalize(first->label) + ":\n";
    if (belief.contains(id)) {
      const PropertyVector p = belief.at(id).point_estimate();
      out += "shape: " + std::string(to_string(p.shape)) + "\n";
      out += "size: " + std::string(to_string(p.size)) + "\n";
      out += "softness: " + std::to_string(p.softness.value()) + "\n";
      out += "moisture: " + std::to_string(p.moisture.value()) + "\n";
      out += "viscosity: " + std::to_string(p.viscosity.value()) + "\n";
    }
    for (const auto& r : history)
      if (r.item_id == id)
        out += std::string(to_string(r.skill)) + ": " + (r.success ? "success" : "failure") + "\n";
  }
  return out;
}

// Fills the skill-selection template. Placeholders: {{calibration_summary}},
// {{tool}}, {{skill_descriptions}}, {{history}}, {{label}}, {{shape}},
// {{size}}, {{softness}}, {{moisture}}, {{viscosity}}.
inline std::string build_planner_prompt(const std::string& tmpl, const PlannerContext& ctx) {
  std::string s = tmpl;
  const std::pair<const char*, std::string> subs[] = {
      {"{{calibration_summary}}", ctx.calibration_summary},
      {"{{tool}}", detail::tool_words(ctx.tool)},
      {"{{skill_descriptions}}", ctx.skill_descriptions},
      {"{{history}}", ctx.history},
      {"{{label}}", ctx.label},
      {"{{shape}}", detail::capitalize(std::string(to_string(ctx.estimate.shape)))},
      {"{{size}}", std::string(to_string(ctx.estimate.size))},
      {"{{softness}}", std::to_string(ctx.estimate.softness.value())},
      {"{{moisture}}", std::to_string(ctx.estimate.moisture.value())},
      {"{{viscosity}}", std::to_string(ctx.estimate.viscosity.value())},
  };
  for (const auto& [from, to] : subs) s = detail::replace_all(s, from, to);
  return s;
}

// Skill named by the last "Answer:" in a backend reply.
inline std::optional<Skill> parse_answer_skill(const std::string& text) {
  const auto pos = text.rfind("Answer:");
  if (pos == std::string::npos) return std::nullopt;
  std::string word;
  for (std::size_t i = pos + 7; i < text.size(); ++i) {
    const char c = text[i];
    if (std::isalpha(static_cast<unsigned char>(c))) {
      word += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    } else if (!word.empty()) {
      break;
    }
  }
  return parse_skill(word);
}

}  // namespace bitesim
