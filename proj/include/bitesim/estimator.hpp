#pragma once
//
// Property belief: prior initialization from a label table, confidence-gated
// recursive refinement from observation likelihoods, and prior transfer to
// later items of the same label or category.
//

#include <algorithm>
#include <array>
#include <bitset>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include "bitesim/attempt.hpp"
#include "bitesim/core.hpp"
#include "bitesim/interaction.hpp"
#include "bitesim/json_util.hpp"
#include "bitesim/likelihood.hpp"
#include "bitesim/registry.hpp"

namespace bitesim {

using Dist = std::array<double, kLevels>;

inline Dist uniform_dist() {
  Dist d;
  d.fill(1.0 / kLevels);
  return d;
}

inline Dist normalized(Dist d) {
  double total = 0.0;
  for (double x : d) total += x;
  if (!(total > 0.0) || !std::isfinite(total))
    throw std::invalid_argument("cannot normalize a zero or non-finite distribution");
  for (auto& x : d) x /= total;
  return d;
}

inline double entropy(const Dist& d) {
  double h = 0.0;
  for (double x : d)
    if (x > 0.0) h -= x * std::log(x);
  return h;
}

inline std::size_t argmax(const Dist& d) {
  return static_cast<std::size_t>(std::max_element(d.begin(), d.end()) - d.begin());
}

inline double logsumexp(const Dist& v) {
  const double m = *std::max_element(v.begin(), v.end());
  if (m == -std::numeric_limits<double>::infinity()) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

// Per-property log-probabilities over the five levels.
struct PropertyLogits {
  std::array<Dist, 3> rows{};

  const Dist& row(Property p) const { return rows[static_cast<std::size_t>(p)]; }
  double row_max(Property p) const {
    const Dist& r = row(p);
    return *std::max_element(r.begin(), r.end());
  }
};

enum class Provenance : std::uint8_t { prior, refined, transferred };

inline constexpr std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::prior: return "prior";
    case Provenance::refined: return "refined";
    case Provenance::transferred: return "transferred";
  }
  return "?";
}

struct BeliefEntry {
  std::string label;
  Shape shape = Shape::amorphous;
  Size size = Size::bite_sized;
  std::array<Dist, 3> dists{uniform_dist(), uniform_dist(), uniform_dist()};
  Provenance provenance = Provenance::prior;

  Dist& dist(Property p) { return dists[static_cast<std::size_t>(p)]; }
  const Dist& dist(Property p) const { return dists[static_cast<std::size_t>(p)]; }

  double entropy() const {
    double h = 0.0;
    for (const auto& d : dists) h += bitesim::entropy(d);
    return h;
  }

  // Most probable level per property.
  PropertyVector point_estimate() const {
    auto lvl = [&](Property p) { return PropertyLevel(static_cast<int>(argmax(dist(p))) + 1); };
    return PropertyVector{shape, size, lvl(Property::softness), lvl(Property::moisture),
                          lvl(Property::viscosity)};
  }
};

struct Belief {
  std::map<int, BeliefEntry> entries;

  bool contains(int item_id) const { return entries.count(item_id) != 0; }
  const BeliefEntry& at(int item_id) const {
    auto it = entries.find(item_id);
    if (it == entries.end())
      throw StateError("no belief entry for item " + std::to_string(item_id));
    return it->second;
  }
};

// ---------------------------------------------------------------------------
// Prior table

struct PriorRow {
  std::array<Dist, 3> dists{uniform_dist(), uniform_dist(), uniform_dist()};
  std::optional<Shape> shape;
  std::optional<Size> size;
};

class PriorTable {
 public:
  // Weights at offsets -2..+2 around a mode given as a single level.
  static constexpr std::array<double, 5> kModeSpread{0.05, 0.15, 0.6, 0.15, 0.05};

  static Dist expand_mode(int level) {
    Dist d{};
    for (int off = -2; off <= 2; ++off) {
      const int l = level + off;
      if (l >= 1 && l <= kLevels) d[static_cast<std::size_t>(l - 1)] = kModeSpread[off + 2];
    }
    return normalized(d);
  }

  void set(const std::string& label, PriorRow row) { rows_[label] = std::move(row); }
  const PriorRow* find(const std::string& label) const {
    auto it = rows_.find(label);
    return it == rows_.end() ? nullptr : &it->second;
  }
  std::size_t size() const { return rows_.size(); }

  static PriorTable from_json(const Json& doc, const std::string& origin = "priors") {
    check_schema_version(doc, origin);
    PriorTable t;
    const Json& labels = require(doc, "labels", origin);
    for (const auto& [label, r] : labels.items()) {
      const std::string w = origin + ".labels." + label;
      PriorRow row;
      for (Property p : kScalarProperties) {
        const Json& v = require(r, std::string(to_string(p)), w);
        const std::string wp = w + "." + std::string(to_string(p));
        if (v.is_number_integer()) {
          const int l = v.get<int>();
          if (l < 1 || l > kLevels) throw ConfigError(wp + ": level outside [1, 5]");
          row.dists[static_cast<std::size_t>(p)] = expand_mode(l);
        } else {
          row.dists[static_cast<std::size_t>(p)] = parse_level_weights(v, wp);
        }
      }
      if (r.contains("shape")) row.shape = parse_shape_field(r["shape"], w + ".shape");
      if (r.contains("size")) row.size = parse_size_field(r["size"], w + ".size");
      t.rows_[label] = std::move(row);
    }
    return t;
  }

  static PriorTable load(const std::string& path) { return from_json(load_json_file(path), path); }

 private:
  std::map<std::string, PriorRow> rows_;
};

inline BeliefEntry init_prior(const std::string& label, const PriorTable& table) {
  BeliefEntry e;
  e.label = label;
  if (const PriorRow* row = table.find(label)) {
    for (std::size_t i = 0; i < 3; ++i) e.dists[i] = normalized(row->dists[i]);
    if (row->shape) e.shape = *row->shape;
    if (row->size) e.size = *row->size;
  }
  e.provenance = Provenance::prior;
  return e;
}

// ---------------------------------------------------------------------------
// Refinement

using ChannelMask = std::bitset<kChannelCount>;

inline ChannelMask all_channels() { return ChannelMask{}.set(); }

inline ChannelMask modality_mask(std::initializer_list<Modality> modalities) {
  ChannelMask m;
  for (Channel c : kChannels)
    for (Modality mod : modalities)
      if (modality(c) == mod) m.set(channel_index(c));
  return m;
}

struct UpdateResult {
  Belief belief;
  PropertyLogits logits;
  std::array<bool, 3> updated{};
};

// Per property: posterior(level) proportional to prior(level) times the product
// of channel likelihoods, computed in log space. The property keeps its
// previous distribution unless the posterior's largest log-probability
// exceeds theta_th.
inline UpdateResult update_belief(const Belief& belief, int item_id, const ObservationSeries& obs,
                                  const LikelihoodModel& lik, double theta_th,
                                  const ChannelMask& mask = all_channels()) {
  if (!lik.fitted()) throw ModelError("update_belief: likelihood model is not fitted");
  UpdateResult out{belief, {}, {}};
  auto it = out.belief.entries.find(item_id);
  if (it == out.belief.entries.end())
    throw StateError("update_belief: no belief entry for item " + std::to_string(item_id));
  BeliefEntry& entry = it->second;

  for (Property p : kScalarProperties) {
    const Dist& prior = entry.dist(p);
    Dist logpost;
    for (std::size_t l = 0; l < kLevels; ++l) {
      double lp = prior[l] > 0.0 ? std::log(prior[l]) : -std::numeric_limits<double>::infinity();
      for (Channel c : kChannels)
        if (mask.test(channel_index(c))) lp += lik.log_density(c, p, l, obs[c]);
      logpost[l] = lp;
    }
    const double z = logsumexp(logpost);
    for (auto& x : logpost) x -= z;
    out.logits.rows[static_cast<std::size_t>(p)] = logpost;

    if (out.logits.row_max(p) > theta_th) {
      Dist post;
      for (std::size_t l = 0; l < kLevels; ++l) post[l] = std::exp(logpost[l]);
      entry.dist(p) = normalized(post);
      out.updated[static_cast<std::size_t>(p)] = true;
    }
  }
  if (std::any_of(out.updated.begin(), out.updated.end(), [](bool b) { return b; }))
    entry.provenance = Provenance::refined;
  return out;
}

// ---------------------------------------------------------------------------
// Transfer

// New entry for `new_item_id`: the table prior, blended with the current
// distribution of the most recently attempted refined item that shares the
// label (or, failing that, the registry category).
inline Belief transfer_prior(const Belief& belief, int new_item_id, const std::string& new_label,
                             const std::vector<AttemptRecord>& history, const PriorTable& table,
                             double blend_w, const FoodRegistry* registry = nullptr) {
  if (belief.contains(new_item_id))
    throw StateError("transfer_prior: item " + std::to_string(new_item_id) + " already present");
  if (!(blend_w >= 0.0 && blend_w <= 1.0))
    throw std::invalid_argument("transfer_prior: blend_w outside [0, 1]");

  BeliefEntry fresh = init_prior(new_label, table);
  auto category = [&](const std::string& label) -> std::optional<std::string> {
    if (!registry || !registry->contains(label)) return std::nullopt;
    return registry->at(label).category;
  };

  const BeliefEntry* source = nullptr;
  const auto new_cat = category(new_label);
  for (int pass = 0; pass < 2 && !source; ++pass) {
    for (auto h = history.rbegin(); h != history.rend(); ++h) {
      auto it = belief.entries.find(h->item_id);
      if (it == belief.entries.end() || it->second.provenance != Provenance::refined) continue;
      const bool match = pass == 0 ? h->label == new_label
                                   : (new_cat && category(h->label) == new_cat);
      if (match) {
        source = &it->second;
        break;
      }
    }
  }

  Belief out = belief;
  if (source && blend_w > 0.0) {
    for (std::size_t i = 0; i < 3; ++i) {
      Dist d;
      for (std::size_t l = 0; l < kLevels; ++l)
        d[l] = blend_w * source->dists[i][l] + (1.0 - blend_w) * fresh.dists[i][l];
      fresh.dists[i] = normalized(d);
    }
    fresh.provenance = Provenance::transferred;
  }
  out.entries.emplace(new_item_id, std::move(fresh));
  return out;
}

// ---------------------------------------------------------------------------
// Remote property-estimation prompt

namespace detail {

inline std::string replace_all(std::string s, const std::string& from, const std::string& to) {
  for (std::size_t pos = 0; (pos = s.find(from, pos)) != std::string::npos; pos += to.size())
    s.replace(pos, from.size(), to);
  return s;
}

}  // namespace detail

// Fills {{label}} and {{image}} in the property-estimation template.
inline std::string build_property_prompt(const std::string& tmpl, const std::string& label,
                                         const std::string& image_ref) {
  return detail::replace_all(detail::replace_all(tmpl, "{{label}}", label), "{{image}}",
                             image_ref);
}

// Parses "Answer: Shape: s ; Size: z; Softness: n; Moisture: n; Viscosity: n".
// Scores are clamped into the 1..5 scale.
inline std::optional<PriorRow> parse_property_answer(const std::string& text) {
  const auto pos = text.rfind("Answer:");
  if (pos == std::string::npos) return std::nullopt;
  const std::string tail = text.substr(pos);
  static const std::regex re(
      R"(Shape:\s*([A-Za-z\- ]+?)\s*;\s*Size:\s*([A-Za-z\- ]+?)\s*;\s*Softness:\s*([0-9.]+)\s*;\s*Moisture:\s*([0-9.]+)\s*;\s*Viscosity:\s*([0-9.]+))",
      std::regex::icase);
  std::smatch m;
  if (!std::regex_search(tail, m, re)) return std::nullopt;
  PriorRow row;
  auto lower = [](std::string s) {
    for (auto& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    return s;
  };
  row.shape = parse_shape(lower(m[1].str()));
  row.size = parse_size(lower(m[2].str()));
  for (std::size_t i = 0; i < 3; ++i) {
    const int l = PropertyLevel::clamped(std::stod(m[3 + i].str())).value();
    row.dists[i] = PriorTable::expand_mode(l);
  }
  return row;
}

}  // namespace bitesim
