#pragma once
//
// Domain types for plates, foods, tools and skills, plus the ground-truth
// food state and its temporal drift.
//

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bitesim/error.hpp"

namespace bitesim {

inline constexpr int kLevels = 5;

// Scalar properties carried on the 1..5 scale.
enum class Property : std::uint8_t { softness = 0, moisture = 1, viscosity = 2 };
inline constexpr std::array<Property, 3> kScalarProperties{
    Property::softness, Property::moisture, Property::viscosity};

inline constexpr std::string_view to_string(Property p) {
  switch (p) {
    case Property::softness: return "softness";
    case Property::moisture: return "moisture";
    case Property::viscosity: return "viscosity";
  }
  return "?";
}

// A score on the five-point scale, 1 = very hard / dry / runny, 5 = very
// soft / wet / sticky.
class PropertyLevel {
 public:
  explicit PropertyLevel(int value) : value_(value) {
    if (value < 1 || value > kLevels)
      throw std::out_of_range("property level out of range [1, 5]: " +
                              std::to_string(value));
  }

  // Round-half-away-from-zero, then clamp into [1, 5].
  static PropertyLevel clamped(double x) {
    const double r = std::round(x);
    return PropertyLevel(static_cast<int>(std::clamp(r, 1.0, double(kLevels))));
  }

  int value() const { return value_; }
  std::size_t index() const { return static_cast<std::size_t>(value_ - 1); }

  friend bool operator==(PropertyLevel, PropertyLevel) = default;
  friend auto operator<=>(PropertyLevel, PropertyLevel) = default;

 private:
  int value_;
};

enum class Shape : std::uint8_t {
  round, oval, cylindrical, cubic, block, amorphous, irregular, noodle
};
inline constexpr std::array<Shape, 8> kShapes{
    Shape::round, Shape::oval,      Shape::cylindrical, Shape::cubic,
    Shape::block, Shape::amorphous, Shape::irregular,   Shape::noodle};

inline constexpr std::string_view to_string(Shape s) {
  switch (s) {
    case Shape::round: return "round";
    case Shape::oval: return "oval";
    case Shape::cylindrical: return "cylindrical";
    case Shape::cubic: return "cubic";
    case Shape::block: return "block";
    case Shape::amorphous: return "amorphous";
    case Shape::irregular: return "irregular";
    case Shape::noodle: return "noodle";
  }
  return "?";
}

inline std::optional<Shape> parse_shape(std::string_view s) {
  for (Shape shape : kShapes)
    if (to_string(shape) == s) return shape;
  return std::nullopt;
}

enum class Size : std::uint8_t { bite_sized, large };

inline constexpr std::string_view to_string(Size s) {
  return s == Size::bite_sized ? "bite-sized" : "large";
}

inline std::optional<Size> parse_size(std::string_view s) {
  if (s == "bite-sized") return Size::bite_sized;
  if (s == "large") return Size::large;
  return std::nullopt;
}

struct PropertyVector {
  Shape shape = Shape::round;
  Size size = Size::bite_sized;
  PropertyLevel softness{3};
  PropertyLevel moisture{3};
  PropertyLevel viscosity{3};

  PropertyLevel level(Property p) const {
    switch (p) {
      case Property::softness: return softness;
      case Property::moisture: return moisture;
      case Property::viscosity: return viscosity;
    }
    return softness;
  }

  friend bool operator==(const PropertyVector&, const PropertyVector&) = default;
};

// ---------------------------------------------------------------------------
// Skills

enum class Skill : std::uint8_t { skewer, scoop, twirl, dip, push, cut };
enum class SkillKind : std::uint8_t { acquisition, pre_acquisition };

inline constexpr std::array<Skill, 6> kAllSkills{
    Skill::skewer, Skill::scoop, Skill::twirl,
    Skill::dip,    Skill::push,  Skill::cut};

// Also the tie-break order used by the planner.
inline constexpr std::array<Skill, 4> kAcquisitionSkills{
    Skill::skewer, Skill::scoop, Skill::twirl, Skill::dip};

inline constexpr SkillKind kind(Skill s) {
  return (s == Skill::push || s == Skill::cut) ? SkillKind::pre_acquisition
                                               : SkillKind::acquisition;
}

inline constexpr bool is_acquisition(Skill s) {
  return kind(s) == SkillKind::acquisition;
}

inline constexpr std::string_view to_string(Skill s) {
  switch (s) {
    case Skill::skewer: return "skewer";
    case Skill::scoop: return "scoop";
    case Skill::twirl: return "twirl";
    case Skill::dip: return "dip";
    case Skill::push: return "push";
    case Skill::cut: return "cut";
  }
  return "?";
}

inline std::optional<Skill> parse_skill(std::string_view s) {
  for (Skill k : kAllSkills)
    if (to_string(k) == s) return k;
  return std::nullopt;
}

inline constexpr std::size_t skill_index(Skill s) {
  return static_cast<std::size_t>(s);
}

// ---------------------------------------------------------------------------
// Tools

struct Tool {
  std::string name;
  double hardness_offset = 0.0;  // added to skewer and cut logits
  double scoop_capacity = 0.0;   // added to scoop logits
};

// ---------------------------------------------------------------------------
// Food items and plates

struct DriftParams {
  double softness_rate = 0.0;  // levels per attempt-step, signed
  int onset = 0;               // clock value at which drift starts
  friend bool operator==(const DriftParams&, const DriftParams&) = default;
};

enum class ItemFlag : std::uint8_t {
  cut_applied = 1u << 0,
  braced = 1u << 1,
  acquired = 1u << 2,
  removed = 1u << 3,
};

class ItemFlags {
 public:
  constexpr bool has(ItemFlag f) const {
    return (bits_ & static_cast<std::uint8_t>(f)) != 0;
  }

  // acquired and removed are terminal and exclusive.
  ItemFlags with(ItemFlag f) const {
    if ((f == ItemFlag::acquired && has(ItemFlag::removed)) ||
        (f == ItemFlag::removed && has(ItemFlag::acquired)))
      throw StateError("acquired and removed are mutually exclusive");
    ItemFlags out = *this;
    out.bits_ |= static_cast<std::uint8_t>(f);
    return out;
  }

  constexpr bool terminal() const {
    return has(ItemFlag::acquired) || has(ItemFlag::removed);
  }

  constexpr std::uint8_t bits() const { return bits_; }
  friend bool operator==(ItemFlags, ItemFlags) = default;

 private:
  std::uint8_t bits_ = 0;
};

struct Position {
  double x_cm = 0.0;
  double y_cm = 0.0;
  friend bool operator==(const Position&, const Position&) = default;
};

// Radius of the disc an item occupies on the plate.
inline double footprint_radius_cm(Size s) { return s == Size::large ? 3.5 : 1.5; }

struct FoodItemState {
  int item_id = 0;
  std::string label;
  Position position;
  PropertyVector true_props;
  DriftParams drift;
  ItemFlags flags;
  bool dippable = false;  // registry tag: a dip medium is served with it

  friend bool operator==(const FoodItemState&, const FoodItemState&) = default;
};

// Drift-adjusted softness at `clock`, before flag effects.
inline PropertyLevel drifted_softness(const FoodItemState& item, int clock) {
  const int steps = std::max(0, clock - item.drift.onset);
  return PropertyLevel::clamped(item.true_props.softness.value() +
                                item.drift.softness_rate * steps);
}

// Ground-truth properties of `item` at `clock`. Pure.
inline PropertyVector effective_properties(const FoodItemState& item, int clock) {
  if (item.flags.has(ItemFlag::removed))
    throw StateError("effective_properties on removed item " +
                     std::to_string(item.item_id));
  PropertyVector p = item.true_props;
  p.softness = drifted_softness(item, clock);
  if (item.flags.has(ItemFlag::cut_applied)) p.size = Size::bite_sized;
  return p;
}

struct PlateState {
  std::string plate_id;
  double radius_cm = 12.0;
  std::vector<FoodItemState> items;
  std::array<double, 6> ee_pose{};
  int clock = 0;

  friend bool operator==(const PlateState&, const PlateState&) = default;
};

// One attempt-step forward; drift is evaluated lazily from the clock.
inline PlateState advance_clock(PlateState plate) {
  ++plate.clock;
  return plate;
}

}  // namespace bitesim
