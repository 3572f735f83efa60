#pragma once

#include <array>
#include <string>

#include "bitesim/core.hpp"

namespace bitesim {

// One executed skill on one item.
struct AttemptRecord {
  std::string plate_id;
  int item_id = 0;
  std::string label;
  int attempt_index = 1;  // 1-based, per item
  Skill skill = Skill::skewer;
  bool success = false;
  std::array<double, 3> psi_max{};   // max log-probability per property row
  std::array<bool, 3> gated{};       // true: update suppressed by the threshold
  double entropy_pre = 0.0;
  double entropy_post = 0.0;

  // An item counts as acquired only through an acquisition skill.
  bool acquired() const { return success && is_acquisition(skill); }

  friend bool operator==(const AttemptRecord&, const AttemptRecord&) = default;
};

}  // namespace bitesim
