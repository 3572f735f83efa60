#pragma once
//
// Per-level Gaussian observation likelihoods fitted from calibration
// rollouts; the estimator's stand-in for a learned property network.
//

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "bitesim/calibration.hpp"
#include "bitesim/error.hpp"
#include "bitesim/interaction.hpp"

namespace bitesim {

struct GaussianCell {
  double mean = 0.0;
  double std = 1.0;
  bool fitted = false;  // false: filled from neighbouring levels
};

class LikelihoodModel {
 public:
  using LevelCells = std::array<GaussianCell, kLevels>;

  bool fitted() const { return fitted_; }
  void mark_fitted() { fitted_ = true; }

  GaussianCell& cell(Channel c, Property p, std::size_t level_index) {
    return cells_[channel_index(c)][static_cast<std::size_t>(p)][level_index];
  }
  const GaussianCell& cell(Channel c, Property p, std::size_t level_index) const {
    return cells_[channel_index(c)][static_cast<std::size_t>(p)][level_index];
  }
  LevelCells& cells(Channel c, Property p) {
    return cells_[channel_index(c)][static_cast<std::size_t>(p)];
  }
  const LevelCells& cells(Channel c, Property p) const {
    return cells_[channel_index(c)][static_cast<std::size_t>(p)];
  }

  // log N(x | mean, std)
  double log_density(Channel c, Property p, std::size_t level_index, double x) const {
    const GaussianCell& g = cell(c, p, level_index);
    const double z = (x - g.mean) / g.std;
    return -0.5 * z * z - std::log(g.std) - 0.5 * std::log(2.0 * M_PI);
  }

 private:
  std::array<std::array<LevelCells, 3>, kChannelCount> cells_{};
  bool fitted_ = false;
};

struct FitOptions {
  double std_floor = 0.01;
};

namespace detail {

// Fills unfitted levels: linear interpolation between the nearest fitted
// neighbours; beyond the outermost fitted level, linear extrapolation from
// the two outermost fitted levels (constant when only one is fitted).
inline void fill_unfitted(LikelihoodModel::LevelCells& cells, double std_floor) {
  std::vector<std::size_t> fitted;
  for (std::size_t l = 0; l < kLevels; ++l)
    if (cells[l].fitted) fitted.push_back(l);
  for (std::size_t l = 0; l < kLevels; ++l) {
    if (cells[l].fitted) continue;
    auto hi = std::find_if(fitted.begin(), fitted.end(), [&](std::size_t f) { return f > l; });
    std::size_t a, b;
    if (hi == fitted.begin()) {
      a = fitted[0];
      b = fitted.size() > 1 ? fitted[1] : fitted[0];
    } else if (hi == fitted.end()) {
      b = fitted.back();
      a = fitted.size() > 1 ? fitted[fitted.size() - 2] : fitted.back();
    } else {
      a = *(hi - 1);
      b = *hi;
    }
    if (a == b) {
      cells[l].mean = cells[a].mean;
      cells[l].std = cells[a].std;
      continue;
    }
    const double t = (static_cast<double>(l) - static_cast<double>(a)) /
                     (static_cast<double>(b) - static_cast<double>(a));
    cells[l].mean = cells[a].mean + t * (cells[b].mean - cells[a].mean);
    if (t >= 0.0 && t <= 1.0) {
      cells[l].std = cells[a].std + t * (cells[b].std - cells[a].std);
    } else {
      cells[l].std = (t < 0.0) ? cells[a].std : cells[b].std;
    }
    cells[l].std = std::max(cells[l].std, std_floor);
  }
}

}  // namespace detail

// Sample mean / std of each channel among rollouts at each property level,
// pooled across skills. Values are sorted per cell before summation, so the
// result is bitwise independent of rollout order.
inline LikelihoodModel fit_likelihoods(const CalibrationDataset& ds, FitOptions options = {}) {
  if (ds.rollouts.empty()) throw FittingError("fit_likelihoods: no rollouts");
  if (!(options.std_floor > 0.0)) throw std::invalid_argument("std_floor must be > 0");

  LikelihoodModel m;
  for (Channel c : kChannels) {
    for (Property p : kScalarProperties) {
      std::array<std::vector<double>, kLevels> values;
      for (const auto& ro : ds.rollouts)
        values[ro.props.level(p).index()].push_back(ro.observation[c]);
      auto& cells = m.cells(c, p);
      bool any = false;
      for (std::size_t l = 0; l < kLevels; ++l) {
        auto& v = values[l];
        if (v.empty()) continue;
        std::sort(v.begin(), v.end());
        double sum = 0.0;
        for (double x : v) sum += x;
        const double mean = sum / static_cast<double>(v.size());
        double ss = 0.0;
        for (double x : v) ss += (x - mean) * (x - mean);
        const double sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
        cells[l] = GaussianCell{mean, std::max(sd, options.std_floor), true};
        any = true;
      }
      if (!any)
        throw FittingError("fit_likelihoods: property '" + std::string(to_string(p)) +
                           "' has no observed level");
      detail::fill_unfitted(cells, options.std_floor);
    }
  }
  m.mark_fitted();
  return m;
}

}  // namespace bitesim
