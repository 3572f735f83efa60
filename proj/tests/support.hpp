#pragma once
// Shared fixtures and independent oracles for the test binaries. Oracles
// here avoid the library's own helpers where the value under test is
// computed, so a shared bug cannot cancel out.

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "bitesim/calibration.hpp"
#include "bitesim/episode.hpp"
#include "bitesim/estimator.hpp"
#include "bitesim/experiment.hpp"
#include "bitesim/likelihood.hpp"
#include "bitesim/metrics.hpp"
#include "bitesim/planner.hpp"

#ifndef BITESIM_DATA_DIR
#error "BITESIM_DATA_DIR must be defined"
#endif
#ifndef BITESIM_CONFIG_DIR
#error "BITESIM_CONFIG_DIR must be defined"
#endif

namespace bitesim::test {

inline std::string data_path(const std::string& f) { return std::string(BITESIM_DATA_DIR) + "/" + f; }
inline std::string default_config_path() {
  return std::string(BITESIM_CONFIG_DIR) + "/default_experiment.json";
}

inline const FoodRegistry& registry() {
  static const FoodRegistry r = FoodRegistry::load(data_path("food_registry.json"));
  return r;
}
inline const InteractionModel& world() {
  static const InteractionModel w = InteractionModel::load(data_path("world_model.json"));
  return w;
}
inline const ToolRegistry& tools() {
  static const ToolRegistry t = ToolRegistry::load(data_path("tools.json"));
  return t;
}
inline const Tool& plastic_fork() { return tools().at("plastic_fork"); }
inline const PriorTable& priors() {
  static const PriorTable p = PriorTable::load(data_path("prior_table.json"));
  return p;
}
inline const CalibrationDataset& default_calibration() {
  static const CalibrationDataset ds =
      run_calibration(7, world(), plastic_fork(), registry(), default_calibration_foods(), 5);
  return ds;
}

inline PropertyVector props(int s, int m, int v, Size size = Size::bite_sized,
                            Shape shape = Shape::round) {
  return PropertyVector{shape, size, PropertyLevel(s), PropertyLevel(m), PropertyLevel(v)};
}

inline FoodItemState item(const PropertyVector& p, int id = 0, std::string label = "thing") {
  FoodItemState it;
  it.item_id = id;
  it.label = std::move(label);
  it.true_props = p;
  return it;
}

// World with every noise source removed.
inline InteractionModel noiseless_world() {
  InteractionModel w = world();
  w.observation.noise_scale = 0.0;
  return w;
}

inline InteractionModel forced_world(double p) {
  InteractionModel w = world();
  w.outcome = GroundTruthOutcomeModel::forced(p);
  return w;
}

// ---------------------------------------------------------------------------
// Oracles

inline long double gaussian_pdf(long double x, long double mean, long double sd) {
  const long double pi = 3.141592653589793238462643383279L;
  const long double z = (x - mean) / sd;
  return std::exp(-0.5L * z * z) / (sd * std::sqrt(2.0L * pi));
}

// Posterior over the 5 levels of `p` by direct multiplication of densities
// and explicit normalization.
inline std::array<double, 5> enumerate_posterior(const std::array<double, 5>& prior,
                                                 const ObservationSeries& obs,
                                                 const LikelihoodModel& lik, Property p,
                                                 const ChannelMask& mask) {
  std::array<long double, 5> w{};
  long double total = 0;
  for (int l = 0; l < 5; ++l) {
    long double v = prior[static_cast<std::size_t>(l)];
    for (Channel c : kChannels) {
      if (!mask.test(channel_index(c))) continue;
      const GaussianCell& g = lik.cell(c, p, static_cast<std::size_t>(l));
      v *= gaussian_pdf(obs[c], g.mean, g.std);
    }
    w[static_cast<std::size_t>(l)] = v;
    total += v;
  }
  std::array<double, 5> out{};
  for (int l = 0; l < 5; ++l)
    out[static_cast<std::size_t>(l)] = static_cast<double>(w[static_cast<std::size_t>(l)] / total);
  return out;
}

// Kernel-smoothed success estimate written out from its definition.
inline double g_hat_oracle(const CalibrationDataset& ds, Skill sk, int s, int m, int v, double tau,
                           double alpha) {
  double num = 0, den = 0;
  for (const auto& r : ds.records) {
    const auto& t = r.tallies[skill_index(sk)];
    const double d = std::fabs(double(r.props.softness.value() - s)) +
                     std::fabs(double(r.props.moisture.value() - m)) +
                     std::fabs(double(r.props.viscosity.value() - v));
    num += std::exp(-d / tau) * t.successes;
    den += std::exp(-d / tau) * t.trials;
  }
  return (num + alpha) / (den + 2 * alpha);
}

// ---------------------------------------------------------------------------
// Synthetic logs

// One log for a plate with `acquired` successes over `attempts` attempts and
// a budget of 3: acquired items succeed at attempt 1, the rest of the
// attempts become failed items of three attempts each, and any remainder is
// spent as early failures on the first acquired items.
inline EpisodeLog synthetic_plate_log(const std::string& plate_id, int acquired, int attempts,
                                      const std::string& policy = "savor") {
  EpisodeLog log;
  log.policy = policy;
  log.plate_id = plate_id;
  int failures = attempts - acquired;
  const int dead_items = failures / 3;
  int extra = failures - 3 * dead_items;
  int id = 0;
  auto push = [&](int item_id, int k, bool ok) {
    AttemptRecord a;
    a.plate_id = plate_id;
    a.item_id = item_id;
    a.label = "food";
    a.attempt_index = k;
    a.skill = Skill::skewer;
    a.success = ok;
    log.attempts.push_back(a);
  };
  for (int i = 0; i < acquired; ++i, ++id) {
    int k = 1;
    if (extra > 0) {
      push(id, k++, false);
      --extra;
    }
    push(id, k, true);
    log.items.push_back({id, "food", true, k});
  }
  for (int i = 0; i < dead_items; ++i, ++id) {
    for (int k = 1; k <= 3; ++k) push(id, k, false);
    log.items.push_back({id, "food", false, 3});
  }
  return log;
}

struct PlateCount {
  int acquired;
  int attempts;
};

// Reference per-plate counts (acquired, attempts) for the metric arithmetic checks.
inline const std::vector<PlateCount>& reference_counts() {
  static const std::vector<PlateCount> c{{10, 15}, {7, 13}, {7, 11}, {6, 12}, {6, 13},
                                         {10, 18}, {5, 17}, {5, 9},  {7, 10}, {6, 16}};
  return c;
}

inline std::vector<EpisodeLog> reference_logs(const std::string& policy = "savor") {
  std::vector<EpisodeLog> logs;
  const auto& c = reference_counts();
  for (std::size_t i = 0; i < c.size(); ++i)
    logs.push_back(synthetic_plate_log("plate_" + std::to_string(i + 1), c[i].acquired,
                                       c[i].attempts, policy));
  return logs;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("bitesim_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace bitesim::test
