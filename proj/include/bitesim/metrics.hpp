#pragma once
//
// Success-rate metrics over episode logs and the paired plate bootstrap.
//

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "bitesim/episode.hpp"
#include "bitesim/rng.hpp"

namespace bitesim {

// Orders "plate_2" before "plate_10".
inline bool natural_less(const std::string& a, const std::string& b) {
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    const bool da = std::isdigit(static_cast<unsigned char>(a[i]));
    const bool db = std::isdigit(static_cast<unsigned char>(b[j]));
    if (da && db) {
      std::size_t ie = i, je = j;
      while (ie < a.size() && std::isdigit(static_cast<unsigned char>(a[ie]))) ++ie;
      while (je < b.size() && std::isdigit(static_cast<unsigned char>(b[je]))) ++je;
      std::string na = a.substr(i, ie - i), nb = b.substr(j, je - j);
      na.erase(0, std::min(na.find_first_not_of('0'), na.size()));
      nb.erase(0, std::min(nb.find_first_not_of('0'), nb.size()));
      if (na.size() != nb.size()) return na.size() < nb.size();
      if (na != nb) return na < nb;
      i = ie;
      j = je;
    } else {
      if (a[i] != b[j]) return a[i] < b[j];
      ++i;
      ++j;
    }
  }
  return (a.size() - i) < (b.size() - j);
}

struct NaturalLess {
  bool operator()(const std::string& a, const std::string& b) const { return natural_less(a, b); }
};

struct PlateMetrics {
  std::string plate_id;
  int acquired = 0;
  int attempts = 0;
  int items = 0;
  std::vector<int> acquired_within;  // [k-1]: items acquired by attempt k

  double sr() const { return attempts > 0 ? static_cast<double>(acquired) / attempts : 0.0; }
  double sr_k(int k) const {
    return items > 0 ? static_cast<double>(acquired_within[static_cast<std::size_t>(k - 1)]) / items
                     : 0.0;
  }
};

struct MetricsReport {
  std::vector<PlateMetrics> plates;  // natural order of plate_id
  double mean_sr = 0.0;              // mean of per-plate SR
  double std_sr = 0.0;               // population std of per-plate SR
  double pooled_sr = 0.0;            // all acquired / all attempts
  int max_k = 3;
  std::vector<double> sr_k_pooled;   // [k-1], items acquired within k / items
  std::vector<double> sr_k_mean;     // [k-1], mean over plates
  std::vector<double> sr_k_std;
  int excluded = 0;                  // logs with zero attempts
  int total_acquired = 0;
  int total_attempts = 0;
  int total_items = 0;

  const PlateMetrics* plate(const std::string& id) const {
    for (const auto& p : plates)
      if (p.plate_id == id) return &p;
    return nullptr;
  }
};

namespace detail {

inline std::pair<double, double> mean_pop_std(const std::vector<double>& xs) {
  if (xs.empty()) return {0.0, 0.0};
  double m = 0.0;
  for (double x : xs) m += x;
  m /= static_cast<double>(xs.size());
  double v = 0.0;
  for (double x : xs) v += (x - m) * (x - m);
  return {m, std::sqrt(v / static_cast<double>(xs.size()))};
}

}  // namespace detail

// Per-plate figures pool every log of that plate (all seeds). Logs without
// any attempt are skipped and counted in `excluded`.
inline MetricsReport compute_metrics(const std::vector<EpisodeLog>& logs, int max_k = 3) {
  if (logs.empty()) throw std::invalid_argument("compute_metrics: no logs");
  if (max_k < 1) throw std::invalid_argument("compute_metrics: max_k must be >= 1");
  MetricsReport r;
  r.max_k = max_k;
  std::map<std::string, PlateMetrics, NaturalLess> by_plate;
  for (const auto& log : logs) {
    if (log.attempts.empty()) {
      ++r.excluded;
      continue;
    }
    PlateMetrics& pm = by_plate[log.plate_id];
    pm.plate_id = log.plate_id;
    pm.acquired_within.resize(static_cast<std::size_t>(max_k), 0);
    pm.attempts += static_cast<int>(log.attempts.size());
    std::map<int, int> first_success;  // item -> attempt index
    for (const auto& a : log.attempts)
      if (a.acquired() && !first_success.count(a.item_id)) first_success[a.item_id] = a.attempt_index;
    pm.items += static_cast<int>(log.items.size());
    pm.acquired += static_cast<int>(first_success.size());
    for (const auto& [item, k] : first_success)
      for (int j = k; j <= max_k; ++j) ++pm.acquired_within[static_cast<std::size_t>(j - 1)];
  }

  std::vector<double> srs;
  std::vector<std::vector<double>> srk(static_cast<std::size_t>(max_k));
  std::vector<int> within(static_cast<std::size_t>(max_k), 0);
  for (auto& [id, pm] : by_plate) {
    srs.push_back(pm.sr());
    for (int k = 1; k <= max_k; ++k) {
      srk[static_cast<std::size_t>(k - 1)].push_back(pm.sr_k(k));
      within[static_cast<std::size_t>(k - 1)] += pm.acquired_within[static_cast<std::size_t>(k - 1)];
    }
    r.total_acquired += pm.acquired;
    r.total_attempts += pm.attempts;
    r.total_items += pm.items;
    r.plates.push_back(pm);
  }
  std::tie(r.mean_sr, r.std_sr) = detail::mean_pop_std(srs);
  r.pooled_sr = r.total_attempts > 0 ? static_cast<double>(r.total_acquired) / r.total_attempts : 0.0;
  for (int k = 1; k <= max_k; ++k) {
    const auto i = static_cast<std::size_t>(k - 1);
    r.sr_k_pooled.push_back(r.total_items > 0 ? static_cast<double>(within[i]) / r.total_items : 0.0);
    const auto [m, s] = detail::mean_pop_std(srk[i]);
    r.sr_k_mean.push_back(m);
    r.sr_k_std.push_back(s);
  }
  return r;
}

// Two-sided paired bootstrap over plates for the per-plate SR difference
// a - b. Resampled mean differences are centred on the observed mean to
// draw from the null.
inline double bootstrap_compare(const MetricsReport& a, const MetricsReport& b, int resamples,
                                std::uint64_t seed = 0x5eedULL) {
  if (resamples < 1000) throw std::invalid_argument("bootstrap_compare: resamples must be >= 1000");
  if (a.plates.size() != b.plates.size())
    throw std::invalid_argument("bootstrap_compare: reports cover different plate sets");
  std::vector<double> d;
  for (const auto& pa : a.plates) {
    const PlateMetrics* pb = b.plate(pa.plate_id);
    if (!pb) throw std::invalid_argument("bootstrap_compare: plate '" + pa.plate_id + "' missing");
    d.push_back(pa.sr() - pb->sr());
  }
  if (d.empty()) throw std::invalid_argument("bootstrap_compare: no plates");
  double obs = 0.0;
  for (double x : d) obs += x;
  obs /= static_cast<double>(d.size());

  Rng rng = make_rng(seed);
  int extreme = 0;
  const double eps = 1e-12;
  for (int b_i = 0; b_i < resamples; ++b_i) {
    double m = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) m += d[uniform_index(rng, d.size())];
    m /= static_cast<double>(d.size());
    if (std::abs(m - obs) >= std::abs(obs) - eps) ++extreme;
  }
  return static_cast<double>(extreme + 1) / static_cast<double>(resamples + 1);
}

}  // namespace bitesim
