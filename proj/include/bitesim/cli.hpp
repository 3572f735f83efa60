#pragma once
//
// Subcommand bodies of the bitesim command-line tool. Each returns the
// process exit status and writes diagnostics to `err`; argument parsing
// lives in tools/main.cpp.
//

#include <cmath>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "bitesim/calibration.hpp"
#include "bitesim/experiment.hpp"
#include "bitesim/http_backend.hpp"
#include "bitesim/metrics.hpp"

namespace bitesim::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitRuntime = 3;

// Maps exceptions to exit codes: bad input is a usage error, anything else
// is a runtime failure.
template <typename F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const RegistryError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const LayoutError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

struct CalibrateArgs {
  std::string data_dir;
  std::string tool = "plastic_fork";
  std::uint64_t seed = 7;
  int trials = kDefaultCalibrationTrials;
  std::string out;  // dataset path; the summary goes next to it as .txt
};

inline int cmd_calibrate(const CalibrateArgs& a, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const fs::path data(a.data_dir);
    const ToolRegistry tools = ToolRegistry::load((data / "tools.json").string());
    if (!tools.contains(a.tool)) throw ConfigError("unknown tool '" + a.tool + "'");
    if (a.trials < 1) throw ConfigError("--trials must be >= 1");
    const FoodRegistry registry = FoodRegistry::load((data / "food_registry.json").string());
    const InteractionModel world = InteractionModel::load((data / "world_model.json").string());
    const CalibrationDataset ds = run_calibration(a.seed, world, tools.at(a.tool), registry,
                                                  default_calibration_foods(), a.trials);
    const fs::path path = a.out.empty() ? fs::path("calibration_" + a.tool + ".json") : fs::path(a.out);
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    write_text_file(path, dataset_to_json(ds).dump(2) + "\n");
    fs::path summary = path;
    summary.replace_extension(".txt");
    write_text_file(summary, render_summary(ds));
    out << "wrote " << path.string() << " and " << summary.string() << "\n";
    return kExitOk;
  });
}

struct RunArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "run_out";
  int jobs = 1;
  std::vector<std::string> policies;  // overrides the config's list when non-empty
  std::optional<std::string> data_dir;
};

inline ExperimentConfig prepare_config(const std::string& path, const std::string& bytes,
                                       const std::optional<std::uint64_t>& seed,
                                       const std::vector<std::string>& policies,
                                       const std::optional<std::string>& data_dir) {
  ExperimentConfig cfg =
      config_from_json(parse_json_text(bytes, path), fs::path(path).parent_path(), path);
  if (seed) cfg.master_seed = *seed;
  if (!policies.empty()) {
    detail::check_policies(policies, "--policy");
    cfg.policies = policies;
  }
  if (data_dir) cfg.data_dir = *data_dir;
  return cfg;
}

inline int cmd_run(const RunArgs& a, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (a.jobs < 1) throw ConfigError("--jobs must be >= 1");
    const std::string bytes = read_text_file(a.config);
    const ExperimentConfig cfg = prepare_config(a.config, bytes, a.seed, a.policies, a.data_dir);
    const Resources res = load_resources(cfg);
    std::optional<HttpBackend> backend;
    if (cfg.backend) backend.emplace(HttpBackendConfig::from_json(*cfg.backend, a.config + ".backend"));
    const ExperimentResult result = run_experiment(cfg, res, a.jobs, backend ? &*backend : nullptr);
    write_run_outputs(a.out, cfg, bytes, result);
    for (const auto& [policy, r] : result.reports)
      out << std::left << std::setw(22) << policy << " SR " << std::fixed << std::setprecision(1)
          << 100.0 * r.mean_sr << " +/- " << 100.0 * r.std_sr << "  SR3 "
          << 100.0 * r.sr_k_pooled.back() << "\n";
    return kExitOk;
  });
}

// ---------------------------------------------------------------------------
// Report

struct ReportArgs {
  std::string in_dir;
  std::string format = "table-text";
  int resamples = 10000;
};

namespace detail {

inline std::string pct(double x) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(1) << 100.0 * x;
  return os.str();
}

}  // namespace detail

struct LoadedRun {
  RunManifest manifest;
  std::vector<std::pair<std::string, MetricsReport>> reports;
};

inline LoadedRun load_run(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw ConfigError("'" + dir.string() + "' is not a directory");
  const fs::path mpath = dir / "manifest.json";
  if (!fs::exists(mpath)) throw ConfigError("missing manifest '" + mpath.string() + "'");
  LoadedRun run;
  run.manifest = RunManifest::from_json(load_json_file(mpath.string()), mpath.string());
  const fs::path ledger = dir / run.manifest.attempts_file;
  if (!fs::exists(ledger)) throw ConfigError("missing ledger '" + ledger.string() + "'");
  std::ifstream in(ledger, std::ios::binary);
  const std::vector<EpisodeLog> logs = read_csv(in, ledger.string());
  for (const auto& p : run.manifest.policies) {
    std::vector<EpisodeLog> mine;
    for (const auto& l : logs)
      if (l.policy == p) mine.push_back(l);
    if (mine.empty()) throw ConfigError(ledger.string() + ": no rows for policy '" + p + "'");
    run.reports.emplace_back(p, compute_metrics(mine, run.manifest.budget));
  }
  return run;
}

inline void render_report_text(std::ostream& os, const LoadedRun& run, int resamples) {
  const auto& first = run.reports.front().second;
  os << std::left << std::setw(26) << "Policy";
  for (const auto& p : first.plates) os << std::setw(10) << p.plate_id;
  os << "\n";
  for (const auto& [policy, r] : run.reports) {
    os << std::setw(26) << policy;
    for (const auto& p : first.plates) {
      const PlateMetrics* m = r.plate(p.plate_id);
      os << std::setw(10) << (m ? std::to_string(m->acquired) + "/" + std::to_string(m->attempts) : "-");
    }
    os << "\n";
  }
  os << "\n";
  auto row = [&](const std::string& name, auto cell) {
    os << std::setw(34) << name;
    for (const auto& [policy, r] : run.reports) os << std::setw(24) << cell(r);
    os << "\n";
  };
  os << std::setw(34) << "";
  for (const auto& [policy, r] : run.reports) os << std::setw(24) << policy;
  os << "\n";
  row("Average Success Rate (%)", [](const MetricsReport& r) {
    return detail::pct(r.mean_sr) + " +/- " + detail::pct(r.std_sr);
  });
  row("Pooled Success Rate (%)", [](const MetricsReport& r) { return detail::pct(r.pooled_sr); });
  for (int k = 1; k <= first.max_k; ++k)
    row("SR" + std::to_string(k) + " (%)", [k](const MetricsReport& r) {
      const auto i = static_cast<std::size_t>(k - 1);
      return detail::pct(r.sr_k_pooled[i]) + " (" + detail::pct(r.sr_k_mean[i]) + " +/- " +
             detail::pct(r.sr_k_std[i]) + ")";
    });
  if (run.reports.size() > 1) {
    os << "\nPaired bootstrap p-values (per-plate SR, " << resamples << " resamples)\n";
    for (std::size_t i = 0; i < run.reports.size(); ++i)
      for (std::size_t j = i + 1; j < run.reports.size(); ++j)
        os << "  " << run.reports[i].first << " vs " << run.reports[j].first << ": " << std::fixed
           << std::setprecision(4)
           << bootstrap_compare(run.reports[i].second, run.reports[j].second, resamples) << "\n";
  }
}

inline void render_report_csv(std::ostream& os, const LoadedRun& run, int resamples) {
  os << "section,policy,key,acquired,attempts,value\n";
  os << std::setprecision(6) << std::fixed;
  for (const auto& [policy, r] : run.reports)
    for (const auto& p : r.plates)
      os << "plate," << policy << ',' << p.plate_id << ',' << p.acquired << ',' << p.attempts << ','
         << p.sr() << "\n";
  for (const auto& [policy, r] : run.reports) {
    os << "aggregate," << policy << ",mean_sr,,," << r.mean_sr << "\n";
    os << "aggregate," << policy << ",std_sr,,," << r.std_sr << "\n";
    os << "aggregate," << policy << ",pooled_sr," << r.total_acquired << ',' << r.total_attempts
       << ',' << r.pooled_sr << "\n";
    for (int k = 1; k <= r.max_k; ++k) {
      const auto i = static_cast<std::size_t>(k - 1);
      os << "aggregate," << policy << ",sr" << k << ",,," << r.sr_k_pooled[i] << "\n";
      os << "aggregate," << policy << ",sr" << k << "_plate_mean,,," << r.sr_k_mean[i] << "\n";
      os << "aggregate," << policy << ",sr" << k << "_plate_std,,," << r.sr_k_std[i] << "\n";
    }
  }
  for (std::size_t i = 0; i < run.reports.size(); ++i)
    for (std::size_t j = i + 1; j < run.reports.size(); ++j)
      os << "bootstrap," << run.reports[i].first << ',' << run.reports[j].first << ",,,"
         << bootstrap_compare(run.reports[i].second, run.reports[j].second, resamples) << "\n";
}

inline int cmd_report(const ReportArgs& a, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (a.format != "csv" && a.format != "table-text")
      throw ConfigError("--format must be 'csv' or 'table-text'");
    const LoadedRun run = load_run(a.in_dir);
    if (a.format == "csv")
      render_report_csv(out, run, a.resamples);
    else
      render_report_text(out, run, a.resamples);
    return kExitOk;
  });
}

// ---------------------------------------------------------------------------
// Sweep

struct SweepArgs {
  RunArgs run;
  std::string param;
  std::vector<std::string> values;
};

inline void set_param(ExperimentConfig& cfg, const std::string& name, double v) {
  if (name == "theta_th") cfg.estimator.theta_th = v;
  else if (name == "blend_w") cfg.estimator.blend_w = v;
  else if (name == "tau") cfg.planner.tau = v;
  else if (name == "alpha") cfg.planner.alpha = v;
  else if (name == "theta_feas") cfg.planner.theta_feas = v;
  else throw ConfigError("unknown sweep parameter '" + name +
                         "' (theta_th, blend_w, tau, alpha, theta_feas)");
}

inline double parse_sweep_value(const std::string& s) {
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::logic_error&) {
    throw ConfigError("bad sweep value '" + s + "'");
  }
}

// One full run per value, all with the same seed schedule, plus a combined
// sweep.csv in the output directory.
inline int cmd_sweep(const SweepArgs& a, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (a.values.empty()) throw ConfigError("--values is empty");
    if (a.run.jobs < 1) throw ConfigError("--jobs must be >= 1");
    const std::string bytes = read_text_file(a.run.config);
    const ExperimentConfig base =
        prepare_config(a.run.config, bytes, a.run.seed, a.run.policies, a.run.data_dir);
    std::vector<double> values;
    for (const auto& s : a.values) values.push_back(parse_sweep_value(s));
    {
      ExperimentConfig probe = base;
      set_param(probe, a.param, values.front());
    }
    fs::create_directories(a.run.out);
    std::ostringstream csv;
    csv << "param,value,policy,mean_sr,std_sr,pooled_sr";
    for (int k = 1; k <= base.budget; ++k) csv << ",sr" << k;
    csv << "\n" << std::setprecision(6) << std::fixed;
    for (std::size_t i = 0; i < values.size(); ++i) {
      ExperimentConfig cfg = base;
      set_param(cfg, a.param, values[i]);
      const Resources res = load_resources(cfg);
      std::optional<HttpBackend> backend;
      if (cfg.backend) backend.emplace(HttpBackendConfig::from_json(*cfg.backend, a.run.config + ".backend"));
      const ExperimentResult result = run_experiment(cfg, res, a.run.jobs, backend ? &*backend : nullptr);
      write_run_outputs(fs::path(a.run.out) / (a.param + "_" + std::to_string(i)), cfg, bytes, result);
      for (const auto& [policy, r] : result.reports) {
        csv << a.param << ',' << a.values[i] << ',' << policy << ',' << r.mean_sr << ',' << r.std_sr
            << ',' << r.pooled_sr;
        for (double x : r.sr_k_pooled) csv << ',' << x;
        csv << "\n";
      }
      out << a.param << " = " << a.values[i] << " done\n";
    }
    write_text_file(fs::path(a.run.out) / "sweep.csv", csv.str());
    return kExitOk;
  });
}

}  // namespace bitesim::cli
