#pragma once
//
// Experiment configuration, resource loading, parallel execution of
// (policy, plate, seed) cells, the per-attempt CSV ledger, and run manifests.
//

#include <openssl/evp.h>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <memory>
#include <mutex>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "bitesim/calibration.hpp"
#include "bitesim/episode.hpp"
#include "bitesim/estimator.hpp"
#include "bitesim/likelihood.hpp"
#include "bitesim/metrics.hpp"
#include "bitesim/planner.hpp"
#include "bitesim/registry.hpp"

namespace bitesim {

namespace fs = std::filesystem;

struct DataPaths {
  std::string registry = "food_registry.json";
  std::string world = "world_model.json";
  std::string tools = "tools.json";
  std::string priors = "prior_table.json";
  std::string category_table = "category_baseline.json";
  std::string prompts_dir = "prompts";
};

// Calibration source: a dataset file, or a fresh run with these settings.
struct CalibrationSource {
  std::optional<std::string> path;
  std::uint64_t seed = 7;
  int trials = kDefaultCalibrationTrials;
  std::vector<std::string> foods = default_calibration_foods();
};

struct ExperimentConfig {
  std::string tool = "plastic_fork";
  std::uint64_t master_seed = 0;
  int seeds_per_plate = 1;
  int budget = 3;
  std::vector<std::string> policies;
  PlannerParams planner;
  EstimatorParams estimator;
  double likelihood_std_floor = 0.01;
  std::string data_dir = ".";
  DataPaths data;
  CalibrationSource calibration;
  std::vector<PlateSpec> plates;
  std::optional<Json> backend;  // remote language-model endpoint, if any

  fs::path resolve(const std::string& file) const {
    const fs::path p(file);
    return p.is_absolute() ? p : fs::path(data_dir) / p;
  }
};

namespace detail {

inline void check_policies(const std::vector<std::string>& policies, const std::string& where) {
  if (policies.empty()) throw ConfigError(where + ": empty policy list");
  std::set<std::string> seen;
  for (const auto& p : policies) {
    require_policy(p);
    if (!seen.insert(p).second) throw ConfigError(where + ": duplicate policy '" + p + "'");
  }
}

}  // namespace detail

// `base_dir` anchors relative paths (normally the config file's directory).
inline ExperimentConfig config_from_json(const Json& doc, const fs::path& base_dir,
                                         const std::string& origin = "config") {
  check_schema_version(doc, origin);
  ExperimentConfig c;
  c.tool = field_or<std::string>(doc, "tool", c.tool, origin);
  c.master_seed = field_or<std::uint64_t>(doc, "master_seed", 0, origin);
  c.seeds_per_plate = field_or<int>(doc, "seeds_per_plate", 1, origin);
  c.budget = field_or<int>(doc, "budget", 3, origin);
  if (c.seeds_per_plate < 1) throw ConfigError(origin + ".seeds_per_plate: must be >= 1");
  if (c.budget < 1) throw ConfigError(origin + ".budget: must be >= 1");
  c.policies = get_as<std::vector<std::string>>(require(doc, "policies", origin), origin + ".policies");
  detail::check_policies(c.policies, origin + ".policies");

  if (doc.contains("params")) {
    const Json& p = doc["params"];
    const std::string w = origin + ".params";
    if (p.contains("theta_th")) c.estimator.theta_th = get_extended_double(p["theta_th"], w + ".theta_th");
    c.estimator.blend_w = field_or<double>(p, "blend_w", c.estimator.blend_w, w);
    c.planner.tau = field_or<double>(p, "tau", c.planner.tau, w);
    c.planner.alpha = field_or<double>(p, "alpha", c.planner.alpha, w);
    c.planner.theta_feas = field_or<double>(p, "theta_feas", c.planner.theta_feas, w);
    c.likelihood_std_floor = field_or<double>(p, "likelihood_std_floor", c.likelihood_std_floor, w);
  }

  c.data_dir = (base_dir / field_or<std::string>(doc, "data_dir", ".", origin)).lexically_normal().string();
  if (doc.contains("data")) {
    const Json& d = doc["data"];
    const std::string w = origin + ".data";
    c.data.registry = field_or<std::string>(d, "registry", c.data.registry, w);
    c.data.world = field_or<std::string>(d, "world", c.data.world, w);
    c.data.tools = field_or<std::string>(d, "tools", c.data.tools, w);
    c.data.priors = field_or<std::string>(d, "priors", c.data.priors, w);
    c.data.category_table = field_or<std::string>(d, "category_table", c.data.category_table, w);
    c.data.prompts_dir = field_or<std::string>(d, "prompts_dir", c.data.prompts_dir, w);
  }

  if (doc.contains("calibration")) {
    const Json& cal = doc["calibration"];
    const std::string w = origin + ".calibration";
    if (cal.is_string()) {
      const fs::path p(cal.get<std::string>());
      c.calibration.path = (p.is_absolute() ? p : base_dir / p).lexically_normal().string();
    } else {
      c.calibration.seed = field_or<std::uint64_t>(cal, "seed", c.calibration.seed, w);
      c.calibration.trials = field_or<int>(cal, "trials", c.calibration.trials, w);
      c.calibration.foods = field_or<std::vector<std::string>>(cal, "foods", c.calibration.foods, w);
    }
  }

  if (doc.contains("backend")) {
    if (!doc["backend"].is_object()) throw ConfigError(origin + ".backend: expected an object");
    c.backend = doc["backend"];
  }

  const Json& plates = require(doc, "plates", origin);
  if (!plates.is_array() || plates.empty()) throw ConfigError(origin + ".plates: expected a non-empty array");
  std::set<std::string> ids;
  for (std::size_t i = 0; i < plates.size(); ++i) {
    PlateSpec spec = plate_spec_from_json(plates[i], origin + ".plates[" + std::to_string(i) + "]");
    if (!ids.insert(spec.plate_id).second)
      throw ConfigError(origin + ".plates: duplicate plate_id '" + spec.plate_id + "'");
    c.plates.push_back(std::move(spec));
  }
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  return config_from_json(load_json_file(path), fs::path(path).parent_path(), path);
}

// ---------------------------------------------------------------------------
// Resources

struct Resources {
  FoodRegistry registry;
  InteractionModel world;
  ToolRegistry tools;
  PriorTable priors;
  CategoryTable category;
  PromptAssets prompts;
  std::optional<CalibrationDataset> calibration;
  std::optional<LikelihoodModel> likelihood;
  std::optional<SkillEstimateTable> estimates;
  std::string calibration_summary;
};

inline std::string read_optional_text(const fs::path& p) {
  return fs::exists(p) ? read_text_file(p.string()) : std::string{};
}

// Loads data files and obtains the calibration dataset (loaded or run) when
// any configured policy needs it.
inline Resources load_resources(const ExperimentConfig& cfg) {
  Resources r;
  r.registry = FoodRegistry::load(cfg.resolve(cfg.data.registry).string());
  r.world = InteractionModel::load(cfg.resolve(cfg.data.world).string());
  r.tools = ToolRegistry::load(cfg.resolve(cfg.data.tools).string());
  r.priors = PriorTable::load(cfg.resolve(cfg.data.priors).string());
  if (std::any_of(cfg.policies.begin(), cfg.policies.end(),
                  [](const std::string& p) { return require_policy(p) == PolicyKind::category_baseline; }))
    r.category = CategoryTable::load(cfg.resolve(cfg.data.category_table).string());
  const fs::path prompts = cfg.resolve(cfg.data.prompts_dir);
  r.prompts.planner_template = read_optional_text(prompts / "skill_selection.txt");
  r.prompts.skill_descriptions = read_optional_text(prompts / "skill_descriptions.txt");
  r.prompts.property_template = read_optional_text(prompts / "property_estimation.txt");

  const Tool& tool = r.tools.at(cfg.tool);
  const bool need = std::any_of(cfg.policies.begin(), cfg.policies.end(), [](const std::string& p) {
    return needs_calibration(require_policy(p));
  });
  if (need) {
    if (cfg.calibration.path) {
      if (!fs::exists(*cfg.calibration.path))
        throw ConfigError("missing calibration dataset '" + *cfg.calibration.path + "'");
      r.calibration = load_dataset(*cfg.calibration.path);
      if (r.calibration->tool != tool.name)
        throw ConfigError("calibration dataset '" + *cfg.calibration.path + "' is for tool '" +
                          r.calibration->tool + "', not '" + tool.name + "'");
    } else {
      r.calibration = run_calibration(cfg.calibration.seed, r.world, tool, r.registry,
                                      cfg.calibration.foods, cfg.calibration.trials);
    }
    r.likelihood = fit_likelihoods(*r.calibration, FitOptions{cfg.likelihood_std_floor});
    r.estimates = SkillEstimateTable::from_calibration(*r.calibration, cfg.planner.tau, cfg.planner.alpha);
    r.calibration_summary = render_summary(*r.calibration);
  }
  return r;
}

inline EpisodeContext make_context(const ExperimentConfig& cfg, const Resources& r) {
  EpisodeContext ctx;
  ctx.world = &r.world;
  ctx.tool = r.tools.at(cfg.tool);
  ctx.registry = &r.registry;
  ctx.priors = &r.priors;
  ctx.category = &r.category;
  ctx.likelihood = r.likelihood ? &*r.likelihood : nullptr;
  ctx.estimates = r.estimates ? &*r.estimates : nullptr;
  ctx.calibration_summary = r.calibration_summary;
  ctx.planner = cfg.planner;
  ctx.estimator = cfg.estimator;
  ctx.budget = cfg.budget;
  ctx.prompts = r.prompts;
  return ctx;
}

// ---------------------------------------------------------------------------
// Execution

struct ExperimentResult {
  std::vector<EpisodeLog> logs;  // policy-major, then plate, then seed index
  std::vector<std::pair<std::string, MetricsReport>> reports;  // config policy order

  const MetricsReport& report(const std::string& policy) const {
    for (const auto& [p, r] : reports)
      if (p == policy) return r;
    throw std::out_of_range("no report for policy '" + policy + "'");
  }
};

// Seed shared by every policy for one (plate, seed index) cell.
inline std::uint64_t plate_seed(std::uint64_t master, std::size_t plate_idx, int seed_idx) {
  return derive_seed(master, {static_cast<std::uint64_t>(plate_idx), static_cast<std::uint64_t>(seed_idx)});
}

// `backend` must tolerate concurrent calls when jobs > 1.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg, const Resources& res, int jobs = 1,
                                       LanguageBackend* backend = nullptr) {
  detail::check_policies(cfg.policies, "config.policies");
  if (jobs < 1) throw std::invalid_argument("jobs must be >= 1");
  EpisodeContext ctx = make_context(cfg, res);
  ctx.backend = backend;

  struct Cell {
    PolicyKind policy;
    std::size_t plate;
    int seed_idx;
  };
  std::vector<Cell> cells;
  for (const auto& p : cfg.policies)
    for (std::size_t pl = 0; pl < cfg.plates.size(); ++pl)
      for (int s = 0; s < cfg.seeds_per_plate; ++s) cells.push_back({require_policy(p), pl, s});

  // Validate every plate once before fanning out.
  for (std::size_t pl = 0; pl < cfg.plates.size(); ++pl)
    (void)make_plate(res.registry, cfg.plates[pl], plate_seed(cfg.master_seed, pl, 0));

  ExperimentResult out;
  out.logs.resize(cells.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < cells.size();) {
      try {
        const Cell& c = cells[i];
        const std::uint64_t seed = plate_seed(cfg.master_seed, c.plate, c.seed_idx);
        EpisodeLog log = run_episode(seed, make_plate(res.registry, cfg.plates[c.plate], seed), c.policy, ctx);
        log.seed_index = c.seed_idx;
        out.logs[i] = std::move(log);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mu);
        if (!failure) failure = std::current_exception();
        next.store(cells.size());
      }
    }
  };
  const int n = std::min<int>(jobs, static_cast<int>(std::max<std::size_t>(cells.size(), 1)));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  for (const auto& p : cfg.policies) {
    std::vector<EpisodeLog> mine;
    for (const auto& l : out.logs)
      if (l.policy == p) mine.push_back(l);
    out.reports.emplace_back(p, compute_metrics(mine, cfg.budget));
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV ledger

inline const std::vector<std::string>& csv_columns() {
  static const std::vector<std::string> cols{
      "run_id",         "plate_id",        "item_id",         "label",
      "attempt_index",  "skill",           "success",         "gated_softness",
      "gated_moisture", "gated_viscosity", "belief_entropy_pre", "belief_entropy_post",
      "seed"};
  return cols;
}

inline std::string run_id(const EpisodeLog& log) {
  return log.policy + "/" + log.plate_id + "/" + std::to_string(log.seed_index);
}

namespace detail {

inline std::string fmt_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9f", x);
  return buf;
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace detail

inline void write_csv(std::ostream& os, const std::vector<EpisodeLog>& logs) {
  const auto& cols = csv_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
  os << "\n";
  for (const auto& log : logs) {
    const std::string rid = run_id(log);
    for (const auto& a : log.attempts) {
      os << rid << ',' << a.plate_id << ',' << a.item_id << ',' << a.label << ',' << a.attempt_index
         << ',' << to_string(a.skill) << ',' << (a.success ? 1 : 0) << ',' << (a.gated[0] ? 1 : 0)
         << ',' << (a.gated[1] ? 1 : 0) << ',' << (a.gated[2] ? 1 : 0) << ','
         << detail::fmt_double(a.entropy_pre) << ',' << detail::fmt_double(a.entropy_post) << ','
         << log.seed << "\n";
    }
  }
}

// Rebuilds episode logs from a ledger; row order within a run is kept.
inline std::vector<EpisodeLog> read_csv(std::istream& is, const std::string& origin = "attempts.csv") {
  std::string line;
  if (!std::getline(is, line)) throw ConfigError(origin + ": empty ledger");
  const auto header = detail::split(line, ',');
  if (header != csv_columns()) throw ConfigError(origin + ": unexpected header");
  std::vector<EpisodeLog> logs;
  std::map<std::string, std::size_t> index;
  int row = 1;
  while (std::getline(is, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto f = detail::split(line, ',');
    const std::string where = origin + ": row " + std::to_string(row);
    if (f.size() != header.size()) throw ConfigError(where + ": wrong field count");
    try {
      auto [it, fresh] = index.emplace(f[0], logs.size());
      if (fresh) {
        EpisodeLog log;
        const auto parts = detail::split(f[0], '/');
        if (parts.size() != 3) throw ConfigError(where + ": malformed run_id");
        log.policy = parts[0];
        log.plate_id = f[1];
        log.seed_index = std::stoi(parts[2]);
        log.seed = std::stoull(f[12]);
        logs.push_back(std::move(log));
      }
      EpisodeLog& log = logs[it->second];
      AttemptRecord a;
      a.plate_id = f[1];
      a.item_id = std::stoi(f[2]);
      a.label = f[3];
      a.attempt_index = std::stoi(f[4]);
      a.skill = parse_skill_field(Json(f[5]), where + ".skill");
      a.success = f[6] == "1";
      for (std::size_t k = 0; k < 3; ++k) a.gated[k] = f[7 + k] == "1";
      a.entropy_pre = std::stod(f[10]);
      a.entropy_post = std::stod(f[11]);
      log.attempts.push_back(a);
      auto item = std::find_if(log.items.begin(), log.items.end(),
                               [&](const ItemResult& r) { return r.item_id == a.item_id; });
      if (item == log.items.end()) {
        log.items.push_back({a.item_id, a.label, false, 0});
        item = log.items.end() - 1;
      }
      ++item->attempts;
      if (a.acquired()) item->acquired = true;
    } catch (const std::logic_error&) {
      throw ConfigError(where + ": malformed field");
    }
  }
  return logs;
}

// ---------------------------------------------------------------------------
// Manifest and summaries

// Hex SHA-256 of `bytes`.
inline std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), md, &len) != 1)
    throw Error("sha256 failed");
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i)
    os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  return os.str();
}

struct RunManifest {
  std::string config_digest;
  std::uint64_t master_seed = 0;
  std::string tool;
  std::vector<std::string> policies;
  int budget = 3;
  std::string attempts_file = "attempts.csv";
  std::vector<std::pair<std::string, std::string>> summaries;  // policy -> file

  Json to_json() const {
    Json s = Json::object();
    for (const auto& [p, f] : summaries) s[p] = f;
    return {{"schema_version", kSchemaVersion}, {"config_digest", config_digest},
            {"master_seed", master_seed},       {"tool", tool},
            {"policies", policies},             {"budget", budget},
            {"outputs", {{"attempts", attempts_file}, {"summaries", s}}}};
  }

  static RunManifest from_json(const Json& doc, const std::string& origin = "manifest") {
    check_schema_version(doc, origin);
    RunManifest m;
    m.config_digest = field_or<std::string>(doc, "config_digest", "", origin);
    m.master_seed = field_or<std::uint64_t>(doc, "master_seed", 0, origin);
    m.tool = field_or<std::string>(doc, "tool", "", origin);
    m.policies = get_as<std::vector<std::string>>(require(doc, "policies", origin), origin + ".policies");
    m.budget = field_or<int>(doc, "budget", 3, origin);
    const Json& outputs = require(doc, "outputs", origin);
    m.attempts_file = get_as<std::string>(require(outputs, "attempts", origin + ".outputs"), origin + ".outputs.attempts");
    if (outputs.contains("summaries"))
      for (const auto& [p, f] : outputs["summaries"].items()) m.summaries.emplace_back(p, f.get<std::string>());
    return m;
  }
};

inline Json report_to_json(const std::string& policy, const MetricsReport& r) {
  Json plates = Json::array();
  for (const auto& p : r.plates)
    plates.push_back({{"plate_id", p.plate_id},
                      {"acquired", p.acquired},
                      {"attempts", p.attempts},
                      {"items", p.items},
                      {"sr", p.sr()},
                      {"acquired_within", p.acquired_within}});
  return {{"schema_version", kSchemaVersion},
          {"policy", policy},
          {"mean_sr", r.mean_sr},
          {"std_sr", r.std_sr},
          {"pooled_sr", r.pooled_sr},
          {"sr_k_pooled", r.sr_k_pooled},
          {"sr_k_mean", r.sr_k_mean},
          {"sr_k_std", r.sr_k_std},
          {"excluded", r.excluded},
          {"plates", plates}};
}

inline void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

// Writes attempts.csv, one summary per policy, and manifest.json into out_dir.
inline RunManifest write_run_outputs(const fs::path& out_dir, const ExperimentConfig& cfg,
                                     const std::string& config_bytes, const ExperimentResult& result) {
  fs::create_directories(out_dir);
  RunManifest m;
  m.config_digest = sha256_hex(config_bytes);
  m.master_seed = cfg.master_seed;
  m.tool = cfg.tool;
  m.policies = cfg.policies;
  m.budget = cfg.budget;
  {
    std::ostringstream csv;
    write_csv(csv, result.logs);
    write_text_file(out_dir / m.attempts_file, csv.str());
  }
  for (const auto& [policy, report] : result.reports) {
    const std::string file = "summary_" + policy + ".json";
    write_text_file(out_dir / file, report_to_json(policy, report).dump(2) + "\n");
    m.summaries.emplace_back(policy, file);
  }
  write_text_file(out_dir / "manifest.json", m.to_json().dump(2) + "\n");
  return m;
}

}  // namespace bitesim
