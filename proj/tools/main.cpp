#include <CLI11.hpp>

#include <iostream>

#include "bitesim/cli.hpp"

#ifndef BITESIM_DATA_DIR
#define BITESIM_DATA_DIR "data"
#endif

int main(int argc, char** argv) {
  using namespace bitesim::cli;

  CLI::App app{"bitesim: bite-acquisition simulator and skill planner"};
  app.require_subcommand(1);
  std::string data_dir = BITESIM_DATA_DIR;
  app.add_option("--data", data_dir, "Directory with registry, world model and tool files");

  CalibrateArgs cal;
  auto* c = app.add_subcommand("calibrate", "Run tool calibration and write the dataset + summary");
  c->add_option("--tool", cal.tool, "Tool name")->capture_default_str();
  c->add_option("--seed", cal.seed, "Seed")->capture_default_str();
  c->add_option("--trials", cal.trials, "Trials per (food, skill)")->capture_default_str();
  c->add_option("--out", cal.out, "Dataset path (default calibration_<tool>.json)");

  RunArgs run;
  std::uint64_t run_seed = 0;
  auto add_run_options = [&](CLI::App* sub, RunArgs& r, std::uint64_t& seed) {
    sub->add_option("--config", r.config, "Experiment config")->required();
    sub->add_option("--seed", seed, "Master seed (overrides the config)");
    sub->add_option("--out", r.out, "Output directory")->capture_default_str();
    sub->add_option("--jobs", r.jobs, "Parallel episode workers")->capture_default_str();
    sub->add_option("--policy", r.policies, "Policy to run (repeatable; overrides the config)");
  };
  auto* r = app.add_subcommand("run", "Run an experiment");
  add_run_options(r, run, run_seed);

  ReportArgs rep;
  auto* p = app.add_subcommand("report", "Summarize a run directory");
  p->add_option("dir", rep.in_dir, "Run output directory")->required();
  p->add_option("--format", rep.format, "csv or table-text")->capture_default_str();
  p->add_option("--resamples", rep.resamples, "Bootstrap resamples")->capture_default_str();

  SweepArgs sw;
  std::uint64_t sweep_seed = 0;
  std::string values;
  auto* s = app.add_subcommand("sweep", "Run one experiment per value of a parameter");
  add_run_options(s, sw.run, sweep_seed);
  s->add_option("--param", sw.param, "theta_th, blend_w, tau, alpha or theta_feas")->required();
  s->add_option("--values", values, "Comma-separated values (-inf allowed)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  if (*c) {
    cal.data_dir = data_dir;
    return cmd_calibrate(cal, std::cout, std::cerr);
  }
  if (*r) {
    if (r->count("--seed")) run.seed = run_seed;
    if (app.count("--data")) run.data_dir = data_dir;
    return cmd_run(run, std::cout, std::cerr);
  }
  if (*p) return cmd_report(rep, std::cout, std::cerr);
  if (*s) {
    if (s->count("--seed")) sw.run.seed = sweep_seed;
    if (app.count("--data")) sw.run.data_dir = data_dir;
    std::stringstream ss(values);
    for (std::string v; std::getline(ss, v, ',');)
      if (!v.empty()) sw.values.push_back(v);
    return cmd_sweep(sw, std::cout, std::cerr);
  }
  return kExitUsage;
}
