// hgprl: desk-scale experiment runner.
//
//   hgprl ap-bench   [--config F] [--out D] [--seed S] [--trials N] [--timing]
//   hgprl simulate   [--config F] [--out D] [--seed S] [--sweep AXIS V1,V2,..] [--robots N]
//                    [--world WxH] [--trials N] [--iters N] [--timing]
//   hgprl rendezvous (same flags as simulate)
//
// Exit codes: 0 success, 2 configuration error, 3 runtime failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hgprl/config.hpp"
#include "hgprl/experiments.hpp"
#include "hgprl/swarm.hpp"

namespace fs = std::filesystem;
using namespace hgprl;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct Options {
  std::string config;
  std::string out = "out";
  std::optional<std::uint64_t> seed;
  std::vector<std::string> sweep;  // {axis, "v1,v2,..."}
  std::optional<int> robots;
  std::string world;
  std::optional<int> trials;
  std::optional<int> iters;
  bool timing = false;
};

void add_common(CLI::App* cmd, Options& o, bool swarm) {
  cmd->add_option("--config", o.config, "JSON config file");
  cmd->add_option("--out", o.out, "output directory")->capture_default_str();
  cmd->add_option("--seed", o.seed, "override world.seed");
  cmd->add_option("--trials", o.trials, swarm ? "trials per setting" : "number of seeds (default 50)");
  cmd->add_flag("--timing", o.timing, "write measured timings instead of NA");
  if (!swarm) return;
  cmd->add_option("--sweep", o.sweep, "AXIS VALUES, e.g. --sweep noise 0,2,4,6")
      ->expected(2);
  cmd->add_option("--robots", o.robots, "robot count (random starts)");
  cmd->add_option("--world", o.world, "world size WxH in meters, e.g. 6x5");
  cmd->add_option("--iters", o.iters, "iterations per trial");
}

std::vector<double> parse_values(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size() || !std::isfinite(v)) {
      throw ConfigInvalid("--sweep", "bad value '" + item + "'");
    }
    out.push_back(v);
  }
  if (out.empty()) throw ConfigInvalid("--sweep", "no values given");
  return out;
}

SimConfig build_config(const Options& o) {
  SimConfig c = o.config.empty() ? SimConfig{} : load_config(o.config);
  if (o.seed) c.seed = *o.seed;
  if (!o.world.empty()) {
    const auto x = o.world.find_first_of("xX");
    double w = 0.0, h = 0.0;
    try {
      if (x == std::string::npos) throw std::invalid_argument("no x");
      w = std::stod(o.world.substr(0, x));
      h = std::stod(o.world.substr(x + 1));
    } catch (const std::exception&) {
      throw ConfigInvalid("--world", "expected WxH, got '" + o.world + "'");
    }
    if (!(w > 0.0) || !(h > 0.0)) throw ConfigInvalid("--world", "sizes must be > 0");
    set_world_size(c, w, h);
  }
  if (o.robots) {
    if (*o.robots < 1) throw ConfigInvalid("--robots", "must be >= 1");
    set_robot_count(c, *o.robots);
  }
  if (o.trials) c.run.trials = *o.trials;
  if (o.iters) c.run.iterations = *o.iters;
  if (o.trials && *o.trials < 1) throw ConfigInvalid("--trials", "must be >= 1");
  if (o.iters && *o.iters < 1) throw ConfigInvalid("--iters", "must be >= 1");
  c.validate();
  return c;
}

fs::path prepare_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw ConfigInvalid("--out", "cannot create directory " + dir.string());
  }
  return dir;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw ConfigInvalid("--out", "cannot write " + p.string());
  return f;
}

std::string value_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

int cmd_ap_bench(const Options& o) {
  const SimConfig cfg = build_config(o);
  const int seeds = o.trials.value_or(50);
  const fs::path dir = prepare_dir(o.out);
  const auto results = run_ap_bench(cfg, seeds);
  auto f = open_out(dir / "summary.csv");
  write_ap_bench(f, results, o.timing);

  std::map<std::string, std::vector<double>> ale;
  std::vector<std::string> order;
  for (const auto& s : results) {
    for (const auto& r : s.rows) {
      if (!ale.count(r.method)) order.push_back(r.method);
      ale[r.method].push_back(r.ale_m);
    }
  }
  std::printf("ap-bench: %d seeds\n", seeds);
  for (const auto& m : order) {
    const auto ms = mean_std(ale[m]);
    std::printf("  %-9s ALE %.4f +- %.4f m\n", m.c_str(), ms.mean, ms.std);
  }
  return 0;
}

void write_run(const fs::path& dir, const std::vector<TrialResult>& trials, bool timing,
               bool trajectories) {
  {
    auto f = open_out(dir / "metrics.csv");
    f << kMetricsHeader << '\n';
    for (const auto& t : trials) write_metrics(f, t.metrics, timing, false);
  }
  {
    auto f = open_out(dir / "summary.csv");
    write_trial_summaries(f, trials, timing);
  }
  if (trajectories) {
    auto f = open_out(dir / "trajectories.csv");
    f << kTrajectoriesHeader << '\n';
    for (const auto& t : trials) write_trajectories(f, t.trajectories, false);
  }
  for (const auto& t : trials) {
    for (const auto& dump : t.fields) {
      for (std::size_t k = 0; k < dump.levels.size(); ++k) {
        auto f = open_out(dir / ("field_lvl" + std::to_string(k + 1) + "_robot" +
                                 std::to_string(dump.robot) + ".csv"));
        write_field(f, dump.levels[k]);
      }
    }
  }
}

void report(const char* label, const std::vector<TrialResult>& trials, bool rendezvous) {
  const auto s = summarize(trials);
  std::printf("%s: %zu trials, %zu robots, %.2fx%.2f m\n", label, s.trials, s.robots, s.width_m,
              s.height_m);
  if (rendezvous) {
    std::size_t ok = 0;
    for (const auto& t : trials) {
      const auto& x = t.summary;
      ok += x.rendezvous_success;
      std::printf("  trial %d: %s, max pairwise %.3f m, converged at %s\n", x.trial,
                  x.rendezvous_success ? "success" : "FAIL", x.final_max_pairwise_m,
                  x.converge_iter ? std::to_string(*x.converge_iter).c_str() : "-");
    }
    std::printf("  success %zu/%zu\n", ok, trials.size());
  }
  std::printf("  RMSE %.4f +- %.4f m (all iterations %.4f), ALE %.4f m\n", s.rmse.mean,
              s.rmse.std, s.rmse_all.mean, s.ale.mean);
}

int cmd_swarm(const Options& o, bool rendezvous) {
  SimConfig cfg = build_config(o);
  if (rendezvous) cfg.controller.type = ControllerType::kRendezvous;
  const fs::path dir = prepare_dir(o.out);
  const char* label = rendezvous ? "rendezvous" : "simulate";
  TrialOptions topt;
  topt.dump_fields = true;

  if (o.sweep.empty()) {
    const auto trials = run_trials(cfg, topt);
    write_run(dir, trials, o.timing, rendezvous);
    report(label, trials, rendezvous);
    return 0;
  }

  const SweepAxis axis = parse_sweep_axis(o.sweep.at(0));
  const auto values = parse_values(o.sweep.at(1));
  std::vector<SimConfig> configs;
  for (double v : values) configs.push_back(apply_sweep(cfg, axis, v));  // validate all first
  auto summary = open_out(dir / "summary.csv");
  summary << kSweepSummaryHeader << '\n';
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto trials = run_trials(configs[i], topt);
    const std::string name = std::string(sweep_axis_name(axis)) + "_" + value_label(values[i]);
    write_run(prepare_dir(dir / name), trials, o.timing, rendezvous);
    write_sweep_row(summary, sweep_axis_name(axis), values[i], summarize(trials), o.timing);
    report(name.c_str(), trials, rendezvous);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"HGP-RL desk-scale experiments"};
  app.require_subcommand(1);
  Options opts;
  auto* bench = app.add_subcommand("ap-bench", "static AP-localization benchmark");
  auto* sim = app.add_subcommand("simulate", "multi-robot relative-localization simulation");
  auto* rdv = app.add_subcommand("rendezvous", "rendezvous task on estimated relative positions");
  add_common(bench, opts, false);
  add_common(sim, opts, true);
  add_common(rdv, opts, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*bench) return cmd_ap_bench(opts);
    if (*sim) return cmd_swarm(opts, false);
    return cmd_swarm(opts, true);
  } catch (const ConfigInvalid& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}
