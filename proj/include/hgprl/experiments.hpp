#pragma once

// Experiment drivers shared by the CLI and the acceptance suite: the static AP-localization
// benchmark, parameter sweeps over the swarm simulation, and their CSV schemas.

#include <chrono>
#include <cmath>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "hgprl/ap_search.hpp"
#include "hgprl/config.hpp"
#include "hgprl/csv.hpp"
#include "hgprl/gp.hpp"
#include "hgprl/sim_world.hpp"
#include "hgprl/swarm.hpp"

namespace hgprl {

// ---------------------------------------------------------------------------------------
// Static AP benchmark

struct ApBenchRow {
  int seed = 0;
  std::string method;  // hier_k1..hier_kK, dense, sparse, gradient
  double resolution_m = 0.0;  // finest grid spacing (step length for gradient)
  double ale_m = 0.0;
  double train_ms = 0.0;
  double infer_ms = 0.0;
  std::size_t mean_evals = 0;
};

struct ApBenchSeed {
  int seed = 0;
  std::vector<ApBenchRow> rows;
  ApEstimate hierarchical;  // all configured levels
  ApEstimate dense;
  ApEstimate sparse;
  ApEstimate gradient;
  Vec2 gradient_start = Vec2::Zero();
};

inline HierarchyConfig truncate_levels(HierarchyConfig h, std::size_t k) {
  if (k < 1 || k > h.resolutions.size()) {
    throw InvalidArgument("hierarchy has " + std::to_string(h.resolutions.size()) +
                          " levels, asked for " + std::to_string(k));
  }
  h.resolutions.resize(k);
  return h;
}

/// One seed: `bench.samples` readings at uniform positions, one GP fit, then every method
/// searches the same model over a square box centered on the sample centroid.
inline ApBenchSeed run_ap_bench_seed(const SimConfig& cfg, int seed) {
  using Clock = std::chrono::steady_clock;
  const auto ms_since = [](Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
  };
  const auto& b = cfg.bench;
  std::mt19937_64 rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(seed)));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> ux(0.0, cfg.workspace.width);
  std::uniform_real_distribution<double> uy(0.0, cfg.workspace.height);

  std::vector<RssiSample> samples;
  Vec2 centroid = Vec2::Zero();
  for (int i = 0; i < b.samples; ++i) {
    const Vec2 p(ux(rng), uy(rng));
    samples.push_back({p, sample_rssi(cfg.channel, (p - cfg.ap).norm(), rng, normal)});
    centroid += p;
  }
  centroid /= static_cast<double>(b.samples);

  FitBudget budget;
  budget.max_training_points = cfg.gp.max_training_points;
  budget.restarts = cfg.gp.restarts;
  budget.seed = mix_seed(cfg.seed, 0x9e37ULL + static_cast<std::uint64_t>(seed));
  auto t0 = Clock::now();
  const TrainedGp model = fit(samples, budget);
  const double train_ms = ms_since(t0);

  const SearchRegion region{centroid, Vec2::Constant(b.search_half_extent_m)};
  ApBenchSeed out;
  out.seed = seed;
  const auto add = [&](const std::string& method, double res, const ApEstimate& e, double ms) {
    out.rows.push_back({seed, method, res, (e.position - cfg.ap).norm(), train_ms, ms,
                        e.mean_evaluations});
  };

  const auto& hier = cfg.search.hierarchy;
  for (std::size_t k = 1; k <= hier.levels(); ++k) {
    t0 = Clock::now();
    const ApEstimate e = hierarchical_search(model, region, truncate_levels(hier, k));
    add("hier_k" + std::to_string(k), hier.resolutions[k - 1], e, ms_since(t0));
    if (k == hier.levels()) out.hierarchical = e;
  }
  t0 = Clock::now();
  out.dense = dense_argmax(model, region, b.dense_resolution_m);
  add("dense", b.dense_resolution_m, out.dense, ms_since(t0));
  t0 = Clock::now();
  out.sparse = dense_argmax(model, region, b.sparse_resolution_m);
  add("sparse", b.sparse_resolution_m, out.sparse, ms_since(t0));

  // Gradient start: uniform in the workspace, at least gradient_min_start_m from the AP.
  Vec2 start(ux(rng), uy(rng));
  for (int tries = 0; tries < 1000 && (start - cfg.ap).norm() < b.gradient_min_start_m; ++tries) {
    start = Vec2(ux(rng), uy(rng));
  }
  out.gradient_start = start;
  t0 = Clock::now();
  out.gradient = gradient_ascent_baseline(model, start, b.gradient_step_m, b.gradient_max_iters);
  add("gradient", b.gradient_step_m, out.gradient, ms_since(t0));
  return out;
}

inline std::vector<ApBenchSeed> run_ap_bench(const SimConfig& cfg, int seeds) {
  cfg.validate();
  std::vector<ApBenchSeed> out;
  for (int s = 0; s < seeds; ++s) out.push_back(run_ap_bench_seed(cfg, s));
  return out;
}

inline const char* kApBenchHeader = "seed,method,resolution_m,ale_m,train_ms,infer_ms,mean_evals";

inline void write_ap_bench(std::ostream& out, const std::vector<ApBenchSeed>& seeds, bool timing) {
  out << kApBenchHeader << '\n';
  for (const auto& s : seeds) {
    for (const auto& r : s.rows) {
      csv::row(out, {std::to_string(r.seed), r.method, csv::num(r.resolution_m, 4),
                     csv::num(r.ale_m), timing ? csv::num(r.train_ms, 3) : "NA",
                     timing ? csv::num(r.infer_ms, 3) : "NA", std::to_string(r.mean_evals)});
    }
  }
}

// ---------------------------------------------------------------------------------------
// Swarm simulation and sweeps

enum class SweepAxis { kNoise, kRobots, kLevels };

inline SweepAxis parse_sweep_axis(const std::string& s) {
  if (s == "noise") return SweepAxis::kNoise;
  if (s == "robots") return SweepAxis::kRobots;
  if (s == "levels") return SweepAxis::kLevels;
  throw ConfigInvalid("--sweep", "axis must be noise, robots or levels, got '" + s + "'");
}

inline const char* sweep_axis_name(SweepAxis a) {
  switch (a) {
    case SweepAxis::kNoise:
      return "noise";
    case SweepAxis::kRobots:
      return "robots";
    case SweepAxis::kLevels:
      return "levels";
  }
  return "?";
}

/// noise sets the shadowing sigma (dBm); robots re-populates the swarm; levels keeps the
/// first K configured resolutions.
inline SimConfig apply_sweep(SimConfig cfg, SweepAxis axis, double value) {
  if (!std::isfinite(value)) throw ConfigInvalid("--sweep", "values must be finite");
  const auto as_count = [&](const char* what) {
    if (value < 1 || value != std::floor(value)) {
      throw ConfigInvalid("--sweep", std::string(what) + " must be positive integers");
    }
    return static_cast<int>(value);
  };
  switch (axis) {
    case SweepAxis::kNoise:
      if (value < 0) throw ConfigInvalid("--sweep", "noise levels must be >= 0");
      cfg.channel.shadow_sigma = value;
      break;
    case SweepAxis::kRobots:
      set_robot_count(cfg, as_count("robot counts"));
      break;
    case SweepAxis::kLevels: {
      const int k = as_count("levels");
      if (static_cast<std::size_t>(k) > cfg.search.hierarchy.levels()) {
        throw ConfigInvalid("--sweep", "at most " +
                                           std::to_string(cfg.search.hierarchy.levels()) +
                                           " levels are configured");
      }
      cfg.search.hierarchy = truncate_levels(cfg.search.hierarchy, static_cast<std::size_t>(k));
      break;
    }
  }
  cfg.validate();
  return cfg;
}

inline std::vector<TrialResult> run_trials(const SimConfig& cfg, const TrialOptions& options = {}) {
  std::vector<TrialResult> out;
  for (int t = 0; t < cfg.run.trials; ++t) {
    TrialOptions o = options;
    o.dump_fields = options.dump_fields && t == cfg.run.trials - 1;
    out.push_back(run_trial(cfg, t, o));
  }
  return out;
}

struct MeanStd {
  double mean = NAN;
  double std = NAN;  // population standard deviation
};

inline MeanStd mean_std(const std::vector<double>& xs) {
  std::vector<double> v;
  for (double x : xs)
    if (std::isfinite(x)) v.push_back(x);
  if (v.empty()) return {};
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return {m, std::sqrt(ss / static_cast<double>(v.size()))};
}

struct SweepSummary {
  std::size_t trials = 0;
  std::size_t robots = 0;
  double width_m = 0.0;
  double height_m = 0.0;
  MeanStd rmse;
  MeanStd rmse_all;
  MeanStd ale;
  MeanStd final_ale;
  MeanStd iter_ms;
  std::size_t bytes_per_message = 0;
  double success_rate = 0.0;
  MeanStd converge_iter;  // over successful trials
};

inline SweepSummary summarize(const std::vector<TrialResult>& trials) {
  SweepSummary s;
  s.trials = trials.size();
  std::vector<double> rmse, rmse_all, ale, final_ale, iter_ms, conv;
  std::size_t ok = 0;
  for (const auto& t : trials) {
    const auto& x = t.summary;
    s.robots = x.robots;
    s.width_m = x.width_m;
    s.height_m = x.height_m;
    s.bytes_per_message = std::max(s.bytes_per_message, x.bytes_per_message);
    rmse.push_back(x.rmse_m);
    rmse_all.push_back(x.rmse_all_m);
    ale.push_back(x.ale_m);
    final_ale.push_back(x.final_ale_m);
    iter_ms.push_back(x.iter_ms);
    if (x.rendezvous_success) ++ok;
    if (x.converge_iter) conv.push_back(*x.converge_iter);
  }
  s.rmse = mean_std(rmse);
  s.rmse_all = mean_std(rmse_all);
  s.ale = mean_std(ale);
  s.final_ale = mean_std(final_ale);
  s.iter_ms = mean_std(iter_ms);
  s.converge_iter = mean_std(conv);
  s.success_rate = trials.empty() ? 0.0 : static_cast<double>(ok) / trials.size();
  return s;
}

inline const char* kTrialSummaryHeader =
    "trial,robots,width_m,height_m,shadow_sigma_dbm,rmse_m,rmse_all_m,ale_m,final_ale_m,"
    "bytes_per_msg,iter_ms,final_max_pairwise_m,converge_iter,success";

inline void write_trial_summaries(std::ostream& out, const std::vector<TrialResult>& trials,
                                  bool timing) {
  out << kTrialSummaryHeader << '\n';
  for (const auto& t : trials) {
    const auto& s = t.summary;
    csv::row(out, {std::to_string(s.trial), std::to_string(s.robots), csv::num(s.width_m, 3),
                   csv::num(s.height_m, 3), csv::num(s.shadow_sigma, 3), csv::num(s.rmse_m),
                   csv::num(s.rmse_all_m), csv::num(s.ale_m), csv::num(s.final_ale_m),
                   std::to_string(s.bytes_per_message), timing ? csv::num(s.iter_ms, 3) : "NA",
                   csv::num(s.final_max_pairwise_m),
                   s.converge_iter ? std::to_string(*s.converge_iter) : "NA",
                   s.rendezvous_success ? "1" : "0"});
  }
}

inline const char* kSweepSummaryHeader =
    "axis,value,trials,robots,width_m,height_m,rmse_mean_m,rmse_std_m,rmse_all_mean_m,"
    "ale_mean_m,final_ale_mean_m,iter_ms_mean,bytes_per_msg,success_rate,converge_iter_mean";

inline void write_sweep_row(std::ostream& out, const std::string& axis, double value,
                            const SweepSummary& s, bool timing) {
  csv::row(out, {axis, csv::num(value, 3), std::to_string(s.trials), std::to_string(s.robots),
                 csv::num(s.width_m, 3), csv::num(s.height_m, 3), csv::num(s.rmse.mean),
                 csv::num(s.rmse.std), csv::num(s.rmse_all.mean), csv::num(s.ale.mean),
                 csv::num(s.final_ale.mean), timing ? csv::num(s.iter_ms.mean, 3) : "NA",
                 std::to_string(s.bytes_per_message), csv::num(s.success_rate, 3),
                 csv::num(s.converge_iter.mean, 2)});
}

inline const char* kFieldHeader = "x,y,mean_dbm,var_dbm2";

inline void write_field(std::ostream& out, const std::vector<FieldPoint>& pts) {
  out << kFieldHeader << '\n';
  for (const auto& p : pts) {
    csv::row(out, {csv::num(p.x), csv::num(p.y), csv::num(p.mean_dbm), csv::num(p.var_dbm2)});
  }
}

}  // namespace hgprl
