#pragma once

// Simulation configuration and its JSON file form.
//
//   {
//     "world":      {"width_m": 3.2, "height_m": 2.0, "ap": [1.6, 1.0], "seed": 1},
//     "robots":     [{"id": 0, "start": [0.4, 0.4, 0.0]}, ...],
//     "channel":    {"rssi_d0_dbm": -20, "eta": 3, "shadow_sigma_dbm": 2, "multipath_sigma_dbm": 2},
//     "gp":         {"initial_samples": 10, "max_training_points": 100, "restarts": 5,
//                    "retrain_every": 10},
//     "hierarchy":  {"levels": 4, "resolutions_m": [0.1, 0.05, 0.025, 0.0125], "grid_points": 30},
//     "run":        {"iterations": 300, "trials": 10},
//     "controller": {"type": "random_walk", "v_max": 0.2, "omega_max": 2.0,
//                    "rendezvous_epsilon_m": 0.2}
//   }
//
// Every section and key is optional; missing keys keep their defaults. Keys beyond the
// ones above are tuning knobs documented in README.md.

#include <cstdint>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hgprl/agent.hpp"
#include "hgprl/ap_search.hpp"
#include "hgprl/common.hpp"
#include "hgprl/sim_world.hpp"

namespace hgprl {

enum class ControllerType { kRandomWalk, kRendezvous };

struct GpSettings {
  int initial_samples = 10;
  std::size_t max_training_points = 100;
  int restarts = 5;
  int retrain_every = 10;
};

struct RunSettings {
  int iterations = 300;
  int trials = 10;
  double dt_s = 0.5;
  bool randomize_starts = true;
  double drop_prob = 0.0;
  std::uint32_t max_message_age = 5;
};

struct ControllerSettings {
  ControllerType type = ControllerType::kRandomWalk;
  double v_max = 0.2;
  double omega_max = 2.0;
  double rendezvous_epsilon_m = 0.2;
  double k_c = 1.0;
  double k_omega = 2.0;
  int localize_iters = 230;  // Localize-phase iterations before rendezvous starts
  int walk_hold = 6;
  LocalizeMotion localize_motion = LocalizeMotion::kRandomWalk;
  double seek_radius_m = 0.5;
};

struct SearchSettings {
  HierarchyConfig hierarchy{};
  double margin_m = 0.25;  // added around the bounding box of the robot's samples
};

/// Static AP-localization benchmark (ap-bench subcommand).
struct BenchSettings {
  int samples = 50;                    // uniformly placed training samples per seed
  double search_half_extent_m = 1.5;   // square search box around the sample centroid
  double dense_resolution_m = 0.0125;
  double sparse_resolution_m = 0.1;
  double gradient_step_m = 0.05;
  int gradient_max_iters = 1000;
  double gradient_min_start_m = 1.0;   // gradient ascent starts at least this far from the AP
};

struct SimConfig {
  Workspace workspace{};
  Vec2 ap{1.6, 1.0};
  std::uint64_t seed = 1;
  std::vector<RobotStart> robots{{0, {0.4, 0.4, 0.0, 0}}, {1, {2.8, 0.4, 0.0, 1}},
                                 {2, {1.6, 1.7, 0.0, 2}}};
  ChannelParams channel{};
  GpSettings gp{};
  SearchSettings search{};
  RunSettings run{};
  ControllerSettings controller{};
  BenchSettings bench{};

  /// Throws ConfigInvalid naming the offending key.
  void validate() const;
};

namespace config_detail {

using nlohmann::json;

template <typename T>
void read(const json& obj, const char* key, const std::string& path, T& out) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigInvalid(path + "." + key, e.what());
  }
}

inline const json& section(const json& root, const char* key) {
  static const json empty = json::object();
  if (!root.contains(key)) return empty;
  const json& s = root.at(key);
  if (!s.is_object()) throw ConfigInvalid(key, "must be an object");
  return s;
}

inline Vec2 read_vec2(const json& v, const std::string& path) {
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
    throw ConfigInvalid(path, "expected [x, y]");
  }
  return {v[0].get<double>(), v[1].get<double>()};
}

}  // namespace config_detail

inline void SimConfig::validate() const {
  const auto require = [](bool ok, const char* key, const char* what) {
    if (!ok) throw ConfigInvalid(key, what);
  };
  require(workspace.width > 0 && std::isfinite(workspace.width), "world.width_m", "must be > 0");
  require(workspace.height > 0 && std::isfinite(workspace.height), "world.height_m",
          "must be > 0");
  require(is_finite(ap) && workspace.contains(ap), "world.ap", "must lie inside the world");
  require(!robots.empty(), "robots", "need at least one robot");
  std::set<RobotId> ids;
  for (const auto& r : robots) {
    require(ids.insert(r.id).second, "robots", "ids must be unique");
    require(workspace.contains(r.start.position()) && std::isfinite(r.start.theta), "robots",
            "start must lie inside the world");
  }
  require(channel.path_loss_exponent > 0, "channel.eta", "must be > 0");
  require(channel.shadow_sigma >= 0, "channel.shadow_sigma_dbm", "must be >= 0");
  require(channel.multipath_sigma >= 0, "channel.multipath_sigma_dbm", "must be >= 0");
  require(std::isfinite(channel.rssi_d0), "channel.rssi_d0_dbm", "must be finite");
  require(gp.initial_samples >= 2, "gp.initial_samples", "must be >= 2");
  require(gp.max_training_points >= 2, "gp.max_training_points", "must be >= 2");
  require(gp.restarts >= 1, "gp.restarts", "must be >= 1");
  require(gp.retrain_every >= 1, "gp.retrain_every", "must be >= 1");
  try {
    search.hierarchy.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigInvalid("hierarchy", e.what());
  }
  require(search.margin_m >= 0, "hierarchy.search_margin_m", "must be >= 0");
  require(run.iterations >= 1, "run.iterations", "must be >= 1");
  require(run.trials >= 1, "run.trials", "must be >= 1");
  require(run.dt_s > 0, "run.dt_s", "must be > 0");
  require(run.drop_prob >= 0 && run.drop_prob <= 1, "run.drop_prob", "must be in [0, 1]");
  require(controller.v_max > 0, "controller.v_max", "must be > 0");
  require(controller.omega_max > 0, "controller.omega_max", "must be > 0");
  require(controller.rendezvous_epsilon_m > 0, "controller.rendezvous_epsilon_m", "must be > 0");
  require(controller.walk_hold >= 1, "controller.walk_hold", "must be >= 1");
  require(controller.localize_iters >= 0, "controller.localize_iters", "must be >= 0");
  require(controller.seek_radius_m > 0, "controller.seek_radius_m", "must be > 0");
  require(bench.samples >= 2, "bench.samples", "must be >= 2");
  require(bench.search_half_extent_m > 0, "bench.search_half_extent_m", "must be > 0");
  require(bench.dense_resolution_m > 0, "bench.dense_resolution_m", "must be > 0");
  require(bench.sparse_resolution_m > 0, "bench.sparse_resolution_m", "must be > 0");
  require(bench.gradient_step_m > 0, "bench.gradient_step_m", "must be > 0");
  require(bench.gradient_max_iters >= 1, "bench.gradient_max_iters", "must be >= 1");
}

inline SimConfig parse_config(const nlohmann::json& root) {
  using namespace config_detail;
  if (!root.is_object()) throw ConfigInvalid("<root>", "must be an object");
  SimConfig c;

  const json& world = section(root, "world");
  read(world, "width_m", "world", c.workspace.width);
  read(world, "height_m", "world", c.workspace.height);
  if (world.contains("ap")) c.ap = read_vec2(world.at("ap"), "world.ap");
  read(world, "seed", "world", c.seed);

  if (root.contains("robots")) {
    const json& rs = root.at("robots");
    if (!rs.is_array()) throw ConfigInvalid("robots", "must be an array");
    c.robots.clear();
    for (std::size_t i = 0; i < rs.size(); ++i) {
      const std::string path = "robots[" + std::to_string(i) + "]";
      const json& r = rs[i];
      if (!r.is_object() || !r.contains("id") || !r.contains("start")) {
        throw ConfigInvalid(path, "expected {id, start: [x, y, theta]}");
      }
      RobotStart s;
      read(r, "id", path, s.id);
      const json& st = r.at("start");
      if (!st.is_array() || st.size() != 3) throw ConfigInvalid(path + ".start", "expected [x, y, theta]");
      try {
        s.start = {st[0].get<double>(), st[1].get<double>(), wrap_angle(st[2].get<double>()), s.id};
      } catch (const json::exception& e) {
        throw ConfigInvalid(path + ".start", e.what());
      }
      c.robots.push_back(s);
    }
  }

  const json& ch = section(root, "channel");
  read(ch, "rssi_d0_dbm", "channel", c.channel.rssi_d0);
  read(ch, "eta", "channel", c.channel.path_loss_exponent);
  read(ch, "shadow_sigma_dbm", "channel", c.channel.shadow_sigma);
  read(ch, "multipath_sigma_dbm", "channel", c.channel.multipath_sigma);

  const json& gp = section(root, "gp");
  read(gp, "initial_samples", "gp", c.gp.initial_samples);
  read(gp, "max_training_points", "gp", c.gp.max_training_points);
  read(gp, "restarts", "gp", c.gp.restarts);
  read(gp, "retrain_every", "gp", c.gp.retrain_every);

  const json& h = section(root, "hierarchy");
  read(h, "resolutions_m", "hierarchy", c.search.hierarchy.resolutions);
  read(h, "grid_points", "hierarchy", c.search.hierarchy.grid_points);
  read(h, "shrink", "hierarchy", c.search.hierarchy.shrink);
  read(h, "uncertainty_expansion", "hierarchy", c.search.hierarchy.uncertainty_expansion);
  read(h, "search_margin_m", "hierarchy", c.search.margin_m);
  if (h.contains("levels")) {
    int levels = 0;
    read(h, "levels", "hierarchy", levels);
    if (levels < 1 || static_cast<std::size_t>(levels) > c.search.hierarchy.resolutions.size()) {
      throw ConfigInvalid("hierarchy.levels", "must be in [1, len(resolutions_m)]");
    }
    c.search.hierarchy.resolutions.resize(static_cast<std::size_t>(levels));
  }

  const json& run = section(root, "run");
  read(run, "iterations", "run", c.run.iterations);
  read(run, "trials", "run", c.run.trials);
  read(run, "dt_s", "run", c.run.dt_s);
  read(run, "randomize_starts", "run", c.run.randomize_starts);
  read(run, "drop_prob", "run", c.run.drop_prob);
  read(run, "max_message_age", "run", c.run.max_message_age);

  const json& ctl = section(root, "controller");
  if (ctl.contains("type")) {
    std::string type;
    read(ctl, "type", "controller", type);
    if (type == "random_walk") {
      c.controller.type = ControllerType::kRandomWalk;
    } else if (type == "rendezvous") {
      c.controller.type = ControllerType::kRendezvous;
    } else {
      throw ConfigInvalid("controller.type", "expected \"random_walk\" or \"rendezvous\"");
    }
  }
  read(ctl, "v_max", "controller", c.controller.v_max);
  read(ctl, "omega_max", "controller", c.controller.omega_max);
  read(ctl, "rendezvous_epsilon_m", "controller", c.controller.rendezvous_epsilon_m);
  read(ctl, "k_c", "controller", c.controller.k_c);
  read(ctl, "k_omega", "controller", c.controller.k_omega);
  read(ctl, "localize_iters", "controller", c.controller.localize_iters);
  read(ctl, "walk_hold", "controller", c.controller.walk_hold);
  if (ctl.contains("localize_motion")) {
    std::string motion;
    read(ctl, "localize_motion", "controller", motion);
    if (motion == "random_walk") {
      c.controller.localize_motion = LocalizeMotion::kRandomWalk;
    } else if (motion == "seek") {
      c.controller.localize_motion = LocalizeMotion::kSeek;
    } else {
      throw ConfigInvalid("controller.localize_motion", "expected \"random_walk\" or \"seek\"");
    }
  }
  read(ctl, "seek_radius_m", "controller", c.controller.seek_radius_m);

  const json& bench = section(root, "bench");
  read(bench, "samples", "bench", c.bench.samples);
  read(bench, "search_half_extent_m", "bench", c.bench.search_half_extent_m);
  read(bench, "dense_resolution_m", "bench", c.bench.dense_resolution_m);
  read(bench, "sparse_resolution_m", "bench", c.bench.sparse_resolution_m);
  read(bench, "gradient_step_m", "bench", c.bench.gradient_step_m);
  read(bench, "gradient_max_iters", "bench", c.bench.gradient_max_iters);
  read(bench, "gradient_min_start_m", "bench", c.bench.gradient_min_start_m);

  c.validate();
  return c;
}

inline SimConfig parse_config_text(const std::string& text) {
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigInvalid("<root>", e.what());
  }
  return parse_config(root);
}

inline SimConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigInvalid("<file>", "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

/// Replaces the robot list with `n` robots (ids 0..n-1, heading 0) spread along a diagonal.
/// With run.randomize_starts the positions are re-drawn per trial anyway.
inline void set_robot_count(SimConfig& c, int n) {
  if (n < 1) throw ConfigInvalid("--robots", "must be >= 1");
  c.robots.clear();
  for (int i = 0; i < n; ++i) {
    const double f = (i + 1.0) / (n + 1.0);
    c.robots.push_back({static_cast<RobotId>(i),
                        {f * c.workspace.width, f * c.workspace.height, 0.0,
                         static_cast<RobotId>(i)}});
  }
}

/// Resizes the world, keeping the AP at the center.
inline void set_world_size(SimConfig& c, double width, double height) {
  const Vec2 old = c.workspace.center();
  const bool ap_centered = (c.ap - old).norm() < 1e-12;
  const double sx = width / c.workspace.width;
  const double sy = height / c.workspace.height;
  c.workspace = {width, height};
  c.ap = ap_centered ? c.workspace.center() : Vec2(c.ap.x() * sx, c.ap.y() * sy);
  for (auto& r : c.robots) {
    r.start.x *= sx;
    r.start.y *= sy;
  }
}

/// Starting poses for one trial: the configured ones, or uniform positions at least 0.3 m
/// from the walls and from each other when run.randomize_starts is set. Headings are kept.
inline std::vector<RobotStart> trial_starts(const SimConfig& c, std::uint64_t trial_seed) {
  if (!c.run.randomize_starts) return c.robots;
  std::mt19937_64 rng(mix_seed(trial_seed, 0xA11CE));
  const double margin = std::min({0.3, c.workspace.width / 4, c.workspace.height / 4});
  std::uniform_real_distribution<double> ux(margin, c.workspace.width - margin);
  std::uniform_real_distribution<double> uy(margin, c.workspace.height - margin);
  std::vector<RobotStart> out;
  for (const auto& r : c.robots) {
    RobotStart s = r;
    for (int attempt = 0; attempt < 1000; ++attempt) {
      s.start.x = ux(rng);
      s.start.y = uy(rng);
      const bool clear = std::all_of(out.begin(), out.end(), [&](const RobotStart& o) {
        return (o.start.position() - s.start.position()).norm() >= 0.3;
      });
      if (clear) break;
    }
    out.push_back(s);
  }
  return out;
}

}  // namespace hgprl
