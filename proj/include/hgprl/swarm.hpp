#pragma once

// Simulation harness: owns the ground-truth world, runs the agents tick by tick, carries
// their messages over a simulated broadcast bus, and scores them against ground truth.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <vector>

#include "hgprl/agent.hpp"
#include "hgprl/config.hpp"
#include "hgprl/csv.hpp"
#include "hgprl/rel_loc.hpp"
#include "hgprl/sim_world.hpp"

namespace hgprl {

/// Synchronous broadcast: every message sent in tick t is delivered to all other robots at
/// tick t + 1, in wire form, unless dropped with probability `drop_prob`.
class MessageBus {
 public:
  MessageBus(double drop_prob, std::uint64_t seed) : drop_prob_(drop_prob), rng_(seed) {}

  /// Returns bytes transmitted (one broadcast per message).
  std::size_t broadcast(const PeerMessage& m) {
    pending_.push_back(wire::encode(m));
    return wire::kPeerMessageSize;
  }

  /// Moves pending messages into per-recipient inboxes sorted by sender id.
  std::map<RobotId, std::vector<PeerMessage>> deliver(const std::vector<RobotId>& recipients) {
    std::vector<PeerMessage> decoded;
    for (const auto& buf : pending_) decoded.push_back(wire::decode(buf));
    pending_.clear();
    std::sort(decoded.begin(), decoded.end(),
              [](const PeerMessage& a, const PeerMessage& b) { return a.sender < b.sender; });
    std::map<RobotId, std::vector<PeerMessage>> inboxes;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (const RobotId r : recipients) {
      auto& box = inboxes[r];
      for (const auto& m : decoded) {
        if (m.sender == r) continue;
        if (drop_prob_ > 0.0 && u(rng_) < drop_prob_) continue;
        box.push_back(m);
      }
    }
    return inboxes;
  }

 private:
  double drop_prob_;
  std::mt19937_64 rng_;
  std::vector<wire::Buffer> pending_;
};

struct MetricsRow {
  int trial = 0;
  int iter = 0;
  RobotId robot = 0;
  std::optional<double> ale_m;
  std::optional<double> rmse_m;
  double train_ms = 0.0;
  double infer_ms = 0.0;
  std::size_t mean_evals = 0;
  std::size_t bytes_tx = 0;
  Phase phase = Phase::kRandomWalk;
};

struct TrajectoryRow {
  int trial = 0;
  int iter = 0;
  RobotId robot = 0;
  Pose2D pose;  // world frame
};

struct TrialSummary {
  int trial = 0;
  std::size_t robots = 0;
  double width_m = 0.0;
  double height_m = 0.0;
  double shadow_sigma = 0.0;
  double rmse_m = NAN;      // RMS over (iteration, robot, neighbor) estimates in the second half
  double rmse_all_m = NAN;  // same, over every iteration
  double ale_m = NAN;   // mean over every (iteration, robot) AP estimate
  double final_ale_m = NAN;
  std::size_t bytes_per_message = 0;
  double iter_ms = 0.0;  // mean wall time of one full swarm tick
  double final_max_pairwise_m = 0.0;
  std::optional<int> converge_iter;  // first iteration from which max pairwise <= epsilon
  bool rendezvous_success = false;
  double wall_s = 0.0;
  std::size_t truth_violations = 0;
};

/// Final GP field of one robot on each hierarchy level's grid, in world coordinates.
struct FieldDump {
  RobotId robot = 0;
  std::vector<std::vector<FieldPoint>> levels;
};

struct TrialOptions {
  bool dump_fields = false;
};

struct TrialResult {
  std::vector<MetricsRow> metrics;
  std::vector<TrajectoryRow> trajectories;
  TrialSummary summary;
  std::vector<FieldDump> fields;  // filled when TrialOptions::dump_fields is set
};

inline double max_pairwise_distance(const std::vector<Vec2>& pts) {
  double d = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j) d = std::max(d, (pts[i] - pts[j]).norm());
  return d;
}

/// Runs one seeded trial. Deterministic in (config, trial) apart from timing fields.
inline TrialResult run_trial(const SimConfig& cfg, int trial, const TrialOptions& options = {}) {
  using Clock = std::chrono::steady_clock;
  cfg.validate();
  const auto wall_start = Clock::now();
  const std::uint64_t trial_seed = mix_seed(cfg.seed, static_cast<std::uint64_t>(trial));

  WorldConfig wc;
  wc.workspace = cfg.workspace;
  wc.ap_position = cfg.ap;
  wc.robots = trial_starts(cfg, trial_seed);
  wc.seed = trial_seed;
  wc.channel = cfg.channel;
  wc.limits = {cfg.controller.v_max, cfg.controller.omega_max};
  wc.walk.hold_steps = cfg.controller.walk_hold;
  wc.walk.dt = cfg.run.dt_s;
  World world(wc);

  std::map<RobotId, double> headings;
  for (const auto& r : wc.robots) headings[r.id] = r.start.theta;

  std::vector<Agent> agents;
  for (const auto& r : wc.robots) {
    AgentConfig ac;
    ac.id = r.id;
    ac.initial_headings = headings;
    ac.initial_samples = cfg.gp.initial_samples;
    ac.max_training_points = cfg.gp.max_training_points;
    ac.restarts = cfg.gp.restarts;
    ac.retrain_every = cfg.gp.retrain_every;
    ac.seed = mix_seed(trial_seed, 1000 + r.id);
    ac.hierarchy = cfg.search.hierarchy;
    ac.search_margin_m = cfg.search.margin_m;
    ac.rendezvous = cfg.controller.type == ControllerType::kRendezvous;
    ac.localize_iters = cfg.controller.localize_iters;
    ac.localize_motion = cfg.controller.localize_motion;
    ac.seek_radius_m = cfg.controller.seek_radius_m;
    ac.k_c = cfg.controller.k_c;
    ac.k_omega = cfg.controller.k_omega;
    ac.limits = wc.limits;
    ac.max_message_age = cfg.run.max_message_age;
    agents.emplace_back(ac);
  }

  MessageBus bus(cfg.run.drop_prob, mix_seed(trial_seed, 77));
  std::map<RobotId, std::vector<PeerMessage>> inboxes;
  const std::vector<RobotId> ids = world.robot_ids();
  std::map<RobotId, Pose2D> origins;
  for (const RobotId id : ids) origins[id] = world.origin(id);
  const Vec2 ap_true = world.ap_position();

  TrialResult result;
  auto& s = result.summary;
  s.trial = trial;
  s.robots = ids.size();
  s.width_m = cfg.workspace.width;
  s.height_m = cfg.workspace.height;
  s.shadow_sigma = cfg.channel.shadow_sigma;

  // history[t][id]: true world pose at the start of tick t (= pose carried by message seq t).
  std::vector<std::map<RobotId, Pose2D>> history;
  double sq_err_sum = 0.0;
  std::size_t err_count = 0;
  double sq_err_steady = 0.0;
  std::size_t err_count_steady = 0;
  const int steady_from = cfg.run.iterations / 2;
  double ale_sum = 0.0;
  std::size_t ale_count = 0;
  double tick_ms_sum = 0.0;

  for (int t = 0; t < cfg.run.iterations; ++t) {
    const auto tick_start = Clock::now();
    std::map<RobotId, SensorReading> readings;
    auto& truth = history.emplace_back();
    for (const RobotId id : ids) {
      readings[id] = {world.odometry(id), world.sample_rssi(id)};
      truth[id] = world.true_pose(id);
      result.trajectories.push_back({trial, t, id, truth[id]});
    }

    std::vector<TickOutput> outputs;
    world.set_agents_running(true);
    for (auto& a : agents) outputs.push_back(a.tick(readings[a.id()], inboxes[a.id()]));
    world.set_agents_running(false);

    std::vector<std::size_t> bytes(agents.size(), 0);
    for (std::size_t k = 0; k < agents.size(); ++k) {
      if (outputs[k].outbox) bytes[k] = bus.broadcast(*outputs[k].outbox);
    }
    inboxes = bus.deliver(ids);

    for (std::size_t k = 0; k < agents.size(); ++k) {
      const RobotId id = agents[k].id();
      const Command& c = outputs[k].command;
      world.apply(id, c.kind == Command::Kind::kRandomWalk ? world.random_walk(id) : c.twist,
                  cfg.run.dt_s);
    }
    tick_ms_sum += std::chrono::duration<double, std::milli>(Clock::now() - tick_start).count();

    // Scoring (harness only).
    for (std::size_t k = 0; k < agents.size(); ++k) {
      const Agent& a = agents[k];
      MetricsRow row;
      row.trial = trial;
      row.iter = t;
      row.robot = a.id();
      row.train_ms = outputs[k].stats.train_ms;
      row.infer_ms = outputs[k].stats.infer_ms;
      row.mean_evals = outputs[k].stats.mean_evaluations;
      row.bytes_tx = bytes[k];
      row.phase = a.phase();
      if (a.ap_estimate()) {
        const Vec2 est_world = local_to_world(a.ap_estimate()->position, origins[a.id()]);
        row.ale_m = (est_world - ap_true).norm();
        ale_sum += *row.ale_m;
        ++ale_count;
      }
      double se = 0.0;
      std::size_t n = 0;
      for (const auto& est : a.neighbor_estimates()) {
        const auto& seq = a.neighbors().at(est.neighbor).message.seq;
        const Vec2 true_local =
            world_to_local(history.at(seq).at(est.neighbor).position(), origins[a.id()]);
        se += (est.position - true_local).squaredNorm();
        ++n;
      }
      if (n > 0) {
        row.rmse_m = std::sqrt(se / static_cast<double>(n));
        sq_err_sum += se;
        err_count += n;
        if (t >= steady_from) {
          sq_err_steady += se;
          err_count_steady += n;
        }
      }
      result.metrics.push_back(row);
    }
  }

  std::vector<Vec2> final_positions;
  for (const RobotId id : ids) final_positions.push_back(world.true_pose(id).position());
  s.final_max_pairwise_m = max_pairwise_distance(final_positions);
  s.rendezvous_success = s.final_max_pairwise_m <= cfg.controller.rendezvous_epsilon_m;
  // Convergence: earliest tick after which every later start-of-tick configuration (and the
  // final one) stays within epsilon.
  if (s.rendezvous_success) {
    int first = cfg.run.iterations;
    for (int t = cfg.run.iterations - 1; t >= 0; --t) {
      std::vector<Vec2> pts;
      for (const auto& [id, p] : history[static_cast<std::size_t>(t)]) pts.push_back(p.position());
      if (max_pairwise_distance(pts) > cfg.controller.rendezvous_epsilon_m) break;
      first = t;
    }
    s.converge_iter = first;
  }
  s.rmse_m = err_count_steady ? std::sqrt(sq_err_steady / static_cast<double>(err_count_steady)) : NAN;
  s.rmse_all_m = err_count ? std::sqrt(sq_err_sum / static_cast<double>(err_count)) : NAN;
  s.ale_m = ale_count ? ale_sum / static_cast<double>(ale_count) : NAN;
  double final_ale = 0.0;
  std::size_t final_n = 0;
  for (const auto& a : agents) {
    if (!a.ap_estimate()) continue;
    final_ale += (local_to_world(a.ap_estimate()->position, origins[a.id()]) - ap_true).norm();
    ++final_n;
  }
  s.final_ale_m = final_n ? final_ale / static_cast<double>(final_n) : NAN;
  if (options.dump_fields) {
    for (const auto& a : agents) {
      if (!a.model() || !a.ap_estimate()) continue;
      FieldDump dump{a.id(), {}};
      for (const auto& level : a.ap_estimate()->level_trace) {
        auto pts = level_field(*a.model(), level);
        for (auto& p : pts) {
          const Vec2 w = local_to_world(Vec2(p.x, p.y), origins[a.id()]);
          p.x = w.x();
          p.y = w.y();
        }
        dump.levels.push_back(std::move(pts));
      }
      result.fields.push_back(std::move(dump));
    }
  }
  s.bytes_per_message = wire::kPeerMessageSize;
  s.iter_ms = tick_ms_sum / cfg.run.iterations;
  s.truth_violations = world.truth_violations();
  s.wall_s = std::chrono::duration<double>(Clock::now() - wall_start).count();
  return result;
}

inline const char* kMetricsHeader = "trial,iter,robot,ale_m,rmse_m,train_ms,infer_ms,mean_evals,bytes_tx,phase";

/// Timing columns are written as NA unless `timing` is set, so that files are reproducible.
inline void write_metrics(std::ostream& out, const std::vector<MetricsRow>& rows, bool timing,
                          bool header = true) {
  if (header) out << kMetricsHeader << '\n';
  for (const auto& r : rows) {
    csv::row(out, {std::to_string(r.trial), std::to_string(r.iter), std::to_string(r.robot),
                   csv::num(r.ale_m), csv::num(r.rmse_m), timing ? csv::num(r.train_ms, 3) : "NA",
                   timing ? csv::num(r.infer_ms, 3) : "NA", std::to_string(r.mean_evals),
                   std::to_string(r.bytes_tx), phase_name(r.phase)});
  }
}

inline const char* kTrajectoriesHeader = "trial,iter,robot,x_m,y_m,theta_rad";

inline void write_trajectories(std::ostream& out, const std::vector<TrajectoryRow>& rows,
                               bool header = true) {
  if (header) out << kTrajectoriesHeader << '\n';
  for (const auto& r : rows) {
    csv::row(out, {std::to_string(r.trial), std::to_string(r.iter), std::to_string(r.robot),
                   csv::num(r.pose.x), csv::num(r.pose.y), csv::num(r.pose.theta)});
  }
}

}  // namespace hgprl
