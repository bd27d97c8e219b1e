#pragma once

// Ground-truth world for the simulator: log-distance RSSI channel with Gaussian shadowing
// and multipath terms, unicycle kinematics inside a rectangular workspace, and seeded
// per-robot random streams.

#include <algorithm>
#include <cstdint>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <set>
#include <utility>
#include <vector>

#include "hgprl/common.hpp"
#include "hgprl/kinematics.hpp"
#include "hgprl/rel_loc.hpp"

namespace hgprl {

struct ChannelParams {
  double rssi_d0 = -20.0;  // dBm at the reference distance
  double path_loss_exponent = 3.0;
  double shadow_sigma = 2.0;     // dBm
  double multipath_sigma = 2.0;  // dBm
  double min_distance = 0.01;    // m

  void validate() const {
    if (!(path_loss_exponent > 0.0) || !(shadow_sigma >= 0.0) || !(multipath_sigma >= 0.0) ||
        !(min_distance > 0.0) || !std::isfinite(rssi_d0)) {
      throw InvalidArgument("ChannelParams: need eta > 0, sigmas >= 0, min_distance > 0");
    }
  }
};

/// Noise-free received power at distance d.
inline double mean_rssi(const ChannelParams& ch, double distance) {
  return ch.rssi_d0 - 10.0 * ch.path_loss_exponent * std::log10(std::max(distance, ch.min_distance));
}

/// Draws exactly two standard normals from `normal` (shadowing, then multipath).
template <typename Engine>
double sample_rssi(const ChannelParams& ch, double distance, Engine& eng,
                   std::normal_distribution<double>& normal) {
  const double shadow = normal(eng) * ch.shadow_sigma;
  const double multipath = normal(eng) * ch.multipath_sigma;
  return mean_rssi(ch, distance) - shadow - multipath;
}

struct UnicycleState {
  Pose2D pose;  // world frame
  double v = 0.0;
  double omega = 0.0;
  UnicycleLimits limits;
};

/// Rectangle [0, width] x [0, height].
struct Workspace {
  double width = 3.2;
  double height = 2.0;

  bool contains(const Vec2& p) const {
    return p.x() >= 0.0 && p.x() <= width && p.y() >= 0.0 && p.y() <= height;
  }
  Vec2 center() const { return {width / 2.0, height / 2.0}; }
};

/// Euler step of the unicycle. Commands are clamped to the limits; a pose that would leave
/// the workspace is clamped onto the wall and the velocity zeroed.
inline UnicycleState step_unicycle(UnicycleState s, double dt, const Workspace& ws) {
  if (!(dt > 0.0)) {
    throw InvalidArgument("step_unicycle: dt must be > 0");
  }
  s.v = std::clamp(s.v, -s.limits.v_max, s.limits.v_max);
  s.omega = std::clamp(s.omega, -s.limits.omega_max, s.limits.omega_max);
  s.pose.x += s.v * std::cos(s.pose.theta) * dt;
  s.pose.y += s.v * std::sin(s.pose.theta) * dt;
  s.pose.theta = wrap_angle(s.pose.theta + s.omega * dt);
  const double cx = std::clamp(s.pose.x, 0.0, ws.width);
  const double cy = std::clamp(s.pose.y, 0.0, ws.height);
  if (cx != s.pose.x || cy != s.pose.y) {
    s.pose.x = cx;
    s.pose.y = cy;
    s.v = 0.0;
  }
  return s;
}

struct RandomWalkParams {
  int hold_steps = 10;          // re-sample the twist every this many steps
  double wall_margin = 0.15;    // m
  double turn_fraction = 0.2;   // random omega ~ U(-f, f) * omega_max
  double wall_spread = std::numbers::pi / 3.0;  // new heading within +/- this of the inward normal
  double dt = 0.2;  // control period, s; caps in-place turns so they do not overshoot
};

/// Memory of the random walk between calls.
struct RandomWalkState {
  int steps_left = 0;
  Twist current;
  std::optional<double> turn_target;  // heading being turned to after a wall contact
};

/// Seeded bounded random twist, held for `hold_steps` steps. Within `wall_margin` of a wall
/// while heading outward, the robot stops and turns in place to a random heading within
/// `wall_spread` of the inward normal, then resumes the walk.
template <typename Engine>
Twist random_walk_controller(const UnicycleState& s, const Workspace& ws, RandomWalkState& walk,
                             Engine& eng, const RandomWalkParams& params = {}) {
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const Vec2 p = s.pose.position();
  const Vec2 heading(std::cos(s.pose.theta), std::sin(s.pose.theta));
  Vec2 inward = Vec2::Zero();
  if (p.x() < params.wall_margin) inward.x() += 1.0;
  if (p.x() > ws.width - params.wall_margin) inward.x() -= 1.0;
  if (p.y() < params.wall_margin) inward.y() += 1.0;
  if (p.y() > ws.height - params.wall_margin) inward.y() -= 1.0;
  if (!walk.turn_target && !inward.isZero() && heading.dot(inward) <= 0.0) {
    walk.turn_target =
        wrap_angle(std::atan2(inward.y(), inward.x()) + params.wall_spread * unit(eng));
  }
  if (walk.turn_target) {
    const double delta = wrap_angle(*walk.turn_target - s.pose.theta);
    if (std::abs(delta) > 0.1) {
      const double rate = std::min(s.limits.omega_max, std::abs(delta) / params.dt);
      return {0.0, delta > 0.0 ? rate : -rate};
    }
    walk.turn_target.reset();
    walk.steps_left = 0;
  }
  if (walk.steps_left <= 0) {
    const double a = unit(eng);
    const double b = unit(eng);
    walk.current.v = s.limits.v_max * (0.875 + 0.125 * a);
    walk.current.omega = s.limits.omega_max * params.turn_fraction * b;
    walk.steps_left = params.hold_steps;
  }
  --walk.steps_left;
  return walk.current;
}

/// Local frame of a robot = its initial world pose.
inline Vec2 world_to_local(const Vec2& world_point, const Pose2D& origin) {
  return rotation(-origin.theta) * (world_point - origin.position());
}

inline Vec2 local_to_world(const Vec2& local_point, const Pose2D& origin) {
  return origin.position() + rotation(origin.theta) * local_point;
}

inline Pose2D world_to_local(const Pose2D& world_pose, const Pose2D& origin) {
  const Vec2 p = world_to_local(world_pose.position(), origin);
  return {p.x(), p.y(), wrap_angle(world_pose.theta - origin.theta), origin.frame};
}

struct RobotStart {
  RobotId id = 0;
  Pose2D start;  // world frame
};

struct WorldConfig {
  Workspace workspace{};
  Vec2 ap_position{1.6, 1.0};  // world frame
  std::vector<RobotStart> robots;
  std::uint64_t seed = 0;
  ChannelParams channel{};
  UnicycleLimits limits{};
  RandomWalkParams walk{};

  void validate() const {
    channel.validate();
    if (!(workspace.width > 0.0) || !(workspace.height > 0.0)) {
      throw InvalidArgument("WorldConfig: workspace must have positive size");
    }
    if (!workspace.contains(ap_position)) {
      throw InvalidArgument("WorldConfig: AP outside the workspace");
    }
    std::set<RobotId> ids;
    for (const auto& r : robots) {
      if (!ids.insert(r.id).second) {
        throw InvalidArgument("WorldConfig: duplicate robot id " + std::to_string(r.id));
      }
      if (!workspace.contains(r.start.position())) {
        throw InvalidArgument("WorldConfig: robot " + std::to_string(r.id) + " starts outside");
      }
    }
  }
};

/// Ground truth plus per-robot random streams. Each robot owns two independent streams
/// (channel noise, random-walk motion) derived from (seed, id), so adding robots or changing
/// noise levels leaves other streams untouched.
class World {
 public:
  struct Robot {
    RobotId id;
    Pose2D origin;  // initial world pose = local frame
    UnicycleState state;
    RandomWalkState walk;
    std::mt19937_64 noise_rng;
    std::normal_distribution<double> normal{0.0, 1.0};
    std::mt19937_64 walk_rng;
  };

  explicit World(WorldConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    for (const auto& r : cfg_.robots) {
      Robot robot{r.id,
                  r.start,
                  UnicycleState{r.start, 0.0, 0.0, cfg_.limits},
                  {},
                  std::mt19937_64(mix_seed(cfg_.seed, 2ULL * r.id)),
                  std::normal_distribution<double>(0.0, 1.0),
                  std::mt19937_64(mix_seed(cfg_.seed, 2ULL * r.id + 1))};
      robot.origin.frame = r.id;
      robot.state.pose.frame = r.id;
      robots_.emplace(r.id, std::move(robot));
    }
  }

  const WorldConfig& config() const noexcept { return cfg_; }
  const Workspace& workspace() const noexcept { return cfg_.workspace; }

  std::vector<RobotId> robot_ids() const {
    std::vector<RobotId> ids;
    for (const auto& [id, r] : robots_) ids.push_back(id);
    return ids;
  }

  /// Noisy RSSI at the robot's current true position.
  double sample_rssi(RobotId id) {
    auto& r = robot(id);
    const double d = (r.state.pose.position() - cfg_.ap_position).norm();
    return hgprl::sample_rssi(cfg_.channel, d, r.noise_rng, r.normal);
  }

  /// Odometry: current pose in the robot's own frame (exact).
  Pose2D odometry(RobotId id) const {
    const auto& r = robot(id);
    return world_to_local(r.state.pose, r.origin);
  }

  Twist random_walk(RobotId id) {
    auto& r = robot(id);
    return random_walk_controller(r.state, cfg_.workspace, r.walk, r.walk_rng, cfg_.walk);
  }

  void apply(RobotId id, const Twist& cmd, double dt) {
    auto& r = robot(id);
    r.state.v = cmd.v;
    r.state.omega = cmd.omega;
    r.state = step_unicycle(r.state, dt, cfg_.workspace);
  }

  // Ground truth. Reads made while `agents_running()` is set count as audit violations.
  Pose2D true_pose(RobotId id) const {
    note_truth_access();
    return robot(id).state.pose;
  }
  Pose2D origin(RobotId id) const {
    note_truth_access();
    return robot(id).origin;
  }
  Vec2 ap_position() const {
    note_truth_access();
    return cfg_.ap_position;
  }

  void set_agents_running(bool on) noexcept { agents_running_ = on; }
  bool agents_running() const noexcept { return agents_running_; }
  std::size_t truth_violations() const noexcept { return truth_violations_; }

 private:
  Robot& robot(RobotId id) {
    auto it = robots_.find(id);
    if (it == robots_.end()) throw InvalidArgument("unknown robot " + std::to_string(id));
    return it->second;
  }
  const Robot& robot(RobotId id) const {
    auto it = robots_.find(id);
    if (it == robots_.end()) throw InvalidArgument("unknown robot " + std::to_string(id));
    return it->second;
  }
  void note_truth_access() const {
    if (agents_running_) ++truth_violations_;
  }

  WorldConfig cfg_;
  std::map<RobotId, Robot> robots_;
  bool agents_running_ = false;
  mutable std::size_t truth_violations_ = 0;
};

}  // namespace hgprl
