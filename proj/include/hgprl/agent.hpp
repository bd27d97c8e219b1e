#pragma once

// Per-robot agent: sample -> (re)train GP -> hierarchical AP search -> relative localization
// of peers -> control. Agents see only their own odometry, their own RSSI readings and the
// messages in their inbox; this header deliberately does not depend on the simulated world.

#include <chrono>
#include <deque>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "hgprl/ap_search.hpp"
#include "hgprl/common.hpp"
#include "hgprl/gp.hpp"
#include "hgprl/rel_loc.hpp"
#include "hgprl/kinematics.hpp"

namespace hgprl {

enum class Phase { kRandomWalk, kLocalize, kRendezvous };

/// Motion while localizing: keep random-walking, or head for the current AP estimate and
/// random-walk once within `seek_radius_m` of it.
enum class LocalizeMotion { kRandomWalk, kSeek };

inline const char* phase_name(Phase p) {
  switch (p) {
    case Phase::kRandomWalk:
      return "random_walk";
    case Phase::kLocalize:
      return "localize";
    case Phase::kRendezvous:
      return "rendezvous";
  }
  return "?";
}

/// What the agent senses in one tick.
struct SensorReading {
  Pose2D odometry;  // own frame
  double rssi;      // dBm
};

struct AgentConfig {
  RobotId id = 0;
  /// World headings of every robot's initial pose (the known-initial-orientation assumption).
  std::map<RobotId, double> initial_headings;
  int initial_samples = 10;
  std::size_t max_training_points = 100;
  int restarts = 5;
  int retrain_every = 10;
  std::uint64_t seed = 0;
  HierarchyConfig hierarchy{};
  double search_margin_m = 0.25;
  bool rendezvous = false;
  int localize_iters = 230;
  LocalizeMotion localize_motion = LocalizeMotion::kRandomWalk;
  double seek_radius_m = 0.5;
  double k_c = 1.0;
  double k_omega = 2.0;
  UnicycleLimits limits{};
  std::uint32_t max_message_age = 5;
};

struct Command {
  enum class Kind { kRandomWalk, kTwist };
  Kind kind = Kind::kRandomWalk;
  Twist twist;
  Vec2 desired_velocity = Vec2::Zero();  // local frame, set in rendezvous
};

struct TickStats {
  double train_ms = 0.0;
  double infer_ms = 0.0;
  std::size_t mean_evaluations = 0;
  bool retrained = false;
};

struct TickOutput {
  Command command;
  std::optional<PeerMessage> outbox;  // empty while not yet localized
  TickStats stats;
};

/// k_c (centroid of {self} u neighbors - self), clamped to `v_max`. Zero without neighbors.
inline Vec2 rendezvous_controller(const Vec2& self, std::span<const NeighborEstimate> neighbors,
                                  double k_c = 1.0, double v_max = 0.2) {
  if (neighbors.empty()) return Vec2::Zero();
  Vec2 sum = self;
  for (const auto& n : neighbors) sum += n.position;
  const Vec2 centroid = sum / static_cast<double>(neighbors.size() + 1);
  Vec2 u = k_c * (centroid - self);
  const double speed = u.norm();
  if (speed > v_max) u *= v_max / speed;
  return u;
}

class Agent {
 public:
  struct Neighbor {
    PeerMessage message;
    std::optional<NeighborEstimate> estimate;
  };

  explicit Agent(AgentConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.hierarchy.validate();
    if (cfg_.initial_samples < 2) throw InvalidArgument("initial_samples must be >= 2");
  }

  TickOutput tick(const SensorReading& reading, std::span<const PeerMessage> inbox) {
    using Clock = std::chrono::steady_clock;
    TickOutput out;
    const std::uint32_t now = iteration_;
    odometry_ = reading.odometry;

    samples_.push_back({reading.odometry.position(), reading.rssi});
    while (samples_.size() > sample_capacity()) samples_.pop_front();

    // The model and AP estimate are frozen once rendezvous starts: samples taken while the
    // swarm gathers are clustered and would only degrade the fit.
    const bool frozen = phase_ == Phase::kRendezvous;
    if (!frozen && static_cast<int>(samples_.size()) >= cfg_.initial_samples &&
        (!model_ || now - last_train_ >= static_cast<std::uint32_t>(cfg_.retrain_every))) {
      const auto t0 = Clock::now();
      if (retrain(now)) out.stats.retrained = true;
      out.stats.train_ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
    }

    if (model_ && !frozen) {
      const auto t0 = Clock::now();
      ap_ = hierarchical_search(*model_, search_region(), cfg_.hierarchy);
      out.stats.infer_ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
      out.stats.mean_evaluations = ap_->mean_evaluations;
      if (phase_ == Phase::kRandomWalk) {
        phase_ = Phase::kLocalize;
        localized_at_ = now;
      }
    }
    if (phase_ == Phase::kLocalize && cfg_.rendezvous &&
        now - localized_at_ >= static_cast<std::uint32_t>(cfg_.localize_iters)) {
      phase_ = Phase::kRendezvous;
    }

    std::vector<PeerMessage> sorted(inbox.begin(), inbox.end());
    std::sort(sorted.begin(), sorted.end(),
              [](const PeerMessage& a, const PeerMessage& b) { return a.sender < b.sender; });
    for (const auto& m : sorted) {
      if (m.sender == cfg_.id) continue;
      const auto [it, inserted] = neighbors_.try_emplace(m.sender, Neighbor{m, std::nullopt});
      if (!inserted && m.seq >= it->second.message.seq) it->second.message = m;
    }
    refresh_neighbor_estimates(now);

    if (phase_ == Phase::kLocalize && cfg_.localize_motion == LocalizeMotion::kSeek && ap_) {
      const Vec2 to_ap = ap_->position - odometry_.position();
      if (to_ap.norm() > cfg_.seek_radius_m) {
        const Vec2 u = to_ap.normalized() * cfg_.limits.v_max;
        out.command.kind = Command::Kind::kTwist;
        out.command.desired_velocity = u;
        out.command.twist = si_to_unicycle(u, odometry_, cfg_.limits, cfg_.k_omega);
      }
    }
    if (phase_ == Phase::kRendezvous) {
      const auto est = neighbor_estimates();
      const Vec2 u = rendezvous_controller(odometry_.position(), est, cfg_.k_c, cfg_.limits.v_max);
      out.command.kind = Command::Kind::kTwist;
      out.command.desired_velocity = u;
      out.command.twist = si_to_unicycle(u, odometry_, cfg_.limits, cfg_.k_omega);
    }

    if (ap_) {
      PeerMessage msg;
      msg.sender = cfg_.id;
      msg.seq = now;
      msg.odometry = odometry_;
      msg.odometry.frame = cfg_.id;
      msg.ap_estimate.position = ap_->position;
      msg.ap_estimate.variance = ap_->variance;
      out.outbox = msg;
    }
    ++iteration_;
    return out;
  }

  RobotId id() const noexcept { return cfg_.id; }
  Phase phase() const noexcept { return phase_; }
  const std::optional<ApEstimate>& ap_estimate() const noexcept { return ap_; }
  const std::optional<TrainedGp>& model() const noexcept { return model_; }
  const std::map<RobotId, Neighbor>& neighbors() const noexcept { return neighbors_; }
  std::size_t sample_count() const noexcept { return samples_.size(); }
  std::size_t sample_capacity() const noexcept { return cfg_.max_training_points * 4; }
  const AgentConfig& config() const noexcept { return cfg_; }

  std::vector<NeighborEstimate> neighbor_estimates() const {
    std::vector<NeighborEstimate> out;
    for (const auto& [id, n] : neighbors_) {
      if (n.estimate) out.push_back(*n.estimate);
    }
    return out;
  }

  /// Search box: bounding box of the agent's samples plus a margin, at least as large as
  /// the level-1 grid (G r_1) on each axis.
  SearchRegion search_region() const {
    Vec2 lo = samples_.front().position;
    Vec2 hi = lo;
    for (const auto& s : samples_) {
      lo = lo.cwiseMin(s.position);
      hi = hi.cwiseMax(s.position);
    }
    SearchRegion r = SearchRegion::from_bounds(lo, hi);
    const double min_half = cfg_.hierarchy.resolutions.front() * cfg_.hierarchy.grid_points / 2.0;
    for (int d = 0; d < 2; ++d) {
      r.half_extent[d] = std::max(r.half_extent[d] + cfg_.search_margin_m, min_half);
    }
    return r;
  }

 private:
  bool retrain(std::uint32_t now) {
    FitBudget budget;
    budget.max_training_points = cfg_.max_training_points;
    budget.restarts = cfg_.restarts;
    budget.seed = mix_seed(cfg_.seed, now);
    if (model_) budget.warm_start = model_->hyperparams();
    std::vector<RssiSample> data(samples_.begin(), samples_.end());
    try {
      model_ = fit(data, budget);
    } catch (const DegenerateData&) {
      return false;  // robot has not moved yet; try again next tick
    } catch (const FactorizationFailure&) {
      return false;
    }
    last_train_ = now;
    return true;
  }

  void refresh_neighbor_estimates(std::uint32_t now) {
    if (!ap_) return;
    const double own = cfg_.initial_headings.count(cfg_.id) ? cfg_.initial_headings.at(cfg_.id) : 0.0;
    for (auto& [id, n] : neighbors_) {
      const auto it = cfg_.initial_headings.find(id);
      const double theirs = it != cfg_.initial_headings.end() ? it->second : 0.0;
      const std::uint32_t age = now >= n.message.seq ? now - n.message.seq : 0;
      n.estimate = relative_position(*ap_, n.message, rotation_between(own, theirs), age,
                                     cfg_.max_message_age);
    }
  }

  AgentConfig cfg_;
  std::deque<RssiSample> samples_;
  std::optional<TrainedGp> model_;
  std::optional<ApEstimate> ap_;
  std::map<RobotId, Neighbor> neighbors_;
  Pose2D odometry_;
  Phase phase_ = Phase::kRandomWalk;
  std::uint32_t iteration_ = 0;
  std::uint32_t last_train_ = 0;
  std::uint32_t localized_at_ = 0;
};

}  // namespace hgprl
