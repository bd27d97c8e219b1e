#pragma once

// Unicycle command types and the single-integrator to unicycle mapping.

#include <algorithm>

#include "hgprl/common.hpp"
#include "hgprl/rel_loc.hpp"

namespace hgprl {

struct UnicycleLimits {
  double v_max = 0.2;      // m/s
  double omega_max = 2.0;  // rad/s
};

struct Twist {
  double v = 0.0;
  double omega = 0.0;
};

/// Maps a desired planar velocity to (v, omega): v = |u| cos(delta) clamped to [0, v_max],
/// omega = k_omega delta clamped to +/- omega_max, delta = heading error.
inline Twist si_to_unicycle(const Vec2& desired_velocity, const Pose2D& pose,
                            const UnicycleLimits& limits, double k_omega = 2.0) {
  const double speed = desired_velocity.norm();
  if (speed == 0.0) {
    return {};
  }
  const double delta =
      wrap_angle(std::atan2(desired_velocity.y(), desired_velocity.x()) - pose.theta);
  return {std::clamp(speed * std::cos(delta), 0.0, limits.v_max),
          std::clamp(k_omega * delta, -limits.omega_max, limits.omega_max)};
}

}  // namespace hgprl
