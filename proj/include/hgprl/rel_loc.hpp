#pragma once

// AP-anchored relative localization: each robot shares its odometry and its AP estimate,
// and neighbors re-anchor that offset at their own AP estimate.

#include <algorithm>
#include <array>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <limits>
#include <span>

#include "hgprl/ap_search.hpp"
#include "hgprl/common.hpp"

namespace hgprl {

using RobotId = std::uint16_t;

struct Pose2D {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;  // radians, (-pi, pi]
  RobotId frame = 0;   // whose frame the pose is expressed in

  Vec2 position() const { return {x, y}; }
};

inline Mat2 rotation(double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  Mat2 r;
  r << c, -s, s, c;
  return r;
}

/// Rotation taking vectors expressed in robot j's frame into robot i's frame, where the
/// headings are the world orientations of each robot's initial pose (its frame origin).
inline Mat2 rotation_between(double initial_heading_i, double initial_heading_j) {
  return rotation(initial_heading_j - initial_heading_i);
}

struct PeerMessage {
  RobotId sender = 0;
  std::uint32_t seq = 0;
  Pose2D odometry;         // sender's frame
  ApEstimate ap_estimate;  // sender's frame; only position and variance travel on the wire
};

struct NeighborEstimate {
  RobotId neighbor = 0;
  Vec2 position = Vec2::Zero();  // in the receiver's frame
  double combined_variance = 0.0;
  std::uint32_t age = 0;  // iterations since the message was sent
  bool stale = false;
};

/// p_j in frame i = p_AP(i) + R (p_j(j) - p_AP(j)). The estimate is returned even when the
/// message is older than `max_age`; `stale` flags it.
inline NeighborEstimate relative_position(const ApEstimate& ap_i, const PeerMessage& msg_j,
                                          const Mat2& r, std::uint32_t age = 0,
                                          std::uint32_t max_age =
                                              std::numeric_limits<std::uint32_t>::max()) {
  NeighborEstimate out;
  out.neighbor = msg_j.sender;
  out.position = ap_i.position + r * (msg_j.odometry.position() - msg_j.ap_estimate.position);
  out.combined_variance = ap_i.variance + msg_j.ap_estimate.variance;
  out.age = age;
  out.stale = age > max_age;
  return out;
}

namespace wire {

inline constexpr std::size_t kPeerMessageSize = 54;
using Buffer = std::array<std::byte, kPeerMessageSize>;

namespace detail {

template <typename T>
void put(std::byte*& out, T value) {
  auto bytes = std::bit_cast<std::array<std::byte, sizeof(T)>>(value);
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(bytes.begin(), bytes.end());
  }
  std::memcpy(out, bytes.data(), sizeof(T));
  out += sizeof(T);
}

template <typename T>
T get(const std::byte*& in) {
  std::array<std::byte, sizeof(T)> bytes;
  std::memcpy(bytes.data(), in, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(bytes.begin(), bytes.end());
  }
  in += sizeof(T);
  return std::bit_cast<T>(bytes);
}

}  // namespace detail

/// Little-endian: sender u16, seq u32, odom x, y, theta f64, ap x, y f64, ap variance f64.
inline Buffer encode(const PeerMessage& m) {
  Buffer buf{};
  std::byte* p = buf.data();
  detail::put<std::uint16_t>(p, m.sender);
  detail::put<std::uint32_t>(p, m.seq);
  detail::put<double>(p, m.odometry.x);
  detail::put<double>(p, m.odometry.y);
  detail::put<double>(p, m.odometry.theta);
  detail::put<double>(p, m.ap_estimate.position.x());
  detail::put<double>(p, m.ap_estimate.position.y());
  detail::put<double>(p, m.ap_estimate.variance);
  return buf;
}

inline PeerMessage decode(std::span<const std::byte> bytes) {
  if (bytes.size() != kPeerMessageSize) {
    throw InvalidArgument("PeerMessage must be exactly 54 bytes, got " +
                          std::to_string(bytes.size()));
  }
  const std::byte* p = bytes.data();
  PeerMessage m;
  m.sender = detail::get<std::uint16_t>(p);
  m.seq = detail::get<std::uint32_t>(p);
  m.odometry.x = detail::get<double>(p);
  m.odometry.y = detail::get<double>(p);
  m.odometry.theta = detail::get<double>(p);
  m.odometry.frame = m.sender;
  m.ap_estimate.position.x() = detail::get<double>(p);
  m.ap_estimate.position.y() = detail::get<double>(p);
  m.ap_estimate.variance = detail::get<double>(p);
  return m;
}

}  // namespace wire
}  // namespace hgprl
