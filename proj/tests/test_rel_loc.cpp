#include <gtest/gtest.h>

#include <numbers>
#include <random>
#include <vector>

#include "hgprl/rel_loc.hpp"
#include "hgprl/sim_world.hpp"

using namespace hgprl;

constexpr double kPi = std::numbers::pi;

TEST(RotationBetween, AlignedFramesGiveIdentity) {
  EXPECT_TRUE(rotation_between(0.7, 0.7).isApprox(Mat2::Identity(), 1e-15));
}

TEST(RotationBetween, QuarterTurn) {
  // Robot j's frame is turned a quarter turn counter-clockwise from robot i's frame.
  Mat2 expected;
  expected << 0, -1, 1, 0;
  EXPECT_TRUE(rotation_between(0.0, kPi / 2).isApprox(expected, 1e-15));
  EXPECT_TRUE(rotation_between(-0.3, -0.3 + kPi / 2).isApprox(expected, 1e-15));
}

TEST(RotationBetween, GroupProperties) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-kPi, kPi);
  for (int t = 0; t < 100; ++t) {
    const double a = u(rng), b = u(rng), c = u(rng);
    const Mat2 ab = rotation_between(a, b), bc = rotation_between(b, c);
    EXPECT_LT((ab * bc - rotation_between(a, c)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((ab * ab.transpose() - Mat2::Identity()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_NEAR(ab.determinant(), 1.0, 1e-12);
  }
}

TEST(RelativePosition, AlignedFrames) {
  ApEstimate ap_i;
  ap_i.position = {1.0, 1.0};
  PeerMessage m;
  m.odometry = {2.0, 0.0, 0.0, 1};
  m.ap_estimate.position = {1.0, 1.0};
  const auto n = relative_position(ap_i, m, Mat2::Identity());
  EXPECT_NEAR((n.position - Vec2(2.0, 0.0)).norm(), 0.0, 1e-15);
}

TEST(RelativePosition, RotatedUnitOffset) {
  ApEstimate ap_i;
  PeerMessage m;
  m.odometry = {1.0, 0.0, 0.0, 1};
  Mat2 quarter;
  quarter << 0, -1, 1, 0;
  const auto n = relative_position(ap_i, m, quarter);
  EXPECT_NEAR((n.position - Vec2(0.0, 1.0)).norm(), 0.0, 1e-15);
}

TEST(RelativePosition, ExactAnchorsReproduceTruth) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> pos(-5.0, 5.0), ang(-kPi, kPi);
  for (int t = 0; t < 1000; ++t) {
    const Pose2D origin_i{pos(rng), pos(rng), ang(rng), 0};
    const Pose2D origin_j{pos(rng), pos(rng), ang(rng), 1};
    const Vec2 ap(pos(rng), pos(rng));
    const Vec2 pj(pos(rng), pos(rng));

    ApEstimate ap_i;
    ap_i.position = world_to_local(ap, origin_i);
    PeerMessage m;
    m.sender = 1;
    const Vec2 pj_local = world_to_local(pj, origin_j);
    m.odometry = {pj_local.x(), pj_local.y(), 0.0, 1};
    m.ap_estimate.position = world_to_local(ap, origin_j);

    const auto n = relative_position(ap_i, m, rotation_between(origin_i.theta, origin_j.theta));
    ASSERT_LT((n.position - world_to_local(pj, origin_i)).norm(), 1e-12);
  }
}

TEST(RelativePosition, ErrorBoundedByAnchorErrors) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> pos(-3.0, 3.0), ang(-kPi, kPi), err(-0.3, 0.3);
  for (int t = 0; t < 1000; ++t) {
    const Pose2D oi{pos(rng), pos(rng), ang(rng), 0}, oj{pos(rng), pos(rng), ang(rng), 1};
    const Vec2 ap(pos(rng), pos(rng)), pj(pos(rng), pos(rng));
    const Vec2 ei(err(rng), err(rng)), ej(err(rng), err(rng));
    ApEstimate ap_i;
    ap_i.position = world_to_local(ap, oi) + ei;
    PeerMessage m;
    const Vec2 local = world_to_local(pj, oj);
    m.odometry = {local.x(), local.y(), 0.0, 1};
    m.ap_estimate.position = world_to_local(ap, oj) + ej;
    const auto n = relative_position(ap_i, m, rotation_between(oi.theta, oj.theta));
    ASSERT_LE((n.position - world_to_local(pj, oi)).norm(), ei.norm() + ej.norm() + 1e-12);
  }
}

TEST(RelativePosition, VarianceAndStaleness) {
  ApEstimate ap_i;
  ap_i.variance = 0.25;
  PeerMessage m;
  m.sender = 4;
  m.ap_estimate.variance = 0.5;
  auto n = relative_position(ap_i, m, Mat2::Identity(), 3, 5);
  EXPECT_EQ(n.neighbor, 4);
  EXPECT_DOUBLE_EQ(n.combined_variance, 0.75);
  EXPECT_EQ(n.age, 3u);
  EXPECT_FALSE(n.stale);
  n = relative_position(ap_i, m, Mat2::Identity(), 6, 5);
  EXPECT_TRUE(n.stale);
}

TEST(Wire, FixedSizeLittleEndianRoundTrip) {
  PeerMessage m;
  m.sender = 0x0102;
  m.seq = 0x0A0B0C0D;
  m.odometry = {1.25, -3.5, 0.75, 0x0102};
  m.ap_estimate.position = {0.1, 1e-300};
  m.ap_estimate.variance = 42.0;
  m.ap_estimate.level_trace.resize(4);  // diagnostics never travel
  const auto buf = wire::encode(m);
  static_assert(sizeof(buf) == 54);
  EXPECT_EQ(buf.size(), 54u);
  EXPECT_EQ(buf[0], std::byte{0x02});
  EXPECT_EQ(buf[1], std::byte{0x01});
  EXPECT_EQ(buf[2], std::byte{0x0D});
  EXPECT_EQ(buf[5], std::byte{0x0A});

  const PeerMessage r = wire::decode(buf);
  EXPECT_EQ(r.sender, m.sender);
  EXPECT_EQ(r.seq, m.seq);
  EXPECT_EQ(r.odometry.x, m.odometry.x);
  EXPECT_EQ(r.odometry.y, m.odometry.y);
  EXPECT_EQ(r.odometry.theta, m.odometry.theta);
  EXPECT_EQ(r.odometry.frame, m.sender);
  EXPECT_EQ(r.ap_estimate.position, m.ap_estimate.position);
  EXPECT_EQ(r.ap_estimate.variance, m.ap_estimate.variance);
  EXPECT_TRUE(r.ap_estimate.level_trace.empty());
}

TEST(Wire, RejectsWrongSize) {
  std::vector<std::byte> short_buf(53);
  EXPECT_THROW(wire::decode(short_buf), InvalidArgument);
  std::vector<std::byte> long_buf(55);
  EXPECT_THROW(wire::decode(long_buf), InvalidArgument);
}

TEST(WrapAngle, HalfOpenInterval) {
  EXPECT_DOUBLE_EQ(wrap_angle(kPi), kPi);
  EXPECT_DOUBLE_EQ(wrap_angle(-kPi), kPi);
  EXPECT_NEAR(wrap_angle(3 * kPi / 2), -kPi / 2, 1e-15);
  EXPECT_NEAR(wrap_angle(0.3 + 8 * kPi), 0.3, 1e-12);
}
