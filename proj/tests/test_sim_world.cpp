#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "hgprl/kinematics.hpp"
#include "hgprl/sim_world.hpp"

using namespace hgprl;

constexpr double kPi = std::numbers::pi;

namespace {

ChannelParams noiseless() {
  ChannelParams ch;
  ch.shadow_sigma = 0.0;
  ch.multipath_sigma = 0.0;
  return ch;
}

WorldConfig two_robot_world(std::uint64_t seed) {
  WorldConfig wc;
  wc.seed = seed;
  wc.robots = {{0, {0.5, 0.5, 0.3, 0}}, {1, {2.5, 1.5, -2.0, 1}}};
  return wc;
}

}  // namespace

TEST(Channel, NoiselessExamples) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n;
  EXPECT_DOUBLE_EQ(sample_rssi(noiseless(), 1.0, rng, n), -20.0);
  EXPECT_DOUBLE_EQ(sample_rssi(noiseless(), 10.0, rng, n), -50.0);
  EXPECT_DOUBLE_EQ(mean_rssi(noiseless(), 0.0), mean_rssi(noiseless(), 0.01));
}

TEST(Channel, StrictlyDecreasingWithDistance) {
  double prev = mean_rssi(noiseless(), 0.01);
  for (double d = 0.02; d < 20.0; d *= 1.1) {
    const double v = mean_rssi(noiseless(), d);
    EXPECT_LT(v, prev);
    prev = v;
  }
}

TEST(Channel, MonteCarloMoments) {
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> n;
  const ChannelParams ch;
  double sum = 0.0, sq = 0.0;
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) {
    const double v = sample_rssi(ch, 1.0, rng, n);
    sum += v;
    sq += v * v;
  }
  const double mean = sum / draws;
  const double sd = std::sqrt(sq / draws - mean * mean);
  EXPECT_NEAR(mean, -20.0, 0.05);
  EXPECT_NEAR(sd, std::sqrt(8.0), 0.05);
}

TEST(Channel, DrawsExactlyTwoNormals) {
  std::mt19937_64 a(9), b(9);
  std::normal_distribution<double> na, nb;
  sample_rssi(ChannelParams{}, 2.0, a, na);
  nb(b);
  nb(b);
  EXPECT_EQ(na(a), nb(b));
}

TEST(Unicycle, AtRestStaysPut) {
  const Workspace ws{10, 10};
  UnicycleState s{{1.0, 2.0, 0.5, 0}, 0.0, 0.0, {}};
  const auto n = step_unicycle(s, 0.1, ws);
  EXPECT_EQ(n.pose.x, 1.0);
  EXPECT_EQ(n.pose.y, 2.0);
  EXPECT_EQ(n.pose.theta, 0.5);
}

TEST(Unicycle, StraightLine) {
  const Workspace ws{10, 10};
  UnicycleState s{{1.0, 2.0, 0.0, 0}, 1.0, 0.0, {10.0, 10.0}};
  const auto n = step_unicycle(s, 0.1, ws);
  EXPECT_DOUBLE_EQ(n.pose.x, 1.1);
  EXPECT_DOUBLE_EQ(n.pose.y, 2.0);
}

TEST(Unicycle, FullCircleCloses) {
  const Workspace ws{10, 10};
  UnicycleState s{{5.0, 5.0, 0.0, 0}, 1.0, 2 * kPi, {10.0, 10.0}};
  for (int i = 0; i < 10000; ++i) {
    s.v = 1.0;
    s.omega = 2 * kPi;
    s = step_unicycle(s, 1e-4, ws);
  }
  EXPECT_LT(std::hypot(s.pose.x - 5.0, s.pose.y - 5.0), 0.01);
}

TEST(Unicycle, ClampsCommandsAndWalls) {
  const Workspace ws{3.2, 2.0};
  UnicycleState s{{3.19, 1.0, 0.0, 0}, 5.0, 9.0, {0.2, 2.0}};
  const auto n = step_unicycle(s, 0.5, ws);
  EXPECT_EQ(n.pose.x, 3.2);
  EXPECT_EQ(n.v, 0.0);
  EXPECT_EQ(n.omega, 2.0);
  EXPECT_THROW(step_unicycle(s, 0.0, ws), InvalidArgument);
}

TEST(SiToUnicycle, AlignedAndOpposite) {
  const UnicycleLimits lim{0.2, 2.0};
  const Pose2D p{0, 0, 0.4, 0};
  const Vec2 ahead(0.1 * std::cos(0.4), 0.1 * std::sin(0.4));
  auto t = si_to_unicycle(ahead, p, lim);
  EXPECT_NEAR(t.v, 0.1, 1e-15);
  EXPECT_NEAR(t.omega, 0.0, 1e-15);
  t = si_to_unicycle(-ahead, p, lim);
  EXPECT_EQ(t.v, 0.0);
  EXPECT_EQ(std::abs(t.omega), 2.0);
  t = si_to_unicycle(Vec2::Zero(), p, lim);
  EXPECT_EQ(t.v, 0.0);
  EXPECT_EQ(t.omega, 0.0);
}

TEST(SiToUnicycle, ClosedLoopReachesGoal) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> ux(0.1, 3.1), uy(0.1, 1.9), ua(-kPi, kPi);
  const Workspace ws{3.2, 2.0};
  const Vec2 goal(1.6, 1.0);
  for (int t = 0; t < 100; ++t) {
    UnicycleState s{{ux(rng), uy(rng), ua(rng), 0}, 0, 0, {0.2, 2.0}};
    double prev = std::numeric_limits<double>::infinity();
    for (int k = 0; k < 1000; ++k) {
      const Vec2 u = goal - s.pose.position();
      const Vec2 uc = u.norm() > 0.2 ? Vec2(u * (0.2 / u.norm())) : u;
      const auto cmd = si_to_unicycle(uc, s.pose, s.limits);
      s.v = cmd.v;
      s.omega = cmd.omega;
      s = step_unicycle(s, 0.05, ws);
      const double d = (s.pose.position() - goal).norm();
      const double heading_err =
          std::abs(wrap_angle(std::atan2(u.y(), u.x()) - s.pose.theta));
      if (heading_err < kPi / 2) {
        EXPECT_LE(d, prev + 1e-12);
      }
      prev = d;
    }
    EXPECT_LT(prev, 0.05);
  }
}

TEST(RandomWalk, DeterministicForSeed) {
  const Workspace ws;
  const auto run = [&](std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    RandomWalkState walk;
    UnicycleState s{{1.0, 1.0, 0.0, 0}, 0, 0, {}};
    std::vector<double> cmds;
    for (int i = 0; i < 300; ++i) {
      const auto c = random_walk_controller(s, ws, walk, rng);
      cmds.push_back(c.v);
      cmds.push_back(c.omega);
      s.v = c.v;
      s.omega = c.omega;
      s = step_unicycle(s, 0.5, ws);
    }
    return cmds;
  };
  EXPECT_EQ(run(3), run(3));
  EXPECT_NE(run(3), run(4));
}

TEST(RandomWalk, DispersesAcrossWorkspace) {
  const Workspace ws;
  RandomWalkParams params;
  params.dt = 0.5;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed);
    RandomWalkState walk;
    UnicycleState s{{0.4, 0.4, 0.0, 0}, 0, 0, {}};
    std::vector<Vec2> spread;
    for (int i = 0; i < 300; ++i) {
      const Vec2 p = s.pose.position();
      if (std::all_of(spread.begin(), spread.end(),
                      [&](const Vec2& q) { return (p - q).norm() >= 0.1; })) {
        spread.push_back(p);
      }
      const auto c = random_walk_controller(s, ws, walk, rng, params);
      s.v = c.v;
      s.omega = c.omega;
      s = step_unicycle(s, params.dt, ws);
    }
    EXPECT_GE(spread.size(), 10u) << "seed " << seed;
  }
}

TEST(RandomWalk, TurnsInwardAtWall) {
  const Workspace ws;
  std::mt19937_64 rng(7);
  RandomWalkState walk;
  RandomWalkParams params;
  params.dt = 0.5;
  UnicycleState s{{0.05, 1.0, kPi, 0}, 0, 0, {}};  // at the left wall, facing out
  const auto first = random_walk_controller(s, ws, walk, rng, params);
  EXPECT_EQ(first.v, 0.0);
  EXPECT_NE(first.omega, 0.0);
  for (int i = 0; i < 20 && walk.turn_target; ++i) {
    const auto c = random_walk_controller(s, ws, walk, rng, params);
    s.v = c.v;
    s.omega = c.omega;
    s = step_unicycle(s, params.dt, ws);
  }
  EXPECT_GT(std::cos(s.pose.theta), 0.0);
}

TEST(Frames, RoundTrip) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-5, 5), a(-kPi, kPi);
  for (int i = 0; i < 1000; ++i) {
    const Pose2D origin{u(rng), u(rng), a(rng), 0};
    const Vec2 p(u(rng), u(rng));
    ASSERT_LT((local_to_world(world_to_local(p, origin), origin) - p).norm(), 1e-12);
    const Pose2D w{u(rng), u(rng), a(rng), 0};
    const Pose2D l = world_to_local(w, origin);
    ASSERT_NEAR(wrap_angle(l.theta + origin.theta - w.theta), 0.0, 1e-12);
  }
}

TEST(World, OdometryStartsAtLocalOrigin) {
  World w(two_robot_world(1));
  for (const auto id : w.robot_ids()) {
    const auto o = w.odometry(id);
    EXPECT_EQ(o.x, 0.0);
    EXPECT_EQ(o.y, 0.0);
    EXPECT_EQ(o.theta, 0.0);
    EXPECT_EQ(o.frame, id);
  }
}

TEST(World, ReproducibleAndStreamsIndependentOfRobotCount) {
  const auto trace = [](WorldConfig wc) {
    World w(wc);
    std::vector<double> out;
    for (int t = 0; t < 100; ++t) {
      out.push_back(w.sample_rssi(0));
      w.apply(0, w.random_walk(0), 0.5);
      out.push_back(w.true_pose(0).x);
      out.push_back(w.true_pose(0).theta);
    }
    return out;
  };
  const auto base = two_robot_world(5);
  auto more = base;
  more.robots.push_back({7, {1.0, 1.0, 0.0, 7}});
  EXPECT_EQ(trace(base), trace(base));
  EXPECT_EQ(trace(base), trace(more));
  EXPECT_NE(trace(base), trace(two_robot_world(6)));
}

TEST(World, AuditsTruthAccessWhileAgentsRun) {
  World w(two_robot_world(1));
  w.true_pose(0);
  w.ap_position();
  EXPECT_EQ(w.truth_violations(), 0u);
  w.set_agents_running(true);
  w.true_pose(1);
  w.origin(0);
  w.set_agents_running(false);
  EXPECT_EQ(w.truth_violations(), 2u);
}

TEST(World, ValidatesConfig) {
  auto wc = two_robot_world(1);
  wc.robots.push_back({0, {1.0, 1.0, 0.0, 0}});
  EXPECT_THROW(World{wc}, InvalidArgument);
  wc = two_robot_world(1);
  wc.ap_position = {5.0, 1.0};
  EXPECT_THROW(World{wc}, InvalidArgument);
  wc = two_robot_world(1);
  wc.channel.path_loss_exponent = 0.0;
  EXPECT_THROW(World{wc}, InvalidArgument);
}
