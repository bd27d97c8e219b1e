#include <gtest/gtest.h>

#include <random>
#include <vector>

#include "hgprl/ap_search.hpp"
#include "hgprl/gp.hpp"
#include "hgprl/sim_world.hpp"

using namespace hgprl;

namespace {

const Vec2 kAp{1.6, 1.0};

// Noiseless log-distance field sampled on a grid that is symmetric about the AP.
TrainedGp noiseless_model() {
  static const TrainedGp gp = [] {
    ChannelParams ch;
    std::vector<RssiSample> s;
    for (int i = -3; i <= 3; ++i)
      for (int j = -3; j <= 3; ++j) {
        const Vec2 p = kAp + Vec2(0.4 * i, 0.25 * j);
        s.push_back({p, mean_rssi(ch, (p - kAp).norm())});
      }
    return fit(s, FitBudget{});
  }();
  return gp;
}

TrainedGp noisy_model(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  std::uniform_real_distribution<double> ux(0.0, 3.2), uy(0.0, 2.0);
  ChannelParams ch;
  std::vector<RssiSample> s;
  for (int i = 0; i < 50; ++i) {
    const Vec2 p(ux(rng), uy(rng));
    s.push_back({p, sample_rssi(ch, (p - kAp).norm(), rng, n)});
  }
  FitBudget b;
  b.seed = seed;
  return fit(s, b);
}

TrainedGp two_bump_model() {
  std::vector<RssiSample> s;
  for (int i = 0; i <= 15; ++i)
    for (int j = 0; j <= 10; ++j) {
      const Vec2 p(0.2 * i, 0.2 * j);
      const double v = -50.0 + 15.0 * std::exp(-(p - Vec2(2.2, 1.0)).squaredNorm() / 0.18) +
                       6.0 * std::exp(-(p - Vec2(0.7, 1.0)).squaredNorm() / 0.18);
      s.push_back({p, v});
    }
  return fit(s, FitBudget{});
}

}  // namespace

TEST(DenseArgmax, NoiselessFieldPeaksWithinOneCell) {
  const auto gp = noiseless_model();
  const auto e = dense_argmax(gp, {kAp, {1.5, 1.0}}, 0.0125);
  EXPECT_LE(std::abs(e.position.x() - kAp.x()), 0.0125);
  EXPECT_LE(std::abs(e.position.y() - kAp.y()), 0.0125);
}

TEST(DenseArgmax, MatchesBruteForceScan) {
  const auto gp = noisy_model(4);
  const SearchRegion region{{1.6, 1.0}, {1.5, 1.5}};
  const auto e = dense_argmax(gp, region, 0.0125);
  EXPECT_EQ(e.mean_evaluations, 240u * 240u);

  Vec2 best;
  double top = -1e300;
  for (int i = 0; i < 240; ++i)
    for (int j = 0; j < 240; ++j) {
      const Vec2 p(0.1 + 0.0125 * (i + 0.5), -0.5 + 0.0125 * (j + 0.5));
      const double m = gp.mean(p);
      if (m > top) {
        top = m;
        best = p;
      }
    }
  EXPECT_NEAR(e.position.x(), best.x(), 1e-12);
  EXPECT_NEAR(e.position.y(), best.y(), 1e-12);
}

TEST(DenseArgmax, SymmetricPeaksBreakTiesLexicographically) {
  std::vector<RssiSample> s;
  for (int i = 0; i <= 6; ++i)
    for (int j = 0; j <= 4; ++j) {
      const Vec2 p(0.5 * i, 0.5 * j);
      const double v = -50.0 + 10.0 * std::exp(-(p - Vec2(1.0, 1.0)).squaredNorm() / 0.1) +
                       10.0 * std::exp(-(p - Vec2(2.0, 1.0)).squaredNorm() / 0.1);
      s.push_back({p, v});
    }
  const TrainedGp gp(s, GpHyperParams{100.0, 0.3, 1e-4, -48.0});
  const auto e = dense_argmax(gp, {{1.5, 1.0}, {1.0, 0.5}}, 0.05);
  // The mirror image x -> 3 - x is an equally good answer; the smaller x must win.
  EXPECT_LT(e.position.x(), 1.5);
  EXPECT_NEAR(gp.mean(e.position), gp.mean({3.0 - e.position.x(), e.position.y()}), 1e-9);
  const auto again = dense_argmax(gp, {{1.5, 1.0}, {1.0, 0.5}}, 0.05);
  EXPECT_EQ(e.position, again.position);
}

TEST(DenseArgmax, RejectsOversizedGrid) {
  const auto gp = noiseless_model();
  EXPECT_THROW(dense_argmax(gp, {kAp, {1.5, 1.0}}, 1e-4), GridTooLarge);
  EXPECT_THROW(dense_argmax(gp, {kAp, {1.5, 1.0}}, 0.01, 1000), GridTooLarge);
  EXPECT_THROW(dense_argmax(gp, {kAp, {1.5, 1.0}}, 0.0), InvalidArgument);
}

TEST(Hierarchical, NoiselessFieldWithinOneFineCellOfDense) {
  const auto gp = noiseless_model();
  const SearchRegion region{kAp, {1.5, 1.5}};
  const auto h = hierarchical_search(gp, region, HierarchyConfig{});
  const auto d = dense_argmax(gp, region, 0.0125);
  EXPECT_LE((h.position - d.position).norm(), 0.0125);
}

TEST(Hierarchical, SingleLevelEqualsDense) {
  const auto gp = noisy_model(9);
  const SearchRegion region{{1.2, 0.9}, {0.5, 0.5}};
  HierarchyConfig cfg;
  cfg.resolutions = {0.0125};
  cfg.grid_points = 80;  // 80 * 0.0125 = 2 * 0.5
  const auto h = hierarchical_search(gp, region, cfg);
  const auto d = dense_argmax(gp, region, 0.0125);
  EXPECT_EQ(h.position, d.position);
  EXPECT_EQ(h.mean_evaluations, d.mean_evaluations);
}

TEST(Hierarchical, EvaluationBudget) {
  const auto gp = noisy_model(2);
  const SearchRegion region{kAp, {1.5, 1.5}};
  EXPECT_EQ(hierarchical_search(gp, region, HierarchyConfig{}).mean_evaluations, 3600u);
  EXPECT_EQ(dense_argmax(gp, region, 0.0125).mean_evaluations, 57600u);
  HierarchyConfig two;
  two.resolutions = {0.2, 0.1};
  two.grid_points = 11;
  EXPECT_EQ(hierarchical_search(gp, region, two).mean_evaluations, 2u * 121u);
}

TEST(Hierarchical, RefinesMonotonicallyAndStaysInside) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto gp = noisy_model(seed);
    const SearchRegion start{{1.6, 1.0}, {1.5, 1.5}};
    const HierarchyConfig cfg;
    const auto h = hierarchical_search(gp, start, cfg);
    ASSERT_EQ(h.level_trace.size(), 4u);
    double var = 0.0;
    for (std::size_t k = 0; k < h.level_trace.size(); ++k) {
      const auto& l = h.level_trace[k];
      EXPECT_TRUE(l.region.contains(l.position, 1e-12));
      EXPECT_TRUE(start.contains(l.region.lo(), 1e-12) && start.contains(l.region.hi(), 1e-12));
      if (k > 0) EXPECT_LT(l.spacing.maxCoeff(), h.level_trace[k - 1].spacing.minCoeff());
      var += cfg.resolutions[k] * l.variance;
    }
    EXPECT_NEAR(h.variance, var, 1e-12);
    EXPECT_GE(h.variance, 0.0);
    EXPECT_EQ(h.position, h.level_trace.back().position);
  }
}

TEST(Hierarchical, Deterministic) {
  const auto gp = noisy_model(3);
  const SearchRegion region{kAp, {1.5, 1.5}};
  const auto a = hierarchical_search(gp, region, HierarchyConfig{});
  const auto b = hierarchical_search(gp, region, HierarchyConfig{});
  EXPECT_EQ(a.position, b.position);
  EXPECT_EQ(a.variance, b.variance);
}

TEST(Hierarchical, ConfigValidation) {
  HierarchyConfig bad;
  bad.resolutions = {0.05, 0.1};
  EXPECT_THROW(bad.validate(), InvalidArgument);
  bad.resolutions = {};
  EXPECT_THROW(bad.validate(), InvalidArgument);
  HierarchyConfig small;
  small.grid_points = 2;
  EXPECT_THROW(small.validate(), InvalidArgument);
  EXPECT_THROW((SearchRegion{{0, 0}, {0.0, 1.0}}.validate()), InvalidArgument);
}

TEST(Gradient, StartingAtPeakStaysPut) {
  const auto gp = noiseless_model();
  const auto peak = dense_argmax(gp, {kAp, {1.5, 1.0}}, 0.0125).position;
  const auto g = gradient_ascent_baseline(gp, peak, 0.05, 1000);
  EXPECT_LE((g.position - peak).norm(), 0.05 + 1e-12);
}

TEST(Gradient, TrappedBySecondaryBump) {
  const auto gp = two_bump_model();
  const SearchRegion region{{1.5, 1.0}, {1.5, 1.0}};
  const Vec2 global = dense_argmax(gp, region, 0.0125).position;
  ASSERT_LT((global - Vec2(2.2, 1.0)).norm(), 0.1);

  const auto h = hierarchical_search(gp, region, HierarchyConfig{});
  const auto g = gradient_ascent_baseline(gp, {0.6, 0.9}, 0.05, 1000);
  const double hier_err = (h.position - global).norm();
  const double grad_err = (g.position - global).norm();
  EXPECT_LT((g.position - Vec2(0.7, 1.0)).norm(), 0.15);
  EXPECT_GT(grad_err, 5.0 * hier_err);
  EXPECT_GT(grad_err, 1.0);
}

TEST(LevelField, CoversLevelGrid) {
  const auto gp = noisy_model(1);
  const auto h = hierarchical_search(gp, {kAp, {1.5, 1.5}}, HierarchyConfig{});
  for (const auto& l : h.level_trace) {
    const auto pts = level_field(gp, l);
    ASSERT_EQ(pts.size(), 900u);
    bool found = false;
    for (const auto& p : pts) {
      EXPECT_GE(p.var_dbm2, 0.0);
      found |= std::abs(p.x - l.position.x()) < 1e-12 && std::abs(p.y - l.position.y()) < 1e-12;
    }
    EXPECT_TRUE(found);
  }
}
