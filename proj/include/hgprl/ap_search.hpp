#pragma once

// Access-point localization over a trained RSSI map: exhaustive grid argmax,
// coarse-to-fine hierarchical argmax, and a fixed-step gradient-ascent baseline.

#include <algorithm>
#include <cstddef>
#include <optional>
#include <vector>

#include "hgprl/common.hpp"
#include "hgprl/gp.hpp"

namespace hgprl {

/// Axis-aligned box: center +/- half_extent.
struct SearchRegion {
  Vec2 center = Vec2::Zero();
  Vec2 half_extent = Vec2::Ones();

  Vec2 lo() const { return center - half_extent; }
  Vec2 hi() const { return center + half_extent; }

  bool contains(const Vec2& p, double slack = 0.0) const {
    return ((p - center).cwiseAbs().array() <= half_extent.array() + slack).all();
  }

  void validate() const {
    if (!is_finite(center) || !is_finite(half_extent) || half_extent.minCoeff() <= 0.0) {
      throw InvalidArgument("SearchRegion: half_extent components must be > 0 and finite");
    }
  }

  static SearchRegion from_bounds(const Vec2& lo, const Vec2& hi) {
    return {(lo + hi) / 2.0, (hi - lo) / 2.0};
  }
};

struct HierarchyConfig {
  std::vector<double> resolutions{0.1, 0.05, 0.025, 0.0125};  // meters, coarse to fine
  int grid_points = 30;                                        // G, grid is G x G per level
  double shrink = 0.5;
  bool uncertainty_expansion = true;

  std::size_t levels() const noexcept { return resolutions.size(); }

  void validate() const {
    if (resolutions.empty()) {
      throw InvalidArgument("HierarchyConfig: need at least one level");
    }
    for (std::size_t k = 0; k < resolutions.size(); ++k) {
      if (!(resolutions[k] > 0.0) || !std::isfinite(resolutions[k])) {
        throw InvalidArgument("HierarchyConfig: resolutions must be positive");
      }
      if (k > 0 && !(resolutions[k] < resolutions[k - 1])) {
        throw InvalidArgument("HierarchyConfig: resolutions must be strictly decreasing");
      }
    }
    if (grid_points < 3) {
      throw InvalidArgument("HierarchyConfig: grid_points must be >= 3");
    }
    if (!(shrink > 0.0)) {
      throw InvalidArgument("HierarchyConfig: shrink must be > 0");
    }
  }
};

/// One level of a grid search, kept for diagnostics and field dumps.
struct LevelResult {
  SearchRegion region;
  Vec2 spacing;
  int nx = 0;
  int ny = 0;
  Vec2 position;
  double mean = 0.0;
  double variance = 0.0;
};

struct ApEstimate {
  Vec2 position = Vec2::Zero();  // local frame
  double variance = 0.0;         // dBm^2 for single-level searches, resolution-weighted sum otherwise
  std::vector<LevelResult> level_trace;
  std::size_t mean_evaluations = 0;
};

struct FieldPoint {
  double x, y, mean_dbm, var_dbm2;
};

namespace detail {

/// n points with the given spacing, symmetric about c.
inline Eigen::VectorXd grid_axis(double c, int n, double spacing) {
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) {
    v[i] = c + (i - (n - 1) / 2.0) * spacing;
  }
  return v;
}

inline constexpr double kMeanTieTol = 1e-9;
inline constexpr double kVarTieTol = 1e-12;

/// Argmax of the posterior mean over xs x ys. Ties (within 1e-9 dBm) go to the smaller
/// variance, then to the lexicographically smaller (x, y).
inline LevelResult scan_grid(const TrainedGp& model, const Eigen::VectorXd& xs,
                             const Eigen::VectorXd& ys) {
  const Eigen::MatrixXd means = model.mean_grid(xs, ys);
  const double top = means.maxCoeff();
  std::optional<LevelResult> best;
  for (Eigen::Index i = 0; i < xs.size(); ++i) {
    for (Eigen::Index j = 0; j < ys.size(); ++j) {
      if (means(i, j) < top - kMeanTieTol) {
        continue;
      }
      const Vec2 p(xs[i], ys[j]);
      const double var = model.variance(p);
      // Scan order is lexicographic, so a later candidate only wins on variance.
      if (!best || var < best->variance - kVarTieTol) {
        LevelResult r;
        r.position = p;
        r.mean = means(i, j);
        r.variance = var;
        best = r;
      }
    }
  }
  best->nx = static_cast<int>(xs.size());
  best->ny = static_cast<int>(ys.size());
  return *best;
}

}  // namespace detail

/// Exhaustive argmax of the posterior mean on a grid of the given resolution covering
/// `region` (floor(2h / r) points per axis, centered).
inline ApEstimate dense_argmax(const TrainedGp& model, const SearchRegion& region, double resolution,
                               std::size_t max_points = 10'000'000) {
  region.validate();
  if (!(resolution > 0.0)) {
    throw InvalidArgument("dense_argmax: resolution must be > 0");
  }
  const double fx = std::floor(2.0 * region.half_extent.x() / resolution + 1e-9);
  const double fy = std::floor(2.0 * region.half_extent.y() / resolution + 1e-9);
  if (std::max(fx, 1.0) * std::max(fy, 1.0) > static_cast<double>(max_points)) {
    throw GridTooLarge("dense_argmax: grid exceeds " + std::to_string(max_points) + " points");
  }
  const int nx = std::max(1, static_cast<int>(fx));
  const int ny = std::max(1, static_cast<int>(fy));
  LevelResult r = detail::scan_grid(model, detail::grid_axis(region.center.x(), nx, resolution),
                                    detail::grid_axis(region.center.y(), ny, resolution));
  r.region = region;
  r.spacing = Vec2(resolution, resolution);
  ApEstimate est;
  est.position = r.position;
  est.variance = r.variance;
  est.mean_evaluations = static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny);
  est.level_trace.push_back(r);
  return est;
}

/// Coarse-to-fine argmax. Every level evaluates a G x G grid spanning its region. Level 1
/// spans `start`; level k+1 is centered on the level-k argmax with half-extent
/// max(r_k G/2 shrink, r_{k+1} G/2), widened by min(r_k G/4, r_k sigma_k / sigma_f) when
/// uncertainty expansion is on, and shifted (or shrunk) to stay inside `start`.
/// The estimate is the finest-level argmax; its variance is sum_k r_k sigma_k^2.
inline ApEstimate hierarchical_search(const TrainedGp& model, const SearchRegion& start,
                                      const HierarchyConfig& cfg) {
  start.validate();
  cfg.validate();
  const int g = cfg.grid_points;
  const double sigma_f = std::sqrt(model.hyperparams().signal_variance);

  ApEstimate est;
  SearchRegion region = start;
  for (std::size_t k = 0; k < cfg.levels(); ++k) {
    if (k > 0) {
      const double r_prev = cfg.resolutions[k - 1];
      const double r = cfg.resolutions[k];
      double h = std::max(r_prev * g / 2.0 * cfg.shrink, r * g / 2.0);
      if (cfg.uncertainty_expansion) {
        const double sigma = std::sqrt(est.level_trace.back().variance);
        h += std::min(r_prev * g / 4.0, r_prev * sigma / sigma_f);
      }
      const Vec2 prev = est.level_trace.back().position;
      for (int d = 0; d < 2; ++d) {
        if (h >= start.half_extent[d]) {
          region.half_extent[d] = start.half_extent[d];
          region.center[d] = start.center[d];
        } else {
          region.half_extent[d] = h;
          region.center[d] =
              std::clamp(prev[d], start.lo()[d] + h, start.hi()[d] - h);
        }
      }
    }
    const Vec2 spacing = region.half_extent * 2.0 / g;
    LevelResult r = detail::scan_grid(model, detail::grid_axis(region.center.x(), g, spacing.x()),
                                      detail::grid_axis(region.center.y(), g, spacing.y()));
    r.region = region;
    r.spacing = spacing;
    est.variance += cfg.resolutions[k] * r.variance;
    est.mean_evaluations += static_cast<std::size_t>(g) * static_cast<std::size_t>(g);
    est.level_trace.push_back(r);
  }
  est.position = est.level_trace.back().position;
  return est;
}

/// Fixed-step steepest ascent on the posterior mean using central differences
/// (h = step / 10). Stops when |grad| < 1e-6 dBm/m, when a step no longer increases the
/// mean, or after max_iters steps. Finds local maxima only.
inline ApEstimate gradient_ascent_baseline(const TrainedGp& model, const Vec2& start,
                                           double step = 0.05, int max_iters = 1000) {
  if (!(step > 0.0)) {
    throw InvalidArgument("gradient_ascent_baseline: step must be > 0");
  }
  const double h = step / 10.0;
  std::size_t evals = 0;
  const auto f = [&](const Vec2& p) {
    ++evals;
    return model.mean(p);
  };
  Vec2 p = start;
  double fp = f(p);
  for (int it = 0; it < max_iters; ++it) {
    const Vec2 grad((f(p + Vec2(h, 0)) - f(p - Vec2(h, 0))) / (2 * h),
                    (f(p + Vec2(0, h)) - f(p - Vec2(0, h))) / (2 * h));
    const double norm = grad.norm();
    if (norm < 1e-6) {
      break;
    }
    const Vec2 cand = p + step * grad / norm;
    const double fc = f(cand);
    if (fc <= fp) {
      break;
    }
    p = cand;
    fp = fc;
  }
  ApEstimate est;
  est.position = p;
  est.variance = model.variance(p);
  est.mean_evaluations = evals;
  return est;
}

/// Posterior mean and variance at every grid point of one search level (for plotting).
inline std::vector<FieldPoint> level_field(const TrainedGp& model, const LevelResult& level) {
  const int nx = level.nx > 0 ? level.nx : 1;
  const int ny = level.ny > 0 ? level.ny : 1;
  const Eigen::VectorXd xs = detail::grid_axis(level.region.center.x(), nx, level.spacing.x());
  const Eigen::VectorXd ys = detail::grid_axis(level.region.center.y(), ny, level.spacing.y());
  std::vector<FieldPoint> out;
  out.reserve(static_cast<std::size_t>(nx) * ny);
  for (int i = 0; i < nx; ++i) {
    for (int j = 0; j < ny; ++j) {
      const auto p = model.predict(Vec2(xs[i], ys[j]));
      out.push_back({xs[i], ys[j], p.mean, p.variance});
    }
  }
  return out;
}

}  // namespace hgprl
