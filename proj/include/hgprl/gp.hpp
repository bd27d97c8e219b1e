#pragma once

// Gaussian-process regression of RSSI over planar positions: squared-exponential
// kernel with a constant mean, hyperparameter fitting by maximizing the log
// marginal likelihood, and cached-Cholesky posterior queries.

#include <algorithm>
#include <array>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "hgprl/common.hpp"

namespace hgprl {

struct RssiSample {
  Vec2 position;  // meters, in the owning robot's local frame
  double rssi;    // dBm
};

struct GpHyperParams {
  double signal_variance = 1.0;  // sigma_f^2, dBm^2
  double length_scale = 1.0;     // l, meters
  double noise_variance = 0.0;   // sigma_n^2, dBm^2
  double mean = 0.0;             // constant prior mean, dBm

  bool valid() const {
    return std::isfinite(signal_variance) && std::isfinite(length_scale) &&
           std::isfinite(noise_variance) && std::isfinite(mean) && signal_variance > 0.0 &&
           length_scale > 0.0 && noise_variance >= 0.0;
  }

  void validate() const {
    if (!valid()) {
      throw InvalidArgument("GpHyperParams: require signal_variance > 0, length_scale > 0, "
                            "noise_variance >= 0, all finite");
    }
  }
};

/// Box constraints for the hyperparameter search.
struct HyperBounds {
  double signal_variance_min = 1e-4;
  double signal_variance_max = 1e4;
  double length_scale_min = 0.01;
  double length_scale_max = 100.0;
  double noise_variance_min = 1e-6;
  double noise_variance_max = 1e3;
};

struct FitBudget {
  std::size_t max_training_points = 100;
  int restarts = 5;
  std::uint64_t seed = 0;
  HyperBounds bounds{};
  /// Previous optimum; when set, the search starts there (plus the data-driven guess)
  /// instead of running the full multi-start.
  std::optional<GpHyperParams> warm_start;
  /// Receives non-fatal data warnings (RSSI outside [-100, 0] dBm).
  std::function<void(const std::string&)> on_warning;
};

struct Prediction {
  double mean;      // dBm
  double variance;  // dBm^2
};

/// sigma_f^2 * exp(-|x - x'|^2 / (2 l^2)).
inline double se_kernel(const Vec2& x, const Vec2& x_prime, const GpHyperParams& hp) {
  const double sq = (x - x_prime).squaredNorm();
  return hp.signal_variance * std::exp(-sq / (2.0 * hp.length_scale * hp.length_scale));
}

/// Throws on non-finite samples; returns a warning per RSSI value outside [-100, 0] dBm.
inline std::vector<std::string> check_samples(std::span<const RssiSample> samples) {
  std::vector<std::string> warnings;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    if (!is_finite(s.position) || !std::isfinite(s.rssi)) {
      throw InvalidArgument("sample " + std::to_string(i) + " is not finite");
    }
    if (s.rssi < -100.0 || s.rssi > 0.0) {
      warnings.push_back("sample " + std::to_string(i) + " rssi " + std::to_string(s.rssi) +
                         " dBm outside [-100, 0]");
    }
  }
  return warnings;
}

namespace detail {

inline constexpr double kLog2Pi = 1.8378770664093454835606594728112;

inline Eigen::MatrixXd squared_distances(std::span<const Vec2> xs) {
  const auto m = static_cast<Eigen::Index>(xs.size());
  Eigen::MatrixXd d(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    d(i, i) = 0.0;
    for (Eigen::Index j = 0; j < i; ++j) {
      d(i, j) = d(j, i) = (xs[i] - xs[j]).squaredNorm();
    }
  }
  return d;
}

inline Eigen::MatrixXd kernel_from_distances(const Eigen::MatrixXd& sq_dist,
                                             const GpHyperParams& hp) {
  const double inv = -1.0 / (2.0 * hp.length_scale * hp.length_scale);
  Eigen::MatrixXd k = (sq_dist.array() * inv).exp() * hp.signal_variance;
  k.diagonal().array() += hp.noise_variance;
  return k;
}

/// Factorizes `k` as-is; on failure retries with 1e-8 sigma_f^2 and then 1e-7 sigma_f^2
/// added to the diagonal. Returns the jitter used, or nullopt.
inline std::optional<double> factorize(const Eigen::MatrixXd& k, double signal_variance,
                                       Eigen::LLT<Eigen::MatrixXd>& llt) {
  for (const double rel : {0.0, 1e-8, 1e-7}) {
    const double jitter = rel * signal_variance;
    if (jitter == 0.0) {
      llt.compute(k);
    } else {
      Eigen::MatrixXd kj = k;
      kj.diagonal().array() += jitter;
      llt.compute(kj);
    }
    if (llt.info() == Eigen::Success) {
      return jitter;
    }
  }
  return std::nullopt;
}

inline double lml_from_factor(const Eigen::LLT<Eigen::MatrixXd>& llt,
                              const Eigen::VectorXd& residual) {
  const Eigen::VectorXd alpha = llt.solve(residual);
  const double log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  const double m = static_cast<double>(residual.size());
  return -0.5 * residual.dot(alpha) - 0.5 * log_det - 0.5 * m * kLog2Pi;
}

/// Partial Fisher-Yates; returned indices are sorted so subset order follows input order.
inline std::vector<std::size_t> choose_subset(std::size_t n, std::size_t k, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace detail

/// log p(y | X, theta) with the kernel matrix factorized exactly (no jitter).
inline double log_marginal_likelihood(std::span<const RssiSample> samples,
                                      const GpHyperParams& hp) {
  hp.validate();
  if (samples.size() < 2) {
    throw InvalidArgument("log_marginal_likelihood needs at least 2 samples");
  }
  std::vector<Vec2> xs;
  Eigen::VectorXd residual(static_cast<Eigen::Index>(samples.size()));
  for (std::size_t i = 0; i < samples.size(); ++i) {
    xs.push_back(samples[i].position);
    residual[static_cast<Eigen::Index>(i)] = samples[i].rssi - hp.mean;
  }
  Eigen::LLT<Eigen::MatrixXd> llt(detail::kernel_from_distances(detail::squared_distances(xs), hp));
  if (llt.info() != Eigen::Success) {
    throw FactorizationFailure("K + noise I is not positive definite");
  }
  return detail::lml_from_factor(llt, residual);
}

/// Posterior state of a GP conditioned on a training set. Immutable once built.
class TrainedGp {
 public:
  /// Conditions on `samples` with fixed hyperparameters (the mean is taken from `hp`).
  TrainedGp(std::span<const RssiSample> samples, const GpHyperParams& hp) : hp_(hp) {
    hp.validate();
    if (samples.size() < 2) {
      throw InvalidArgument("TrainedGp needs at least 2 samples");
    }
    const auto m = static_cast<Eigen::Index>(samples.size());
    inputs_.reserve(samples.size());
    targets_.resize(m);
    x_.resize(m);
    y_.resize(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      const auto& s = samples[static_cast<std::size_t>(i)];
      inputs_.push_back(s.position);
      targets_[i] = s.rssi;
      x_[i] = s.position.x();
      y_[i] = s.position.y();
    }
    const Eigen::MatrixXd k = detail::kernel_from_distances(detail::squared_distances(inputs_), hp);
    Eigen::LLT<Eigen::MatrixXd> llt;
    const auto jitter = detail::factorize(k, hp.signal_variance, llt);
    if (!jitter) {
      throw FactorizationFailure("K + noise I is not positive definite even with jitter");
    }
    jitter_ = *jitter;
    lower_ = llt.matrixL();
    alpha_ = llt.solve((targets_.array() - hp.mean).matrix());
  }

  const GpHyperParams& hyperparams() const noexcept { return hp_; }
  const std::vector<Vec2>& inputs() const noexcept { return inputs_; }
  const Eigen::VectorXd& targets() const noexcept { return targets_; }
  /// (K + sigma_n^2 I)^-1 (y - mu).
  const Eigen::VectorXd& alpha() const noexcept { return alpha_; }
  /// Lower Cholesky factor of K + sigma_n^2 I (+ jitter).
  const Eigen::MatrixXd& cholesky_lower() const noexcept { return lower_; }
  double jitter() const noexcept { return jitter_; }
  std::size_t size() const noexcept { return inputs_.size(); }

  Eigen::VectorXd cross_covariance(const Vec2& q) const {
    const double inv = -1.0 / (2.0 * hp_.length_scale * hp_.length_scale);
    Eigen::VectorXd k(static_cast<Eigen::Index>(inputs_.size()));
    for (Eigen::Index i = 0; i < k.size(); ++i) {
      const double dx = q.x() - x_[i];
      const double dy = q.y() - y_[i];
      k[i] = hp_.signal_variance * std::exp((dx * dx + dy * dy) * inv);
    }
    return k;
  }

  double mean(const Vec2& q) const { return hp_.mean + cross_covariance(q).dot(alpha_); }

  double variance(const Vec2& q) const {
    const Eigen::VectorXd k = cross_covariance(q);
    const Eigen::VectorXd v = lower_.triangularView<Eigen::Lower>().solve(k);
    return std::max(0.0, hp_.signal_variance - v.squaredNorm());
  }

  Prediction predict(const Vec2& q) const {
    const Eigen::VectorXd k = cross_covariance(q);
    const Eigen::VectorXd v = lower_.triangularView<Eigen::Lower>().solve(k);
    return {hp_.mean + k.dot(alpha_), std::max(0.0, hp_.signal_variance - v.squaredNorm())};
  }

  std::vector<Prediction> predict(std::span<const Vec2> queries) const {
    std::vector<Prediction> out;
    out.reserve(queries.size());
    for (const auto& q : queries) {
      out.push_back(predict(q));
    }
    return out;
  }

  /// Posterior means on the tensor grid xs x ys; entry (i, j) is at (xs[i], ys[j]).
  /// The SE kernel factorizes over axes, so this costs O((nx + ny) M) exponentials
  /// plus one nx x M x ny product.
  Eigen::MatrixXd mean_grid(const Eigen::VectorXd& xs, const Eigen::VectorXd& ys) const {
    const double inv = -1.0 / (2.0 * hp_.length_scale * hp_.length_scale);
    const auto axis = [&](const Eigen::VectorXd& pts, const Eigen::VectorXd& train) {
      Eigen::MatrixXd e(pts.size(), train.size());
      for (Eigen::Index m = 0; m < train.size(); ++m) {
        e.col(m) = ((pts.array() - train[m]).square() * inv).exp();
      }
      return e;
    };
    const Eigen::MatrixXd ex = axis(xs, x_);
    const Eigen::MatrixXd ey = axis(ys, y_);
    const Eigen::VectorXd w = alpha_ * hp_.signal_variance;
    Eigen::MatrixXd means = ex * w.asDiagonal() * ey.transpose();
    means.array() += hp_.mean;
    return means;
  }

 private:
  GpHyperParams hp_;
  std::vector<Vec2> inputs_;
  Eigen::VectorXd targets_;
  Eigen::VectorXd x_, y_;
  Eigen::MatrixXd lower_;
  Eigen::VectorXd alpha_;
  double jitter_ = 0.0;
};

/// Uniform random subset of `k` samples without replacement, in input order.
inline std::vector<RssiSample> select_subset(std::span<const RssiSample> samples, std::size_t k,
                                             std::uint64_t seed) {
  if (k >= samples.size()) {
    return {samples.begin(), samples.end()};
  }
  std::vector<RssiSample> out;
  out.reserve(k);
  for (const auto i : detail::choose_subset(samples.size(), k, seed)) {
    out.push_back(samples[i]);
  }
  return out;
}

namespace detail {

/// Objective over log-hyperparameters (log sf2, log l, log sn2) for a fixed training set.
class LmlObjective {
 public:
  LmlObjective(std::span<const RssiSample> samples, double mean) : mean_(mean) {
    std::vector<Vec2> xs;
    residual_.resize(static_cast<Eigen::Index>(samples.size()));
    for (std::size_t i = 0; i < samples.size(); ++i) {
      xs.push_back(samples[i].position);
      residual_[static_cast<Eigen::Index>(i)] = samples[i].rssi - mean;
    }
    sq_dist_ = squared_distances(xs);
  }

  GpHyperParams params(const std::array<double, 3>& theta) const {
    return {std::exp(theta[0]), std::exp(theta[1]), std::exp(theta[2]), mean_};
  }

  double operator()(const std::array<double, 3>& theta) {
    ++evaluations_;
    const GpHyperParams hp = params(theta);
    Eigen::LLT<Eigen::MatrixXd> llt;
    if (!factorize(kernel_from_distances(sq_dist_, hp), hp.signal_variance, llt)) {
      return -std::numeric_limits<double>::infinity();
    }
    const double v = lml_from_factor(llt, residual_);
    return std::isfinite(v) ? v : -std::numeric_limits<double>::infinity();
  }

  int evaluations() const noexcept { return evaluations_; }

 private:
  double mean_;
  Eigen::VectorXd residual_;
  Eigen::MatrixXd sq_dist_;
  int evaluations_ = 0;
};

struct LogBox {
  std::array<double, 3> lo;
  std::array<double, 3> hi;

  explicit LogBox(const HyperBounds& b)
      : lo{std::log(b.signal_variance_min), std::log(b.length_scale_min),
           std::log(b.noise_variance_min)},
        hi{std::log(b.signal_variance_max), std::log(b.length_scale_max),
           std::log(b.noise_variance_max)} {}

  std::array<double, 3> clamp(std::array<double, 3> t) const {
    for (int d = 0; d < 3; ++d) {
      t[d] = std::clamp(t[d], lo[d], hi[d]);
    }
    return t;
  }
};

/// Compass search: try +/- step along each log-coordinate, halve the step when no move
/// improves, stop once the step falls below `min_step`.
inline std::pair<std::array<double, 3>, double> coordinate_ascent(LmlObjective& f,
                                                                  const LogBox& box,
                                                                  std::array<double, 3> theta,
                                                                  double min_step = 1e-3,
                                                                  int max_evals = 600) {
  theta = box.clamp(theta);
  double best = f(theta);
  double step = 1.0;
  int evals = 1;
  while (step >= min_step && evals < max_evals) {
    bool improved = false;
    for (int d = 0; d < 3; ++d) {
      for (const double sign : {1.0, -1.0}) {
        auto cand = theta;
        cand[d] += sign * step;
        cand = box.clamp(cand);
        if (cand[d] == theta[d]) {
          continue;
        }
        const double v = f(cand);
        ++evals;
        if (v > best + 1e-12) {
          best = v;
          theta = cand;
          improved = true;
          break;
        }
      }
    }
    if (!improved) {
      step *= 0.5;
    }
  }
  return {theta, best};
}

}  // namespace detail

/// Fits hyperparameters by multi-start compass search on the log marginal likelihood and
/// conditions on the (possibly subsampled) training set. The prior mean is the sample mean.
inline TrainedGp fit(std::span<const RssiSample> samples, const FitBudget& budget = {}) {
  if (samples.size() < 2) {
    throw DegenerateData("fit needs at least 2 samples");
  }
  const auto warnings = check_samples(samples);
  if (budget.on_warning) {
    for (const auto& w : warnings) {
      budget.on_warning(w);
    }
  }
  const bool distinct = std::any_of(samples.begin() + 1, samples.end(), [&](const RssiSample& s) {
    return s.position != samples.front().position;
  });
  if (!distinct) {
    throw DegenerateData("all sample positions coincide");
  }
  if (budget.max_training_points < 2) {
    throw InvalidArgument("max_training_points must be >= 2");
  }

  std::vector<RssiSample> train =
      select_subset(samples, budget.max_training_points, mix_seed(budget.seed, 0));
  if (std::all_of(train.begin() + 1, train.end(),
                  [&](const RssiSample& s) { return s.position == train.front().position; })) {
    throw DegenerateData("selected subset has a single distinct position");
  }

  double mean = 0.0;
  for (const auto& s : train) {
    mean += s.rssi;
  }
  mean /= static_cast<double>(train.size());
  double var = 0.0;
  Vec2 lo = train.front().position;
  Vec2 hi = lo;
  for (const auto& s : train) {
    var += (s.rssi - mean) * (s.rssi - mean);
    lo = lo.cwiseMin(s.position);
    hi = hi.cwiseMax(s.position);
  }
  var = std::max(var / static_cast<double>(train.size()), 1e-3);
  const double extent = std::max((hi - lo).maxCoeff(), 0.05);

  detail::LmlObjective objective(train, mean);
  const detail::LogBox box(budget.bounds);

  std::vector<std::array<double, 3>> starts;
  if (budget.warm_start) {
    const auto& w = *budget.warm_start;
    starts.push_back({std::log(w.signal_variance), std::log(w.length_scale),
                      std::log(std::max(w.noise_variance, budget.bounds.noise_variance_min))});
  }
  starts.push_back({std::log(var), std::log(0.25 * extent), std::log(0.1 * var)});
  if (!budget.warm_start) {
    // Best node of a coarse 5^3 log-grid over the bounds.
    std::array<double, 3> grid_best{};
    double grid_val = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < 5; ++a) {
      for (int b = 0; b < 5; ++b) {
        for (int c = 0; c < 5; ++c) {
          const std::array<double, 3> t{box.lo[0] + (box.hi[0] - box.lo[0]) * a / 4.0,
                                        box.lo[1] + (box.hi[1] - box.lo[1]) * b / 4.0,
                                        box.lo[2] + (box.hi[2] - box.lo[2]) * c / 4.0};
          const double v = objective(t);
          if (v > grid_val) {
            grid_val = v;
            grid_best = t;
          }
        }
      }
    }
    starts.push_back(grid_best);
    std::mt19937_64 rng(mix_seed(budget.seed, 1));
    while (static_cast<int>(starts.size()) < budget.restarts) {
      std::array<double, 3> t{};
      for (int d = 0; d < 3; ++d) {
        t[d] = std::uniform_real_distribution<double>(box.lo[d], box.hi[d])(rng);
      }
      starts.push_back(t);
    }
    starts.resize(static_cast<std::size_t>(std::max(budget.restarts, 1)));
  }

  std::array<double, 3> best_theta = box.clamp(starts.front());
  double best_val = -std::numeric_limits<double>::infinity();
  for (const auto& s : starts) {
    const auto [theta, val] = detail::coordinate_ascent(objective, box, s);
    if (val > best_val) {
      best_val = val;
      best_theta = theta;
    }
  }
  if (!std::isfinite(best_val)) {
    throw FactorizationFailure("no hyperparameter setting gave a factorizable kernel matrix");
  }
  return TrainedGp(train, objective.params(best_theta));
}

}  // namespace hgprl
