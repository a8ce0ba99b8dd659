#pragma once

// Gaussian-process surrogate and Expected Improvement acquisition for
// minimization.

#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "circularity/errors.hpp"

namespace circularity {

inline double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }
inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

/// E[max(0, f_best - f)] for f ~ N(mu, sigma²).
inline double expected_improvement(double mu, double sigma, double f_best) {
  if (sigma < 0.0 || std::isnan(sigma)) throw Error(ErrorCode::NegativeSigma, "sigma must be >= 0");
  const double gap = f_best - mu;
  if (sigma == 0.0) return std::max(0.0, gap);
  const double z = gap / sigma;
  return std::max(0.0, gap * normal_cdf(z) + sigma * normal_pdf(z));
}

struct RbfKernel {
  double length_scale = 0.5;
  double signal_variance = 1.0;

  double operator()(std::span<const double> a, std::span<const double> b) const {
    double d2 = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d2 += (a[i] - b[i]) * (a[i] - b[i]);
    return signal_variance * std::exp(-0.5 * d2 / (length_scale * length_scale));
  }
};

struct GpOptions {
  double jitter = 1e-6;      // added to the diagonal, standardized units
  double max_jitter = 1e-2;  // escalation ceiling (x10 per step)
  std::vector<double> length_scales = {0.05, 0.1, 0.2, 0.35, 0.5, 0.75, 1.0, 1.5, 2.5};
  std::vector<double> signal_variances = {0.25, 1.0, 4.0};
  std::optional<RbfKernel> fixed_kernel;  // skips the likelihood grid search
};

struct Posterior {
  double mean = 0.0;
  double stddev = 0.0;
};

/// Fitted GP over points in the unit hypercube. Objectives are standardized
/// internally; posterior() answers in the original units.
class SurrogateState {
 public:
  const std::vector<std::vector<double>>& points() const { return points_; }
  const std::vector<double>& objectives() const { return objectives_; }
  const RbfKernel& kernel() const { return kernel_; }
  double jitter() const { return jitter_; }
  double log_marginal_likelihood() const { return lml_; }
  double best_objective() const { return best_; }

  Posterior posterior(std::span<const double> x) const {
    const auto n = points_.size();
    Eigen::VectorXd k(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) k(static_cast<Eigen::Index>(i)) = kernel_(x, points_[i]);
    const double mean_std = k.dot(alpha_);
    Eigen::VectorXd v = chol_.matrixL().solve(k);
    const double var_std = std::max(0.0, kernel_.signal_variance - v.squaredNorm());
    return {y_mean_ + y_scale_ * mean_std, y_scale_ * std::sqrt(var_std)};
  }

  double expected_improvement_at(std::span<const double> x) const {
    auto p = posterior(x);
    return circularity::expected_improvement(p.mean, p.stddev, best_);
  }

  friend SurrogateState fit_gp(std::vector<std::vector<double>> points, std::vector<double> objectives,
                               const GpOptions& options);

 private:
  std::vector<std::vector<double>> points_;
  std::vector<double> objectives_;
  RbfKernel kernel_;
  double jitter_ = 0.0;
  double lml_ = 0.0;
  double y_mean_ = 0.0;
  double y_scale_ = 1.0;
  double best_ = 0.0;
  Eigen::LLT<Eigen::MatrixXd> chol_;
  Eigen::VectorXd alpha_;
};

/// Fits the GP. With no fixed kernel, (length scale, signal variance) is the
/// grid point of highest log marginal likelihood; ties keep the earlier one.
inline SurrogateState fit_gp(std::vector<std::vector<double>> points, std::vector<double> objectives,
                             const GpOptions& options) {
  if (points.empty() || points.size() != objectives.size())
    throw Error(ErrorCode::NoSuccessfulTrials, "surrogate needs at least one observation");
  const auto n = static_cast<Eigen::Index>(points.size());

  double mean = 0.0;
  for (double y : objectives) mean += y;
  mean /= static_cast<double>(objectives.size());
  double var = 0.0;
  for (double y : objectives) var += (y - mean) * (y - mean);
  var /= static_cast<double>(objectives.size());
  const double scale = var > 0.0 ? std::sqrt(var) : 1.0;
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) y(i) = (objectives[static_cast<std::size_t>(i)] - mean) / scale;

  std::vector<RbfKernel> grid;
  if (options.fixed_kernel) {
    grid.push_back(*options.fixed_kernel);
  } else {
    for (double ls : options.length_scales)
      for (double sv : options.signal_variances) grid.push_back({ls, sv});
  }

  SurrogateState best;
  bool found = false;
  for (const auto& kernel : grid) {
    Eigen::MatrixXd K(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j <= i; ++j)
        K(i, j) = K(j, i) = kernel(points[static_cast<std::size_t>(i)], points[static_cast<std::size_t>(j)]);
    for (double jitter = options.jitter; jitter <= options.max_jitter * (1 + 1e-9);
         jitter = jitter > 0.0 ? jitter * 10.0 : 1e-10) {
      Eigen::MatrixXd Kj = K;
      Kj.diagonal().array() += jitter;
      Eigen::LLT<Eigen::MatrixXd> chol(Kj);
      if (chol.info() != Eigen::Success) continue;
      Eigen::MatrixXd L = chol.matrixL();
      if ((L.diagonal().array() <= 0.0).any()) continue;
      Eigen::VectorXd alpha = chol.solve(y);
      const double lml = -0.5 * y.dot(alpha) - L.diagonal().array().log().sum() -
                         0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
      if (!std::isfinite(lml)) continue;
      if (!found || lml > best.lml_) {
        found = true;
        best.kernel_ = kernel;
        best.jitter_ = jitter;
        best.lml_ = lml;
        best.chol_ = chol;
        best.alpha_ = alpha;
      }
      break;
    }
  }
  if (!found) throw Error(ErrorCode::SingularKernel, "kernel matrix not positive definite at maximum jitter");
  best.y_mean_ = mean;
  best.y_scale_ = scale;
  best.best_ = *std::min_element(objectives.begin(), objectives.end());
  best.points_ = std::move(points);
  best.objectives_ = std::move(objectives);
  return best;
}

}  // namespace circularity
