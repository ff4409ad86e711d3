#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

#include "dheb/data.hpp"

namespace dheb {

inline constexpr double kDefaultVarianceFloor = 1e-9;

// Normal distribution over a revenue-per-click coefficient.
struct NormalParams {
  double mean = 0.0;
  double variance = 1.0;

  double precision() const { return 1.0 / variance; }
  bool operator==(const NormalParams&) const = default;
};

// Sufficient statistics of the no-intercept regression revenue = beta * clicks
// over the observations of one node.
struct NodeSufficientStats {
  double xtx = 0.0;      // sum of clicks^2
  double xty = 0.0;      // sum of clicks * revenue
  std::size_t n = 0;     // observation count
  double sse_ols = 0.0;  // residual sum of squares at the OLS slope

  // Two passes: moments, then residuals about the OLS slope.
  static NodeSufficientStats from_xy(std::span<const double> x, std::span<const double> y);
  static NodeSufficientStats from_observations(std::span<const Observation> obs);
  // Observations selected by index.
  static NodeSufficientStats from_members(std::span<const Observation> obs,
                                          std::span<const std::uint32_t> members);
};

// xty / xtx. Throws MathError on an empty node.
double ols(const NodeSufficientStats& stats);

// sse_ols / (n - 1), floored at `variance_floor`. Throws InsufficientDataError
// when n < 2.
double residual_variance(const NodeSufficientStats& stats,
                         double variance_floor = kDefaultVarianceFloor);

// Conjugate normal update for beta given y ~ N(beta x, sigma_eps_sq I).
// Works in precisions; the mean is written as prior + w (OLS - prior) with
// w = data precision / posterior precision, so an OLS equal to the prior mean
// is an exact fixed point. An empty node returns the prior unchanged.
NormalParams posterior_update(const NormalParams& prior, const NodeSufficientStats& stats,
                              double sigma_eps_sq);

// Click-weighted empirical prior:
//   mean     = sum(y) / sum(x)
//   variance = sum(x (y/x - mean)^2) / (sum(x) - 1), floored.
// Throws MathError when sum(x) < 2.
NormalParams empirical_prior(std::span<const Observation> obs,
                             double variance_floor = kDefaultVarianceFloor);
inline NormalParams empirical_prior(const Dataset& ds,
                                    double variance_floor = kDefaultVarianceFloor) {
  return empirical_prior(ds.observations(), variance_floor);
}

// Process-wide count of posterior_update() calls. The serving path must never
// move it.
std::uint64_t posterior_update_count();

}  // namespace dheb
