#include "dheb/bayes.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <vector>

#include "dheb/error.hpp"

namespace dheb {

namespace {

std::atomic<std::uint64_t> g_posterior_updates{0};

}  // namespace

NodeSufficientStats NodeSufficientStats::from_xy(std::span<const double> x,
                                                 std::span<const double> y) {
  if (x.size() != y.size()) throw MathError("x and y lengths differ");
  NodeSufficientStats s;
  s.n = x.size();
  for (std::size_t i = 0; i < x.size(); ++i) {
    s.xtx += x[i] * x[i];
    s.xty += x[i] * y[i];
  }
  if (s.xtx > 0.0) {
    const double beta = s.xty / s.xtx;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double r = y[i] - beta * x[i];
      s.sse_ols += r * r;
    }
  }
  return s;
}

NodeSufficientStats NodeSufficientStats::from_observations(std::span<const Observation> obs) {
  NodeSufficientStats s;
  s.n = obs.size();
  for (const auto& o : obs) {
    const double x = static_cast<double>(o.clicks);
    s.xtx += x * x;
    s.xty += x * o.revenue;
  }
  if (s.xtx > 0.0) {
    const double beta = s.xty / s.xtx;
    for (const auto& o : obs) {
      const double r = o.revenue - beta * static_cast<double>(o.clicks);
      s.sse_ols += r * r;
    }
  }
  return s;
}

NodeSufficientStats NodeSufficientStats::from_members(std::span<const Observation> obs,
                                                      std::span<const std::uint32_t> members) {
  NodeSufficientStats s;
  s.n = members.size();
  for (auto m : members) {
    const double x = static_cast<double>(obs[m].clicks);
    s.xtx += x * x;
    s.xty += x * obs[m].revenue;
  }
  if (s.xtx > 0.0) {
    const double beta = s.xty / s.xtx;
    for (auto m : members) {
      const double r = obs[m].revenue - beta * static_cast<double>(obs[m].clicks);
      s.sse_ols += r * r;
    }
  }
  return s;
}

double ols(const NodeSufficientStats& stats) {
  if (!(stats.xtx > 0.0)) throw MathError("empty node: OLS undefined");
  return stats.xty / stats.xtx;
}

double residual_variance(const NodeSufficientStats& stats, double variance_floor) {
  if (stats.n < 2) throw InsufficientDataError("residual variance needs at least 2 observations");
  const double v = stats.sse_ols / static_cast<double>(stats.n - 1);
  return std::max(v, variance_floor);
}

NormalParams posterior_update(const NormalParams& prior, const NodeSufficientStats& stats,
                              double sigma_eps_sq) {
  g_posterior_updates.fetch_add(1, std::memory_order_relaxed);
  if (!std::isfinite(prior.mean) || !std::isfinite(prior.variance) ||
      !std::isfinite(sigma_eps_sq) || !std::isfinite(stats.xtx) || !std::isfinite(stats.xty)) {
    throw MathError("posterior_update: non-finite input");
  }
  if (!(prior.variance > 0.0) || !(sigma_eps_sq > 0.0)) {
    throw MathError("posterior_update: variances must be positive");
  }
  if (stats.xtx == 0.0) return prior;

  const double prior_precision = 1.0 / prior.variance;
  const double data_precision = stats.xtx / sigma_eps_sq;
  const double precision = prior_precision + data_precision;
  const double weight = data_precision / precision;
  const double beta_ols = stats.xty / stats.xtx;
  return NormalParams{prior.mean + weight * (beta_ols - prior.mean), 1.0 / precision};
}

NormalParams empirical_prior(std::span<const Observation> obs, double variance_floor) {
  double sum_x = 0.0;
  double sum_y = 0.0;
  for (const auto& o : obs) {
    sum_x += static_cast<double>(o.clicks);
    sum_y += o.revenue;
  }
  if (sum_x < 2.0) throw MathError("empirical prior needs at least 2 total clicks");
  const double mean = sum_y / sum_x;
  double weighted = 0.0;
  for (const auto& o : obs) {
    const double x = static_cast<double>(o.clicks);
    const double d = o.revenue / x - mean;
    weighted += x * d * d;
  }
  return NormalParams{mean, std::max(weighted / (sum_x - 1.0), variance_floor)};
}

std::uint64_t posterior_update_count() {
  return g_posterior_updates.load(std::memory_order_relaxed);
}

}  // namespace dheb
