#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dheb/bayes.hpp"
#include "dheb/data.hpp"

namespace dheb {

// Hierarchical shrinkage loss of splitting a parent into children. The generic
// form sums h(alpha_j f(beta_j, X_j, Y_j) + gamma_j g(beta_j, parent)) over
// children; the instantiation used here is
//   f = (beta_j - ols_j)^2,  alpha_j = xtx_j / sigma_eps_j^2,
//   g = (beta_j - mu_0)^2,   gamma_j = 1 / sigma_0^2,
//   h(v) = n_j v,
// where (mu_0, sigma_0^2) is the prior shared by the children.

struct ChildInput {
  std::string category;
  NodeSufficientStats stats;
  double sigma_eps_sq = 1.0;  // after any fallback
};

struct ChildLoss {
  std::string category;
  std::size_t n = 0;
  double within = 0.0;  // alpha_j f
  double parent = 0.0;  // gamma_j g
  double beta = 0.0;    // point at which the terms were evaluated
};

struct LossBreakdown {
  std::vector<ChildLoss> per_child;
  double total = 0.0;
};

// Loss evaluated at each child's posterior mean, which is its minimiser.
// Throws MathError for an empty child list or an empty child.
LossBreakdown hsl_loss(const NormalParams& parent_prior, std::span<const ChildInput> children);

// Loss evaluated at arbitrary child coefficients.
double hsl_loss_at(const NormalParams& parent_prior, std::span<const ChildInput> children,
                   std::span<const double> beta);

// STOP iff parent_sse == 0 or children_sse / parent_sse > r.
bool should_stop(double parent_sse, double children_sse, double r);

struct SplitConfig {
  double r = 0.95;
  double variance_floor = kDefaultVarianceFloor;
};

// One child of a candidate split: its category and the member observations.
struct PartitionPart {
  std::uint32_t category = 0;
  std::vector<std::uint32_t> members;
};

struct Partition {
  std::size_t feature = 0;
  std::vector<PartitionPart> parts;  // sorted by category value
};

Partition partition_members(std::span<const Observation> observations,
                            std::span<const std::uint32_t> members, std::size_t feature,
                            const FeatureSchema& schema);

// A node being considered for splitting.
struct NodeContext {
  std::span<const Observation> observations;
  std::span<const std::uint32_t> members;
  const FeatureSchema* schema = nullptr;
  std::span<const std::size_t> available_features;
  // The node's posterior; children inherit it as their prior and it is the
  // node's own prediction when computing SSE(parent).
  NormalParams posterior;
  // Node residual variance; used for children with fewer than 2 observations.
  double sigma_eps_sq = 1.0;
};

struct SplitDecision {
  std::optional<std::string> chosen_feature;
  std::map<std::string, LossBreakdown> losses;
  bool stopped = true;
  double sse_ratio = 0.0;
  double parent_sse = 0.0;
  double children_sse = 0.0;
  // Children of the chosen feature (kept even when stopped).
  std::optional<Partition> partition;
};

// Evaluates the loss for every available feature and picks the argmin
// (ties: smallest feature name). Features taking a single value within the
// node reproduce the parent and are reported but never chosen. The stopping
// test is then run on the chosen split.
SplitDecision select_split(const NodeContext& node, const SplitConfig& config);

// Residual variance of a child. Falls back to `fallback` when n < 2 or when
// the residuals vanish (variance at or below the floor).
double child_sigma_eps_sq(const NodeSufficientStats& stats, double fallback,
                          double variance_floor);

}  // namespace dheb
