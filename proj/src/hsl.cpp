#include "dheb/hsl.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "dheb/error.hpp"

namespace dheb {

namespace {

double sse_at(std::span<const Observation> obs, std::span<const std::uint32_t> members,
              double beta) {
  double sse = 0.0;
  for (auto m : members) {
    const double r = obs[m].revenue - beta * static_cast<double>(obs[m].clicks);
    sse += r * r;
  }
  return sse;
}

void check_children(const NormalParams& parent_prior, std::span<const ChildInput> children) {
  if (children.empty()) throw MathError("hsl_loss: no children");
  if (!(parent_prior.variance > 0.0)) throw MathError("hsl_loss: prior variance must be positive");
  for (const auto& c : children) {
    if (!(c.stats.xtx > 0.0)) throw MathError("hsl_loss: empty child '" + c.category + "'");
    if (!(c.sigma_eps_sq > 0.0)) throw MathError("hsl_loss: child residual variance must be positive");
  }
}

ChildLoss child_loss(const NormalParams& prior, const ChildInput& c, double beta) {
  const double alpha = c.stats.xtx / c.sigma_eps_sq;
  const double gamma = 1.0 / prior.variance;
  const double dev_ols = beta - ols(c.stats);
  const double dev_prior = beta - prior.mean;
  return ChildLoss{c.category, c.stats.n, alpha * dev_ols * dev_ols,
                   gamma * dev_prior * dev_prior, beta};
}

}  // namespace

LossBreakdown hsl_loss(const NormalParams& parent_prior, std::span<const ChildInput> children) {
  check_children(parent_prior, children);
  LossBreakdown out;
  out.per_child.reserve(children.size());
  for (const auto& c : children) {
    const double beta = posterior_update(parent_prior, c.stats, c.sigma_eps_sq).mean;
    auto term = child_loss(parent_prior, c, beta);
    out.total += static_cast<double>(term.n) * (term.within + term.parent);
    out.per_child.push_back(std::move(term));
  }
  return out;
}

double hsl_loss_at(const NormalParams& parent_prior, std::span<const ChildInput> children,
                   std::span<const double> beta) {
  check_children(parent_prior, children);
  if (beta.size() != children.size()) throw MathError("hsl_loss_at: one beta per child required");
  double total = 0.0;
  for (std::size_t j = 0; j < children.size(); ++j) {
    const auto term = child_loss(parent_prior, children[j], beta[j]);
    total += static_cast<double>(term.n) * (term.within + term.parent);
  }
  return total;
}

bool should_stop(double parent_sse, double children_sse, double r) {
  if (parent_sse <= 0.0) return true;
  return children_sse / parent_sse > r;
}

double child_sigma_eps_sq(const NodeSufficientStats& stats, double fallback,
                          double variance_floor) {
  if (stats.n < 2) return fallback;
  const double v = residual_variance(stats, variance_floor);
  return v > variance_floor ? v : std::max(fallback, variance_floor);
}

Partition partition_members(std::span<const Observation> observations,
                            std::span<const std::uint32_t> members, std::size_t feature,
                            const FeatureSchema& schema) {
  std::unordered_map<std::uint32_t, std::size_t> slot;
  Partition p;
  p.feature = feature;
  for (auto m : members) {
    const auto cat = observations[m].features[feature];
    auto [it, inserted] = slot.emplace(cat, p.parts.size());
    if (inserted) p.parts.push_back(PartitionPart{cat, {}});
    p.parts[it->second].members.push_back(m);
  }
  const auto& domain = schema.feature(feature).domain;
  std::sort(p.parts.begin(), p.parts.end(), [&](const auto& a, const auto& b) {
    return domain.value(a.category) < domain.value(b.category);
  });
  return p;
}

SplitDecision select_split(const NodeContext& node, const SplitConfig& config) {
  if (node.schema == nullptr) throw ConfigError("select_split: schema required");
  if (node.members.empty()) throw MathError("select_split: empty node");
  if (node.available_features.empty()) throw ConfigError("select_split: no candidate features");

  SplitDecision decision;
  std::optional<double> best_total;
  std::optional<Partition> best_partition;
  std::vector<double> best_betas;

  // Deterministic order: by feature name, so the strict '<' keeps the
  // lexicographically smallest name on ties.
  std::vector<std::size_t> candidates(node.available_features.begin(),
                                      node.available_features.end());
  std::sort(candidates.begin(), candidates.end(), [&](std::size_t a, std::size_t b) {
    return node.schema->feature(a).name < node.schema->feature(b).name;
  });

  for (std::size_t f : candidates) {
    Partition part = partition_members(node.observations, node.members, f, *node.schema);
    const auto& domain = node.schema->feature(f).domain;
    std::vector<ChildInput> children;
    children.reserve(part.parts.size());
    for (const auto& pp : part.parts) {
      ChildInput c;
      c.category = domain.value(pp.category);
      c.stats = NodeSufficientStats::from_members(node.observations, pp.members);
      c.sigma_eps_sq = child_sigma_eps_sq(c.stats, node.sigma_eps_sq, config.variance_floor);
      children.push_back(std::move(c));
    }
    auto loss = hsl_loss(node.posterior, children);
    const double total = loss.total;
    const bool eligible = part.parts.size() >= 2;
    if (eligible && (!best_total || total < *best_total)) {
      best_total = total;
      best_betas.clear();
      for (const auto& c : loss.per_child) best_betas.push_back(c.beta);
      best_partition = std::move(part);
      decision.chosen_feature = node.schema->feature(f).name;
    }
    decision.losses.emplace(node.schema->feature(f).name, std::move(loss));
  }

  decision.parent_sse = sse_at(node.observations, node.members, node.posterior.mean);
  if (!best_partition) {
    decision.stopped = true;
    return decision;
  }
  double children_sse = 0.0;
  for (std::size_t j = 0; j < best_partition->parts.size(); ++j) {
    children_sse += sse_at(node.observations, best_partition->parts[j].members, best_betas[j]);
  }
  decision.children_sse = children_sse;
  decision.sse_ratio = decision.parent_sse > 0.0 ? children_sse / decision.parent_sse : 0.0;
  decision.stopped = should_stop(decision.parent_sse, children_sse, config.r);
  decision.partition = std::move(best_partition);
  return decision;
}

}  // namespace dheb
