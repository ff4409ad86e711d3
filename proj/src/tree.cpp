#include "dheb/tree.hpp"

#include <algorithm>
#include <atomic>
#include <deque>
#include <numeric>
#include <set>
#include <unordered_map>

#include "dheb/error.hpp"

namespace dheb {

namespace {

std::atomic<std::uint64_t> g_training_invocations{0};

class TreeBuilder {
 public:
  TreeBuilder(const Dataset& ds, const TrainConfig& config) : ds_(ds), config_(config) {
    if (ds.empty()) throw ConfigError("cannot train on an empty dataset");
    const auto obs = ds.observations();
    std::vector<std::uint32_t> all(obs.size());
    std::iota(all.begin(), all.end(), 0u);

    TreeNode root;
    root.prior = empirical_prior(obs, config.variance_floor);
    // The root hands the empirical prior straight to its children.
    root.posterior = root.prior;
    const auto stats = NodeSufficientStats::from_members(obs, all);
    root.sigma_eps_sq = stats.n >= 2 ? residual_variance(stats, config.variance_floor)
                                     : root.prior.variance;
    root.n_obs = obs.size();
    nodes_.push_back(std::move(root));
    members_.push_back(std::move(all));
    used_.emplace_back();
  }

  const Dataset& dataset() const { return ds_; }
  const TrainConfig& config() const { return config_; }
  std::vector<TreeNode>& nodes() { return nodes_; }
  const std::vector<std::uint32_t>& members(NodeId id) const { return members_[id]; }
  const std::vector<std::size_t>& used(NodeId id) const { return used_[id]; }

  NodeId add_child(NodeId parent, std::string category, std::vector<std::uint32_t> members,
                   bool bid_unit_leaf, std::optional<std::size_t> split_feature) {
    const auto obs = ds_.observations();
    TreeNode child;
    child.id = static_cast<NodeId>(nodes_.size());
    child.parent = parent;
    child.depth = nodes_[parent].depth + 1;
    child.category = category;
    child.prior = nodes_[parent].posterior;
    const auto stats = NodeSufficientStats::from_members(obs, members);
    child.sigma_eps_sq =
        child_sigma_eps_sq(stats, nodes_[parent].sigma_eps_sq, config_.variance_floor);
    child.posterior = posterior_update(child.prior, stats, child.sigma_eps_sq);
    child.n_obs = members.size();
    child.is_bid_unit_leaf = bid_unit_leaf;
    nodes_[parent].children.emplace(std::move(category), child.id);

    auto used = used_[parent];
    if (split_feature) used.push_back(*split_feature);
    nodes_.push_back(std::move(child));
    members_.push_back(std::move(members));
    used_.push_back(std::move(used));
    return nodes_.back().id;
  }

  std::vector<NodeId> split(NodeId id, const Partition& partition) {
    const auto& domain = ds_.schema().feature(partition.feature).domain;
    nodes_[id].split_feature = ds_.schema().feature(partition.feature).name;
    std::vector<NodeId> created;
    for (const auto& part : partition.parts) {
      created.push_back(
          add_child(id, domain.value(part.category), part.members, false, partition.feature));
    }
    return created;
  }

  // One leaf per bid unit under every structural leaf, in node-id order.
  void attach_bid_units() {
    const std::size_t structural = nodes_.size();
    const auto obs = ds_.observations();
    for (NodeId id = 0; id < structural; ++id) {
      if (!nodes_[id].children.empty()) continue;
      std::map<std::string, std::vector<std::uint32_t>> by_unit;
      for (auto m : members_[id]) by_unit[ds_.bid_unit_id(obs[m])].push_back(m);
      for (auto& [unit, members] : by_unit) add_child(id, unit, std::move(members), true, {});
    }
  }

  HierarchyModel finish(std::string method, std::vector<std::string> fixed_order) {
    return HierarchyModel(ds_.schema().feature_names(), std::move(nodes_), config_,
                          ds_.date_range(), std::move(method), std::move(fixed_order));
  }

 private:
  const Dataset& ds_;
  TrainConfig config_;
  std::vector<TreeNode> nodes_;
  std::vector<std::vector<std::uint32_t>> members_;
  std::vector<std::vector<std::size_t>> used_;
};

void validate_config(const TrainConfig& config) {
  if (!(config.r > 0.0 && config.r <= 1.0)) throw ConfigError("r must lie in (0, 1]");
  if (!(config.variance_floor > 0.0)) throw ConfigError("variance_floor must be positive");
}

}  // namespace

HierarchyModel::HierarchyModel(std::vector<std::string> feature_names,
                               std::vector<TreeNode> nodes, TrainConfig config,
                               std::optional<DateRange> training_range, std::string method,
                               std::vector<std::string> fixed_order)
    : feature_names_(std::move(feature_names)),
      nodes_(std::move(nodes)),
      config_(std::move(config)),
      training_range_(training_range),
      method_(std::move(method)),
      fixed_order_(std::move(fixed_order)) {
  if (nodes_.empty()) throw ModelFormatError("model has no nodes");
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const auto& n = nodes_[i];
    if (n.id != i) throw ModelFormatError("node ids must equal their positions");
    if (i == 0) {
      if (n.parent || n.depth != 0) throw ModelFormatError("node 0 must be the root");
    } else {
      if (!n.parent || *n.parent >= i) {
        throw ModelFormatError("node " + std::to_string(i) + " has an invalid parent");
      }
      const auto& p = nodes_[*n.parent];
      if (!n.category || n.depth != p.depth + 1) {
        throw ModelFormatError("node " + std::to_string(i) + " is inconsistent with its parent");
      }
      auto it = p.children.find(*n.category);
      if (it == p.children.end() || it->second != i) {
        throw ModelFormatError("node " + std::to_string(i) + " missing from its parent");
      }
      if (p.is_bid_unit_leaf) throw ModelFormatError("bid-unit leaves cannot have children");
    }
    for (const auto& [cat, child] : n.children) {
      if (child >= nodes_.size() || nodes_[child].parent != n.id) {
        throw ModelFormatError("node " + std::to_string(i) + " has a dangling child");
      }
    }
    if (n.split_feature &&
        std::find(feature_names_.begin(), feature_names_.end(), *n.split_feature) ==
            feature_names_.end()) {
      throw ModelFormatError("unknown split feature '" + *n.split_feature + "'");
    }
    if (!(n.prior.variance > 0.0) || !(n.posterior.variance > 0.0) || !(n.sigma_eps_sq > 0.0)) {
      throw ModelFormatError("node " + std::to_string(i) + " has a non-positive variance");
    }
  }
}

bool HierarchyModel::operator==(const HierarchyModel& other) const {
  return feature_names_ == other.feature_names_ && nodes_ == other.nodes_ &&
         config_ == other.config_ && training_range_ == other.training_range_ &&
         method_ == other.method_ && fixed_order_ == other.fixed_order_;
}

PredictionResult HierarchyModel::predict(const Query& query) const {
  const TreeNode* node = &nodes_.front();
  while (!node->is_bid_unit_leaf && !node->children.empty()) {
    std::optional<std::string> key;
    if (node->split_feature) {
      key = query.feature(*node->split_feature);
    } else {
      key = query.bid_unit_id;
    }
    if (!key) break;
    auto it = node->children.find(*key);
    if (it == node->children.end()) break;
    node = &nodes_[it->second];
  }
  return PredictionResult{node->posterior.mean, node->id, node->depth};
}

std::vector<std::pair<std::string, std::string>> HierarchyModel::category_path(NodeId id) const {
  std::vector<std::pair<std::string, std::string>> path;
  const TreeNode* n = &nodes_.at(id);
  while (n->parent) {
    const TreeNode& p = nodes_[*n->parent];
    path.emplace_back(p.split_feature.value_or("bid_unit_id"), n->category.value_or(""));
    n = &p;
  }
  std::reverse(path.begin(), path.end());
  return path;
}

std::uint32_t HierarchyModel::max_depth() const {
  std::uint32_t d = 0;
  for (const auto& n : nodes_) d = std::max(d, n.depth);
  return d;
}

std::vector<std::vector<std::string>> HierarchyModel::split_paths() const {
  std::vector<std::vector<std::string>> paths;
  for (const auto& n : nodes_) {
    if (n.is_bid_unit_leaf || n.split_feature) continue;
    std::vector<std::string> path;
    for (const auto& [feature, category] : category_path(n.id)) path.push_back(feature);
    paths.push_back(std::move(path));
  }
  return paths;
}

HierarchyModel train_dheb(const Dataset& ds, const TrainConfig& config) {
  g_training_invocations.fetch_add(1, std::memory_order_relaxed);
  validate_config(config);
  TreeBuilder builder(ds, config);
  const std::size_t k = ds.schema().num_features();
  const SplitConfig split_config{config.r, config.variance_floor};

  std::deque<NodeId> frontier{0};
  while (!frontier.empty()) {
    const NodeId id = frontier.front();
    frontier.pop_front();
    std::vector<std::size_t> available;
    const auto& used = builder.used(id);
    for (std::size_t f = 0; f < k; ++f) {
      if (std::find(used.begin(), used.end(), f) == used.end()) available.push_back(f);
    }
    if (available.empty()) continue;

    const TreeNode& node = builder.nodes()[id];
    NodeContext ctx;
    ctx.observations = ds.observations();
    ctx.members = builder.members(id);
    ctx.schema = &ds.schema();
    ctx.available_features = available;
    ctx.posterior = node.posterior;
    ctx.sigma_eps_sq = node.sigma_eps_sq;
    const auto decision = select_split(ctx, split_config);
    if (decision.stopped || !decision.partition) continue;
    for (NodeId child : builder.split(id, *decision.partition)) frontier.push_back(child);
  }
  builder.attach_bid_units();
  return builder.finish("dheb", {});
}

HierarchyModel train_fheb(const Dataset& ds, const std::vector<std::string>& order,
                          const TrainConfig& config) {
  g_training_invocations.fetch_add(1, std::memory_order_relaxed);
  validate_config(config);
  std::vector<std::size_t> levels;
  for (const auto& name : order) {
    const auto idx = ds.schema().feature_index(name);
    if (!idx) throw ConfigError("unknown feature '" + name + "' in hierarchy order");
    if (std::find(levels.begin(), levels.end(), *idx) != levels.end()) {
      throw ConfigError("feature '" + name + "' repeated in hierarchy order");
    }
    levels.push_back(*idx);
  }
  TreeBuilder builder(ds, config);

  std::deque<NodeId> frontier{0};
  while (!frontier.empty()) {
    const NodeId id = frontier.front();
    frontier.pop_front();
    const auto depth = builder.nodes()[id].depth;
    if (depth >= levels.size()) continue;
    const auto partition = partition_members(ds.observations(), builder.members(id),
                                             levels[depth], ds.schema());
    for (NodeId child : builder.split(id, partition)) frontier.push_back(child);
  }
  builder.attach_bid_units();
  return builder.finish(order.empty() ? "2hb" : "fheb", order);
}

std::uint64_t training_invocation_count() {
  return g_training_invocations.load(std::memory_order_relaxed);
}

std::size_t hierarchy_edit_distance(const HierarchyModel& a, const HierarchyModel& b) {
  const auto pa = a.split_paths();
  const auto pb = b.split_paths();
  const std::set<std::vector<std::string>> sa(pa.begin(), pa.end());
  const std::set<std::vector<std::string>> sb(pb.begin(), pb.end());
  std::vector<std::vector<std::string>> diff;
  std::set_symmetric_difference(sa.begin(), sa.end(), sb.begin(), sb.end(),
                                std::back_inserter(diff));
  return diff.size();
}

}  // namespace dheb
