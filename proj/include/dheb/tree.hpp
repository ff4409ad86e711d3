#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dheb/bayes.hpp"
#include "dheb/data.hpp"
#include "dheb/hsl.hpp"
#include "dheb/predictor.hpp"

namespace dheb {

using NodeId = std::uint32_t;

struct TreeNode {
  NodeId id = 0;
  std::optional<NodeId> parent;
  std::uint32_t depth = 0;
  // Feature this node splits on; empty for structural leaves (whose children
  // are bid units) and for bid-unit leaves.
  std::optional<std::string> split_feature;
  // Value of the parent's split feature, or the bid unit id for bid-unit
  // leaves. Empty for the root.
  std::optional<std::string> category;
  NormalParams prior;
  NormalParams posterior;
  double sigma_eps_sq = 1.0;
  std::size_t n_obs = 0;
  bool is_bid_unit_leaf = false;
  // Children keyed by category (or by bid unit id below a structural leaf).
  std::map<std::string, NodeId> children;

  bool operator==(const TreeNode&) const = default;
};

struct TrainConfig {
  double r = 0.95;
  double variance_floor = kDefaultVarianceFloor;
  // Stamped into the model as is. Left to the caller so training stays
  // deterministic.
  std::string trained_at;

  bool operator==(const TrainConfig&) const = default;
};

struct PredictionResult {
  double rpc = 0.0;
  NodeId node = 0;
  std::uint32_t matched_depth = 0;
};

// A trained hierarchy: structural levels chosen by the data (or fixed), with
// one leaf per bid unit below each structural leaf.
class HierarchyModel : public RpcModel {
 public:
  HierarchyModel() = default;
  // Validates structure: single root at id 0, ids equal to positions, parent
  // and child links consistent, bid-unit leaves childless. Throws
  // ModelFormatError.
  HierarchyModel(std::vector<std::string> feature_names, std::vector<TreeNode> nodes,
                 TrainConfig config, std::optional<DateRange> training_range,
                 std::string method, std::vector<std::string> fixed_order = {});

  const std::vector<std::string>& feature_names() const { return feature_names_; }
  const std::vector<TreeNode>& nodes() const { return nodes_; }
  const TreeNode& node(NodeId id) const { return nodes_.at(id); }
  const TreeNode& root() const { return nodes_.front(); }
  const TrainConfig& config() const { return config_; }
  const std::optional<DateRange>& training_range() const { return training_range_; }
  const std::string& method() const { return method_; }
  const std::vector<std::string>& fixed_order() const { return fixed_order_; }
  const std::string& trained_at() const { return config_.trained_at; }

  // Walks from the root following the query's categories and returns the
  // posterior mean of the deepest node reached.
  PredictionResult predict(const Query& query) const;
  double predict_rpc(const Query& query) const override { return predict(query).rpc; }

  // (feature, category) pairs from the root to `id`.
  std::vector<std::pair<std::string, std::string>> category_path(NodeId id) const;
  std::uint32_t max_depth() const;
  // Root-to-structural-leaf split sequences, one per structural leaf, in node
  // id order.
  std::vector<std::vector<std::string>> split_paths() const;

  bool operator==(const HierarchyModel& other) const;

 private:
  std::vector<std::string> feature_names_;
  std::vector<TreeNode> nodes_;
  TrainConfig config_;
  std::optional<DateRange> training_range_;
  std::string method_;
  std::vector<std::string> fixed_order_;
};

// Grows the hierarchy breadth first: each frontier node picks the feature
// minimising the shrinkage loss and splits unless the stopping rule fires.
// Every structural leaf then gets one child per bid unit. Throws on an empty
// dataset.
HierarchyModel train_dheb(const Dataset& ds, const TrainConfig& config = {});

// Same inference over a fixed feature order, without a stopping rule. An
// empty order gives the two-level root / bid-unit model.
HierarchyModel train_fheb(const Dataset& ds, const std::vector<std::string>& order,
                          const TrainConfig& config = {});

// Number of train_dheb / train_fheb invocations in this process.
std::uint64_t training_invocation_count();

// Number of root-to-structural-leaf split sequences present in exactly one of
// the two models. 0 means both chose the same set of hierarchies.
std::size_t hierarchy_edit_distance(const HierarchyModel& a, const HierarchyModel& b);

}  // namespace dheb
