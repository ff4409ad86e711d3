#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <string_view>

#include "dheb/baselines.hpp"
#include "dheb/tree.hpp"

namespace dheb {

inline constexpr int kModelFormatVersion = 1;

// JSON document:
//   {format_version, method, schema:{features:[...]}, config:{r, variance_floor,
//    tie_break}, trained_at, training_data_range:{first,last}|null, fixed_order,
//    nodes:[{node_id, parent_id, depth, split_feature, category,
//            prior:{mean,var}, posterior:{mean,var}, sigma_eps_sq, n_obs,
//            is_bid_unit_leaf, bid_unit_id?}]}
// Doubles are written with round-trip precision, so load(save(m)) == m.
std::string save_model(const HierarchyModel& model);
// Throws ModelFormatError on malformed JSON, a missing field, or an
// unsupported format_version. Never returns a partial model.
HierarchyModel load_model(std::string_view text);

// Writes to a temporary sibling and renames it over `path`, so readers see
// either the old or the new file.
void save_model_file(const HierarchyModel& model, const std::filesystem::path& path);
HierarchyModel load_model_file(const std::filesystem::path& path);

// Baseline model files share format_version and method with the tree format:
//   {format_version, method:"wa", global, per_unit:{unit: rpc}}
//   {format_version, method:"rlr", lambda, features, feature_weights:[{cat: w}],
//    unit_weights:{unit: w}}
std::string save_model(const WAModel& model);
std::string save_model(const RLRModel& model);

// Loads any model file (tree, WA or RLR), dispatching on "method".
std::shared_ptr<const RpcModel> load_any_model(std::string_view text);
std::shared_ptr<const RpcModel> load_any_model_file(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
// Temporary sibling + rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& text);

}  // namespace dheb
