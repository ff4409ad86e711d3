#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dheb/bayes.hpp"
#include "dheb/data.hpp"

namespace dheb {

struct SimFeature {
  std::string name;
  // 0 draws the count uniformly from [min_categories, max_categories].
  int n_categories = 0;
};

// Synthetic data with a latent hierarchy over categorical features.
//
// Categories of the first hierarchy feature hang off the root; each category
// of a deeper feature is attached to one uniformly chosen category of the
// level above, so feature values nest like campaign / ad group. Every node
// mean is drawn from N(parent mean, child_variance) and every bid unit sits
// under a uniformly chosen bottom category with RPC ~ N(bottom mean,
// child_variance). Features outside the hierarchy are assigned independently
// and carry no signal.
struct SimConfig {
  int n_bid_units = 100;
  std::vector<SimFeature> features = {{"A", 0}, {"B", 0}, {"C", 0}, {"D", 0}};
  int min_categories = 10;
  int max_categories = 20;
  std::vector<std::string> implicit_hierarchy = {"A", "B", "C", "D"};
  DateRange date_range = default_date_range();
  NormalParams top_prior{1.0, 0.25};
  // Defaults to top_prior.variance.
  std::optional<double> child_variance;
  double noise_variance = 1.0;
  int n_obs_per_unit = 30;
  double y_zero_fraction = 0.0;
  int min_clicks = 1;
  int max_clicks = 20;
  // Clamp negative revenue at 0; when false, negative revenue is kept.
  bool truncate_negative_revenue = true;
  std::uint64_t seed = 20170101;

  static DateRange default_date_range();
  // Throws ConfigError.
  void validate() const;
};

struct SimResult {
  Dataset dataset;
  std::map<std::string, double> true_rpc;
  // Number of categories actually used per feature, in `features` order.
  std::vector<int> n_categories;
  // Latent mean of every category, one map per implicit_hierarchy level.
  std::vector<std::map<std::string, double>> latent_means;
};

SimResult generate(const SimConfig& config);

struct GridCell {
  int n_obs_per_unit = 0;
  double y_zero_fraction = 0.0;
};

// n in {3, 10, 30} x s in {0.5, 0.9, 0.98}, least sparse first within each n.
std::vector<GridCell> default_grid();

struct GridDataset {
  std::size_t cell_index = 0;
  int replicate = 0;
  GridCell cell;
  SimConfig config;
  SimResult data;
};

// Independent RNG stream per (base seed, cell, replicate).
std::uint64_t replicate_seed(std::uint64_t base_seed, std::size_t cell_index, int replicate);

// Config for one grid replicate: `base` with the cell's (n, s) and the
// derived seed.
SimConfig grid_config(const SimConfig& base, const GridCell& cell, std::size_t cell_index,
                      int replicate);

std::vector<GridDataset> grid(const SimConfig& base, const std::vector<GridCell>& cells,
                              int replicates);

void write_ground_truth_csv(const std::map<std::string, double>& truth,
                            const std::filesystem::path& path);

}  // namespace dheb
