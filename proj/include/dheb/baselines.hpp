#pragma once

#include <map>
#include <string>
#include <vector>

#include "dheb/data.hpp"
#include "dheb/predictor.hpp"
#include "dheb/tree.hpp"

namespace dheb {

// Click-weighted average of each unit's historical RPC (sum y / sum x).
class WAModel : public RpcModel {
 public:
  WAModel(std::map<std::string, double> per_unit, double global);

  double predict_rpc(const Query& query) const override;
  const std::map<std::string, double>& per_unit() const { return per_unit_; }
  // Fallback for units without history.
  double global() const { return global_; }

 private:
  std::map<std::string, double> per_unit_;
  double global_;
};

WAModel train_wa(const Dataset& ds);

// Ridge regression of revenue on clicks with a category-dependent slope:
//   y_m ~ (w . phi_m) x_m,  minimise sum (y_m - (w . phi_m) x_m)^2 + lambda |w|^2
// where phi_m one-hot encodes every structural feature and the bid unit.
// Unseen categories contribute a zero weight.
class RLRModel : public RpcModel {
 public:
  RLRModel(std::vector<std::string> feature_names,
           std::vector<std::map<std::string, double>> feature_weights,
           std::map<std::string, double> unit_weights, double lambda);

  double predict_rpc(const Query& query) const override;
  double lambda() const { return lambda_; }
  const std::vector<std::string>& feature_names() const { return feature_names_; }
  const std::vector<std::map<std::string, double>>& feature_weights() const {
    return feature_weights_;
  }
  const std::map<std::string, double>& unit_weights() const { return unit_weights_; }

 private:
  std::vector<std::string> feature_names_;
  std::vector<std::map<std::string, double>> feature_weights_;
  std::map<std::string, double> unit_weights_;
  double lambda_;
};

inline constexpr double kDefaultRidgeLambda = 1.0;

// Throws ConfigError for lambda < 0, or when lambda == 0 and the normal
// equations are singular.
RLRModel train_rlr(const Dataset& ds, double lambda = kDefaultRidgeLambda);

// Picks lambda from `grid` by training on all but the last `holdout_days` of
// the dataset and scoring squared revenue error on the held-out days.
double select_rlr_lambda(const Dataset& ds, const std::vector<double>& grid, int holdout_days = 7);

// Root / bid-unit hierarchy with the empirical prior at the root.
HierarchyModel train_2hb(const Dataset& ds, const TrainConfig& config = {});

}  // namespace dheb
