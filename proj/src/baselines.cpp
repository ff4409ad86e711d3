#include "dheb/baselines.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <cmath>
#include <limits>
#include <unordered_map>

#include "dheb/error.hpp"

namespace dheb {

WAModel::WAModel(std::map<std::string, double> per_unit, double global)
    : per_unit_(std::move(per_unit)), global_(global) {}

double WAModel::predict_rpc(const Query& query) const {
  if (auto it = per_unit_.find(query.bid_unit_id); it != per_unit_.end()) return it->second;
  return global_;
}

WAModel train_wa(const Dataset& ds) {
  if (ds.empty()) throw ConfigError("cannot train WA on an empty dataset");
  std::map<std::string, std::pair<double, double>> sums;
  double sum_x = 0.0;
  double sum_y = 0.0;
  for (const auto& o : ds.observations()) {
    auto& s = sums[ds.bid_unit_id(o)];
    s.first += static_cast<double>(o.clicks);
    s.second += o.revenue;
    sum_x += static_cast<double>(o.clicks);
    sum_y += o.revenue;
  }
  std::map<std::string, double> per_unit;
  for (const auto& [unit, s] : sums) per_unit.emplace(unit, s.second / s.first);
  return WAModel(std::move(per_unit), sum_y / sum_x);
}

RLRModel::RLRModel(std::vector<std::string> feature_names,
                   std::vector<std::map<std::string, double>> feature_weights,
                   std::map<std::string, double> unit_weights, double lambda)
    : feature_names_(std::move(feature_names)),
      feature_weights_(std::move(feature_weights)),
      unit_weights_(std::move(unit_weights)),
      lambda_(lambda) {}

double RLRModel::predict_rpc(const Query& query) const {
  double rpc = 0.0;
  for (std::size_t f = 0; f < feature_names_.size(); ++f) {
    const auto value = query.feature(feature_names_[f]);
    if (!value) continue;
    if (auto it = feature_weights_[f].find(*value); it != feature_weights_[f].end()) {
      rpc += it->second;
    }
  }
  if (auto it = unit_weights_.find(query.bid_unit_id); it != unit_weights_.end()) {
    rpc += it->second;
  }
  return rpc;
}

RLRModel train_rlr(const Dataset& ds, double lambda) {
  if (ds.empty()) throw ConfigError("cannot train RLR on an empty dataset");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda must be >= 0");

  const std::size_t k = ds.schema().num_features();
  // Column index per (feature, category) seen in the data; the bid unit is
  // feature slot k.
  std::vector<std::unordered_map<std::uint32_t, int>> columns(k + 1);
  int p = 0;
  auto column = [&](std::size_t slot, std::uint32_t cat) {
    auto [it, inserted] = columns[slot].emplace(cat, p);
    if (inserted) ++p;
    return it->second;
  };
  std::vector<std::vector<int>> design;
  design.reserve(ds.size());
  for (const auto& o : ds.observations()) {
    std::vector<int> row;
    row.reserve(k + 1);
    for (std::size_t f = 0; f < k; ++f) row.push_back(column(f, o.features[f]));
    row.push_back(column(k, o.bid_unit));
    design.push_back(std::move(row));
  }

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(ds.size() * (k + 1) * (k + 1) + static_cast<std::size_t>(p));
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(p);
  for (std::size_t m = 0; m < ds.size(); ++m) {
    const double x = static_cast<double>(ds[m].clicks);
    for (int a : design[m]) {
      rhs[a] += x * ds[m].revenue;
      for (int b : design[m]) triplets.emplace_back(a, b, x * x);
    }
  }
  for (int j = 0; j < p; ++j) triplets.emplace_back(j, j, lambda);
  Eigen::SparseMatrix<double> gram(p, p);
  gram.setFromTriplets(triplets.begin(), triplets.end());

  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(gram);
  bool singular = solver.info() != Eigen::Success;
  if (!singular) {
    const auto d = solver.vectorD();
    const double scale = d.cwiseAbs().maxCoeff();
    singular = !(d.minCoeff() > 1e-12 * scale);
  }
  if (singular) {
    throw ConfigError("RLR normal equations are singular; use lambda > 0");
  }
  const Eigen::VectorXd w = solver.solve(rhs);
  if (!w.allFinite()) throw MathError("RLR produced non-finite weights");

  std::vector<std::map<std::string, double>> feature_weights(k);
  for (std::size_t f = 0; f < k; ++f) {
    const auto& domain = ds.schema().feature(f).domain;
    for (const auto& [cat, col] : columns[f]) feature_weights[f].emplace(domain.value(cat), w[col]);
  }
  std::map<std::string, double> unit_weights;
  for (const auto& [unit, col] : columns[k]) {
    unit_weights.emplace(ds.schema().bid_units().value(unit), w[col]);
  }
  return RLRModel(ds.schema().feature_names(), std::move(feature_weights),
                  std::move(unit_weights), lambda);
}

double select_rlr_lambda(const Dataset& ds, const std::vector<double>& grid, int holdout_days) {
  if (grid.empty()) throw ConfigError("empty lambda grid");
  if (!ds.date_range() || ds.date_range()->days() <= holdout_days) {
    throw ConfigError("dataset too short for lambda selection");
  }
  const auto range = *ds.date_range();
  const Day split = range.last - std::chrono::days{holdout_days};
  const Dataset train = ds.slice({range.first, split});
  const Dataset test = ds.slice({split + std::chrono::days{1}, range.last});
  double best_lambda = grid.front();
  double best_err = std::numeric_limits<double>::infinity();
  for (double lambda : grid) {
    double err = 0.0;
    try {
      const auto model = train_rlr(train, lambda);
      for (const auto& o : test.observations()) {
        const double e = model.predict_rpc(query_for(test, o)) * static_cast<double>(o.clicks) -
                         o.revenue;
        err += e * e;
      }
    } catch (const Error&) {
      continue;
    }
    if (err < best_err) {
      best_err = err;
      best_lambda = lambda;
    }
  }
  return best_lambda;
}

HierarchyModel train_2hb(const Dataset& ds, const TrainConfig& config) {
  return train_fheb(ds, {}, config);
}

}  // namespace dheb
