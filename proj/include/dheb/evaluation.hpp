#pragma once

#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "dheb/data.hpp"
#include "dheb/predictor.hpp"
#include "dheb/simulation.hpp"
#include "dheb/tree.hpp"

namespace dheb {

// One scored (unit, day): predicted RPC against the realised clicks/revenue.
struct ScoredUnit {
  double predicted_rpc = 0.0;
  double clicks = 0.0;
  double revenue = 0.0;
};

struct DayScores {
  Day day;
  std::vector<ScoredUnit> units;
};

struct AvgMse {
  double value = 0.0;
  // Per-day mean squared revenue error for the days that were scored.
  std::vector<double> per_day;
  std::vector<Day> days;
  std::vector<std::string> warnings;
};

// Mean over days of the per-day mean of (rpc * x - y)^2. Units with x <= 0 are
// not scored; a day left with no units is dropped with a warning. Throws
// MathError if no day can be scored.
AvgMse avg_mse(std::span<const DayScores> days);

struct BacktestConfig {
  int train_window_days = 60;
  int horizon_days = 30;
  // Retrain every T test days, reusing the model in between.
  int retrain_period_days = 1;
  std::string baseline = "WA";
};

struct ModelResult {
  std::string name;
  double avg_mse = 0.0;
  std::vector<double> per_day_mse;
  std::vector<Day> scored_days;
  // Training + prediction, summed over the horizon.
  double wall_seconds = 0.0;
  std::size_t trainings = 0;
  std::optional<double> improvement_vs_baseline;  // percent
  std::optional<double> time_ratio_vs_baseline;
  // "YYYY-MM-DD: message" for days whose training failed.
  std::vector<std::string> failures;
};

struct EvalReport {
  BacktestConfig config;
  std::vector<Day> test_days;
  std::vector<ModelResult> models;
  std::vector<std::string> warnings;

  const ModelResult* find(const std::string& name) const;
  std::string to_json() const;
  // model,metric,value
  void write_csv(std::ostream& out) const;
};

// Test days are the last `horizon_days` days of the dataset's range. For each
// test day the model is (re)trained on the preceding `train_window_days` days
// and scored on the units with a record that day. Throws ConfigError when the
// range is shorter than window + horizon.
EvalReport rolling_backtest(const Dataset& ds, std::span<const NamedTrainer> trainers,
                            const BacktestConfig& config = {});

// Percent reduction of AVG-MSE relative to the baseline; negative when the
// model is worse.
double improvement_percent(double baseline_mse, double model_mse);

struct StalenessPoint {
  int period = 1;
  double avg_mse = 0.0;
  // (AVG-MSE(T) - AVG-MSE(1)) / AVG-MSE(1), in percent.
  double degradation_vs_daily = 0.0;
  std::size_t offline_runs = 0;
};

struct StalenessReport {
  std::string model;
  std::vector<StalenessPoint> points;
  std::string to_json() const;
};

// Runs the backtest once per retrain period. Period 1 is always evaluated as
// the reference even if absent from `periods`.
StalenessReport staleness_experiment(const Dataset& ds, const NamedTrainer& trainer,
                                     const std::vector<int>& periods,
                                     BacktestConfig config = {});

std::vector<int> default_staleness_periods();

// Offline runs needed to cover `horizon` days with period T: ceil(horizon / T).
std::size_t offline_runs(int horizon_days, int period);

// WA, RLR, 2HB, FHEB (over `fheb_order`) and DHEB.
std::vector<NamedTrainer> standard_trainers(const TrainConfig& train,
                                            const std::vector<std::string>& fheb_order,
                                            double rlr_lambda);

struct BenchmarkConfig {
  SimConfig base;
  std::vector<GridCell> cells = default_grid();
  int replicates = 10;
  BacktestConfig backtest;
  TrainConfig train;
  double rlr_lambda = 1.0;
};

struct CellSummary {
  GridCell cell;
  std::vector<std::string> models;
  // Indexed like `models`; one entry per replicate in the inner vectors.
  // NaN where the baseline AVG-MSE was 0; such replicates are left out of
  // the means and counted in `undefined_improvements`.
  std::vector<std::vector<double>> improvements;
  std::vector<std::vector<double>> time_ratios;
  std::vector<double> mean_improvement;
  std::vector<double> mean_time_ratio;
  std::vector<double> mean_avg_mse;
  std::vector<std::size_t> undefined_improvements;

  double improvement_of(const std::string& model) const;
};

struct BenchmarkReport {
  std::vector<CellSummary> cells;
  // Listed in reports but not run.
  std::vector<std::string> not_implemented = {"3HB"};

  std::string to_json() const;
  void write_csv(std::ostream& out) const;
};

// Generates every grid replicate and backtests the standard models on it.
// FHEB uses the simulation's implicit hierarchy.
BenchmarkReport run_benchmark(const BenchmarkConfig& config);

}  // namespace dheb
