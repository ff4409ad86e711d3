#include <cmath>
#include <random>
#include <sstream>

#include "../oracles.hpp"
#include "doctest.h"
#include "dheb/baselines.hpp"
#include "dheb/error.hpp"
#include "dheb/evaluation.hpp"
#include "helpers.hpp"
#include "json.hpp"

using namespace dheb;

namespace {

// `units` units observed every day for `days` days, each with its own
// constant rate plus a little day-dependent noise.
Dataset daily_dataset(int days, int units) {
  std::vector<testing::Row> rows;
  const Day start = parse_day("2017-01-01");
  for (int d = 0; d < days; ++d) {
    for (int u = 0; u < units; ++u) {
      const std::int64_t clicks = 1 + (d + u) % 5;
      const double rate = 0.5 + 0.25 * u + ((d * 7 + u) % 3 - 1) * 0.05;
      rows.push_back({format_day(start + std::chrono::days{d}), "u" + std::to_string(u), {},
                      clicks, rate * static_cast<double>(clicks)});
    }
  }
  return testing::make_dataset({}, rows);
}

NamedTrainer counting_wa(int& calls) {
  return {"WA", [&calls](const Dataset& d) -> std::shared_ptr<const RpcModel> {
            ++calls;
            return std::make_shared<WAModel>(train_wa(d));
          }};
}

}  // namespace

TEST_CASE("avg_mse matches the naive computation") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 100; ++t) {
    std::vector<DayScores> scores;
    std::vector<std::vector<oracle::Cell>> cells;
    const int days = 1 + static_cast<int>(rng() % 30);
    for (int d = 0; d < days; ++d) {
      DayScores day{parse_day("2017-03-01") + std::chrono::days{d}, {}};
      std::vector<oracle::Cell> row;
      const int n = 1 + static_cast<int>(rng() % 40);
      for (int i = 0; i < n; ++i) {
        const double rpc = 3.0 * u(rng);
        const double x = static_cast<double>(1 + rng() % 20);
        const double y = u(rng) < 0.5 ? 0.0 : 10.0 * u(rng);
        day.units.push_back({rpc, x, y});
        row.push_back({rpc, x, y});
      }
      scores.push_back(std::move(day));
      cells.push_back(std::move(row));
    }
    const double want = oracle::avg_mse_naive(cells);
    CHECK(std::abs(avg_mse(scores).value - want) <= 1e-12 * std::max(1.0, want));
  }
}

TEST_CASE("avg_mse worked example") {
  const std::vector<DayScores> scores{
      {parse_day("2017-01-01"), {{1.0, 2.0, 3.0}, {0.5, 4.0, 0.0}}},
      {parse_day("2017-01-02"), {{2.0, 1.0, 2.0}}}};
  // Day 1: ((2-3)^2 + (2-0)^2) / 2 = 2.5; day 2: 0.
  const auto r = avg_mse(scores);
  CHECK(r.value == 1.25);
  CHECK(r.per_day == std::vector<double>{2.5, 0.0});
}

TEST_CASE("days with nothing to score are dropped") {
  const std::vector<DayScores> scores{{parse_day("2017-01-01"), {{1.0, 2.0, 4.0}}},
                                      {parse_day("2017-01-02"), {}},
                                      {parse_day("2017-01-03"), {{1.0, 0.0, 4.0}}}};
  const auto r = avg_mse(scores);
  CHECK(r.value == 4.0);
  CHECK(r.days.size() == 1);
  CHECK(r.warnings.size() == 2);

  const std::vector<DayScores> none{{parse_day("2017-01-01"), {}}};
  CHECK_THROWS_AS(avg_mse(none), MathError);
}

TEST_CASE("improvement_percent") {
  CHECK(improvement_percent(2.0, 1.0) == 50.0);
  CHECK(improvement_percent(2.0, 3.0) == -50.0);
  CHECK(improvement_percent(2.0, 2.0) == 0.0);
}

TEST_CASE("offline runs") {
  CHECK(offline_runs(30, 1) == 30);
  CHECK(offline_runs(30, 4) == 8);
  CHECK(offline_runs(30, 7) == 5);
  CHECK(offline_runs(30, 30) == 1);
  CHECK_THROWS_AS(offline_runs(30, 0), ConfigError);
}

TEST_CASE("rolling backtest scores the last horizon days") {
  const auto ds = daily_dataset(100, 4);
  int calls = 0;
  const std::vector<NamedTrainer> trainers{counting_wa(calls)};
  const auto report = rolling_backtest(ds, trainers);
  REQUIRE(report.test_days.size() == 30);
  CHECK(report.test_days.back() == ds.date_range()->last);
  CHECK(report.test_days.front() == ds.date_range()->last - std::chrono::days{29});
  CHECK(calls == 30);
  const auto* wa = report.find("WA");
  REQUIRE(wa != nullptr);
  CHECK(wa->trainings == 30);
  CHECK(wa->scored_days.size() == 30);
  CHECK(wa->improvement_vs_baseline.has_value());
  CHECK(*wa->improvement_vs_baseline == 0.0);
  CHECK(report.find("nope") == nullptr);
}

TEST_CASE("the training window ends the day before the test day") {
  const auto ds = daily_dataset(95, 2);
  std::vector<DateRange> windows;
  const std::vector<NamedTrainer> trainers{
      {"WA", [&windows](const Dataset& d) -> std::shared_ptr<const RpcModel> {
         windows.push_back(*d.date_range());
         return std::make_shared<WAModel>(train_wa(d));
       }}};
  const auto report = rolling_backtest(ds, trainers);
  REQUIRE(windows.size() == 30);
  for (std::size_t k = 0; k < windows.size(); ++k) {
    CHECK(windows[k].last == report.test_days[k] - std::chrono::days{1});
    CHECK(windows[k].days() == 60);
  }
}

TEST_CASE("retrain period reuses the model between trainings") {
  const auto ds = daily_dataset(90, 3);
  int calls = 0;
  const std::vector<NamedTrainer> trainers{counting_wa(calls)};
  BacktestConfig cfg;
  cfg.retrain_period_days = 4;
  const auto report = rolling_backtest(ds, trainers, cfg);
  CHECK(calls == 8);
  CHECK(report.models.front().trainings == 8);
}

TEST_CASE("failed trainings are recorded and their days skipped") {
  const auto ds = daily_dataset(90, 3);
  int calls = 0;
  const std::vector<NamedTrainer> trainers{
      {"WA", [&calls](const Dataset& d) -> std::shared_ptr<const RpcModel> {
         if (calls++ % 2 == 0) throw MathError("boom");
         return std::make_shared<WAModel>(train_wa(d));
       }}};
  const auto report = rolling_backtest(ds, trainers);
  const auto& m = report.models.front();
  CHECK(m.failures.size() == 15);
  CHECK(m.scored_days.size() == 15);
  CHECK(m.failures.front().find("boom") != std::string::npos);
}

TEST_CASE("backtest configuration errors") {
  const auto ds = daily_dataset(50, 2);
  int calls = 0;
  const std::vector<NamedTrainer> trainers{counting_wa(calls)};
  CHECK_THROWS_AS(rolling_backtest(ds, trainers), ConfigError);
  BacktestConfig cfg;
  cfg.train_window_days = 10;
  cfg.retrain_period_days = 0;
  CHECK_THROWS_AS(rolling_backtest(ds, trainers, cfg), ConfigError);
  cfg.retrain_period_days = 1;
  CHECK_NOTHROW(rolling_backtest(ds, trainers, cfg));
}

TEST_CASE("staleness against daily retraining") {
  const auto ds = daily_dataset(90, 3);
  int calls = 0;
  const auto report = staleness_experiment(ds, counting_wa(calls), {4, 7});
  REQUIRE(report.points.size() == 3);
  CHECK(report.points[0].period == 1);
  CHECK(report.points[0].degradation_vs_daily == 0.0);
  CHECK(report.points[0].offline_runs == 30);
  CHECK(report.points[1].offline_runs == offline_runs(30, 4));
  CHECK(report.points[2].offline_runs == offline_runs(30, 7));
  const auto doc = nlohmann::json::parse(report.to_json());
  CHECK(doc["points"].size() == 3);
  CHECK(doc["model"] == "WA");
  CHECK(default_staleness_periods() == std::vector<int>{1, 2, 4, 7, 14});
  CHECK_THROWS_AS(staleness_experiment(ds, counting_wa(calls), {0}), ConfigError);
}

TEST_CASE("benchmark report lists every model and the unrun one") {
  BenchmarkConfig cfg;
  cfg.base.n_bid_units = 15;
  cfg.cells = {{10, 0.5}};
  cfg.replicates = 1;
  cfg.backtest.train_window_days = 30;
  cfg.backtest.horizon_days = 10;
  const auto report = run_benchmark(cfg);
  REQUIRE(report.cells.size() == 1);
  const auto& cell = report.cells.front();
  CHECK(cell.models == std::vector<std::string>{"WA", "RLR", "2HB", "FHEB", "DHEB"});
  CHECK(cell.improvement_of("WA") == 0.0);
  CHECK(std::isfinite(cell.improvement_of("DHEB")));

  const auto doc = nlohmann::json::parse(report.to_json());
  const auto& models = doc["cells"][0]["models"];
  REQUIRE(models.size() == 6);
  CHECK(models.back()["model"] == "3HB");
  CHECK(models.back()["status"] == "not implemented");
  std::ostringstream csv;
  report.write_csv(csv);
  CHECK(csv.str().find("DHEB") != std::string::npos);
  CHECK(csv.str().find("3HB") != std::string::npos);
}
