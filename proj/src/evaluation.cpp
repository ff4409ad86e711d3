#include "dheb/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "dheb/baselines.hpp"
#include "dheb/error.hpp"
#include "json.hpp"

namespace dheb {

namespace {

using Json = nlohmann::ordered_json;

// Mean of the finite entries; NaN when there are none.
double mean_of(const std::vector<double>& v) {
  double sum = 0.0;
  std::size_t count = 0;
  for (double x : v) {
    if (!std::isfinite(x)) continue;
    sum += x;
    ++count;
  }
  return count == 0 ? std::nan("") : sum / static_cast<double>(count);
}

Json json_number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

Json json_optional(const std::optional<double>& v) { return v ? json_number(*v) : Json(nullptr); }

std::string cell_tag(const GridCell& c) {
  return "n" + std::to_string(c.n_obs_per_unit) + "_s" + format_double(c.y_zero_fraction);
}

}  // namespace

AvgMse avg_mse(std::span<const DayScores> days) {
  AvgMse out;
  double sum = 0.0;
  for (const auto& day : days) {
    double day_sum = 0.0;
    std::size_t count = 0;
    for (const auto& u : day.units) {
      if (!(u.clicks > 0.0)) continue;
      const double e = u.predicted_rpc * u.clicks - u.revenue;
      day_sum += e * e;
      ++count;
    }
    if (count == 0) {
      out.warnings.push_back(format_day(day.day) + ": no evaluable units, day excluded");
      continue;
    }
    const double day_mse = day_sum / static_cast<double>(count);
    out.per_day.push_back(day_mse);
    out.days.push_back(day.day);
    sum += day_mse;
  }
  if (out.per_day.empty()) throw MathError("avg_mse: no day could be scored");
  out.value = sum / static_cast<double>(out.per_day.size());
  return out;
}

double improvement_percent(double baseline_mse, double model_mse) {
  return (baseline_mse - model_mse) / baseline_mse * 100.0;
}

const ModelResult* EvalReport::find(const std::string& name) const {
  for (const auto& m : models) {
    if (m.name == name) return &m;
  }
  return nullptr;
}

std::string EvalReport::to_json() const {
  Json doc;
  doc["config"] = Json{{"train_window_days", config.train_window_days},
                       {"horizon_days", config.horizon_days},
                       {"retrain_period_days", config.retrain_period_days},
                       {"baseline", config.baseline}};
  Json days = Json::array();
  for (auto d : test_days) days.push_back(format_day(d));
  doc["test_days"] = std::move(days);
  Json models_json = Json::array();
  for (const auto& m : models) {
    Json jm;
    jm["model"] = m.name;
    jm["avg_mse"] = json_number(m.avg_mse);
    jm["improvement_vs_wa"] = json_optional(m.improvement_vs_baseline);
    jm["time_ratio_vs_wa"] = json_optional(m.time_ratio_vs_baseline);
    jm["wall_seconds"] = m.wall_seconds;
    jm["trainings"] = m.trainings;
    Json series = Json::array();
    for (std::size_t i = 0; i < m.per_day_mse.size(); ++i) {
      series.push_back(Json{{"day", format_day(m.scored_days[i])}, {"mse", m.per_day_mse[i]}});
    }
    jm["per_day_mse"] = std::move(series);
    jm["failures"] = m.failures;
    models_json.push_back(std::move(jm));
  }
  doc["models"] = std::move(models_json);
  doc["warnings"] = warnings;
  return doc.dump(2) + "\n";
}

void EvalReport::write_csv(std::ostream& out) const {
  out << "model,metric,value\n";
  for (const auto& m : models) {
    out << m.name << ",avg_mse," << format_double(m.avg_mse) << '\n';
    if (m.improvement_vs_baseline) {
      out << m.name << ",improvement_vs_wa," << format_double(*m.improvement_vs_baseline) << '\n';
    }
    if (m.time_ratio_vs_baseline) {
      out << m.name << ",time_ratio_vs_wa," << format_double(*m.time_ratio_vs_baseline) << '\n';
    }
    out << m.name << ",wall_seconds," << format_double(m.wall_seconds) << '\n';
    for (std::size_t i = 0; i < m.per_day_mse.size(); ++i) {
      out << m.name << ",mse@" << format_day(m.scored_days[i]) << ','
          << format_double(m.per_day_mse[i]) << '\n';
    }
  }
}

EvalReport rolling_backtest(const Dataset& ds, std::span<const NamedTrainer> trainers,
                            const BacktestConfig& config) {
  if (config.train_window_days < 1 || config.horizon_days < 1 || config.retrain_period_days < 1) {
    throw ConfigError("window, horizon and retrain period must be >= 1 day");
  }
  if (!ds.date_range() ||
      ds.date_range()->days() < config.train_window_days + config.horizon_days) {
    throw ConfigError("dataset spans fewer days than train window + horizon");
  }
  const DateRange range = *ds.date_range();
  EvalReport report;
  report.config = config;
  for (int k = 0; k < config.horizon_days; ++k) {
    report.test_days.push_back(range.last - std::chrono::days{config.horizon_days - 1 - k});
  }

  // Actual records per test day, shared by every model.
  std::vector<std::vector<const Observation*>> actuals(report.test_days.size());
  for (const auto& o : ds.observations()) {
    if (o.date < report.test_days.front()) continue;
    actuals[static_cast<std::size_t>((o.date - report.test_days.front()).count())].push_back(&o);
  }
  std::vector<std::vector<Query>> queries(actuals.size());
  for (std::size_t k = 0; k < actuals.size(); ++k) {
    for (const auto* o : actuals[k]) queries[k].push_back(query_for(ds, *o));
  }

  for (const auto& trainer : trainers) {
    ModelResult result;
    result.name = trainer.name;
    std::vector<DayScores> scores;
    std::shared_ptr<const RpcModel> model;
    using Clock = std::chrono::steady_clock;
    Clock::duration elapsed{};
    for (std::size_t k = 0; k < report.test_days.size(); ++k) {
      const Day day = report.test_days[k];
      const auto start = Clock::now();
      if (k % static_cast<std::size_t>(config.retrain_period_days) == 0) {
        const DateRange window{day - std::chrono::days{config.train_window_days},
                               day - std::chrono::days{1}};
        try {
          model = trainer.train(ds.slice(window));
          ++result.trainings;
        } catch (const std::exception& e) {
          model.reset();
          ++result.trainings;
          result.failures.push_back(format_day(day) + ": " + e.what());
        }
      }
      if (!model) {
        elapsed += Clock::now() - start;
        continue;
      }
      DayScores ds_day{day, {}};
      ds_day.units.reserve(actuals[k].size());
      for (std::size_t i = 0; i < actuals[k].size(); ++i) {
        ds_day.units.push_back(ScoredUnit{model->predict_rpc(queries[k][i]),
                                          static_cast<double>(actuals[k][i]->clicks),
                                          actuals[k][i]->revenue});
      }
      elapsed += Clock::now() - start;
      scores.push_back(std::move(ds_day));
    }
    result.wall_seconds = std::chrono::duration<double>(elapsed).count();
    if (!scores.empty()) {
      try {
        auto mse = avg_mse(scores);
        result.avg_mse = mse.value;
        result.per_day_mse = std::move(mse.per_day);
        result.scored_days = std::move(mse.days);
        for (auto& w : mse.warnings) report.warnings.push_back(trainer.name + ": " + w);
      } catch (const MathError& e) {
        result.avg_mse = std::nan("");
        report.warnings.push_back(trainer.name + ": " + e.what());
      }
    } else {
      result.avg_mse = std::nan("");
    }
    report.models.push_back(std::move(result));
  }

  if (const ModelResult* base = report.find(config.baseline)) {
    const double base_mse = base->avg_mse;
    const double base_wall = base->wall_seconds;
    if (!(base_mse > 0.0)) {
      report.warnings.push_back(config.baseline + " AVG-MSE is " + format_double(base_mse) +
                                "; improvements are undefined");
    }
    for (auto& m : report.models) {
      if (base_mse > 0.0 && std::isfinite(m.avg_mse)) {
        m.improvement_vs_baseline = improvement_percent(base_mse, m.avg_mse);
      }
      if (base_wall > 0.0) m.time_ratio_vs_baseline = m.wall_seconds / base_wall;
    }
  }
  return report;
}

std::size_t offline_runs(int horizon_days, int period) {
  if (period < 1) throw ConfigError("retrain period must be >= 1");
  return static_cast<std::size_t>((horizon_days + period - 1) / period);
}

std::vector<int> default_staleness_periods() { return {1, 2, 4, 7, 14}; }

std::string StalenessReport::to_json() const {
  Json doc;
  doc["model"] = model;
  Json pts = Json::array();
  for (const auto& p : points) {
    pts.push_back(Json{{"T", p.period},
                       {"avg_mse", json_number(p.avg_mse)},
                       {"degradation_vs_T1", json_number(p.degradation_vs_daily)},
                       {"offline_runs", p.offline_runs}});
  }
  doc["points"] = std::move(pts);
  return doc.dump(2) + "\n";
}

StalenessReport staleness_experiment(const Dataset& ds, const NamedTrainer& trainer,
                                     const std::vector<int>& periods, BacktestConfig config) {
  std::vector<int> all{1};
  for (int t : periods) {
    if (t < 1) throw ConfigError("retrain period must be >= 1");
    if (std::find(all.begin(), all.end(), t) == all.end()) all.push_back(t);
  }
  std::sort(all.begin(), all.end());
  StalenessReport report;
  report.model = trainer.name;
  double daily = std::nan("");
  const std::vector<NamedTrainer> one{trainer};
  for (int t : all) {
    config.retrain_period_days = t;
    const auto eval = rolling_backtest(ds, one, config);
    StalenessPoint p;
    p.period = t;
    p.avg_mse = eval.models.front().avg_mse;
    p.offline_runs = eval.models.front().trainings;
    if (t == 1) daily = p.avg_mse;
    p.degradation_vs_daily = (p.avg_mse - daily) / daily * 100.0;
    report.points.push_back(p);
  }
  // Keep only what was asked for, plus the T = 1 reference.
  std::erase_if(report.points, [&](const StalenessPoint& p) {
    return p.period != 1 && std::find(periods.begin(), periods.end(), p.period) == periods.end();
  });
  return report;
}

std::vector<NamedTrainer> standard_trainers(const TrainConfig& train,
                                            const std::vector<std::string>& fheb_order,
                                            double rlr_lambda) {
  std::vector<NamedTrainer> out;
  out.push_back({"WA", [](const Dataset& d) -> std::shared_ptr<const RpcModel> {
                   return std::make_shared<WAModel>(train_wa(d));
                 }});
  out.push_back({"RLR", [rlr_lambda](const Dataset& d) -> std::shared_ptr<const RpcModel> {
                   return std::make_shared<RLRModel>(train_rlr(d, rlr_lambda));
                 }});
  out.push_back({"2HB", [train](const Dataset& d) -> std::shared_ptr<const RpcModel> {
                   return std::make_shared<HierarchyModel>(train_2hb(d, train));
                 }});
  out.push_back({"FHEB", [train, fheb_order](const Dataset& d) -> std::shared_ptr<const RpcModel> {
                   return std::make_shared<HierarchyModel>(train_fheb(d, fheb_order, train));
                 }});
  out.push_back({"DHEB", [train](const Dataset& d) -> std::shared_ptr<const RpcModel> {
                   return std::make_shared<HierarchyModel>(train_dheb(d, train));
                 }});
  return out;
}

double CellSummary::improvement_of(const std::string& model) const {
  for (std::size_t i = 0; i < models.size(); ++i) {
    if (models[i] == model) return mean_improvement[i];
  }
  throw ConfigError("no model named '" + model + "' in benchmark cell");
}

std::string BenchmarkReport::to_json() const {
  Json doc;
  Json cells_json = Json::array();
  for (const auto& c : cells) {
    Json jc;
    jc["n"] = c.cell.n_obs_per_unit;
    jc["s"] = c.cell.y_zero_fraction;
    Json models_json = Json::array();
    for (std::size_t i = 0; i < c.models.size(); ++i) {
      Json per_replicate = Json::array();
      for (double x : c.improvements[i]) per_replicate.push_back(json_number(x));
      models_json.push_back(Json{{"model", c.models[i]},
                                 {"mean_avg_mse", json_number(c.mean_avg_mse[i])},
                                 {"mean_improvement_vs_wa", json_number(c.mean_improvement[i])},
                                 {"mean_time_ratio_vs_wa", json_number(c.mean_time_ratio[i])},
                                 {"undefined_improvements", c.undefined_improvements[i]},
                                 {"improvement_per_replicate", per_replicate}});
    }
    for (const auto& name : not_implemented) {
      models_json.push_back(Json{{"model", name}, {"status", "not implemented"}});
    }
    jc["models"] = std::move(models_json);
    cells_json.push_back(std::move(jc));
  }
  doc["cells"] = std::move(cells_json);
  return doc.dump(2) + "\n";
}

void BenchmarkReport::write_csv(std::ostream& out) const {
  out << "model,metric,value\n";
  for (const auto& c : cells) {
    const std::string tag = cell_tag(c.cell);
    for (std::size_t i = 0; i < c.models.size(); ++i) {
      out << c.models[i] << ",avg_mse@" << tag << ',' << format_double(c.mean_avg_mse[i]) << '\n';
      out << c.models[i] << ",improvement_vs_wa@" << tag << ','
          << format_double(c.mean_improvement[i]) << '\n';
      out << c.models[i] << ",time_ratio_vs_wa@" << tag << ','
          << format_double(c.mean_time_ratio[i]) << '\n';
    }
    for (const auto& name : not_implemented) out << name << ",status@" << tag << ",not_implemented\n";
  }
}

BenchmarkReport run_benchmark(const BenchmarkConfig& config) {
  if (config.replicates < 1) throw ConfigError("replicates must be >= 1");
  const auto trainers =
      standard_trainers(config.train, config.base.implicit_hierarchy, config.rlr_lambda);
  BenchmarkReport report;
  for (std::size_t c = 0; c < config.cells.size(); ++c) {
    CellSummary summary;
    summary.cell = config.cells[c];
    for (const auto& t : trainers) summary.models.push_back(t.name);
    summary.improvements.assign(trainers.size(), {});
    summary.time_ratios.assign(trainers.size(), {});
    std::vector<std::vector<double>> mses(trainers.size());
    for (int r = 0; r < config.replicates; ++r) {
      const auto data = generate(grid_config(config.base, config.cells[c], c, r));
      const auto eval = rolling_backtest(data.dataset, trainers, config.backtest);
      for (std::size_t i = 0; i < trainers.size(); ++i) {
        const auto& m = eval.models[i];
        mses[i].push_back(m.avg_mse);
        summary.improvements[i].push_back(m.improvement_vs_baseline.value_or(std::nan("")));
        summary.time_ratios[i].push_back(m.time_ratio_vs_baseline.value_or(std::nan("")));
      }
    }
    for (std::size_t i = 0; i < trainers.size(); ++i) {
      summary.mean_improvement.push_back(mean_of(summary.improvements[i]));
      summary.mean_time_ratio.push_back(mean_of(summary.time_ratios[i]));
      summary.mean_avg_mse.push_back(mean_of(mses[i]));
      summary.undefined_improvements.push_back(static_cast<std::size_t>(
          std::count_if(summary.improvements[i].begin(), summary.improvements[i].end(),
                        [](double x) { return !std::isfinite(x); })));
    }
    report.cells.push_back(std::move(summary));
  }
  return report;
}

}  // namespace dheb
