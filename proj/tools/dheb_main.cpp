// dheb: command-line entry point for simulation, training, prediction,
// evaluation and serving.

#include <spdlog/spdlog.h>

#include <atomic>
#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "dheb/baselines.hpp"
#include "dheb/data.hpp"
#include "dheb/error.hpp"
#include "dheb/evaluation.hpp"
#include "dheb/model_io.hpp"
#include "dheb/serving.hpp"
#include "dheb/simulation.hpp"
#include "dheb/tree.hpp"

namespace {

using namespace dheb;

std::atomic<bool> g_stop{false};

extern "C" void on_signal(int) { g_stop = true; }

void install_signal_handlers() {
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
}

// "A,B,C" or repeated flags both end up here.
std::vector<std::string> split_list(const std::vector<std::string>& raw) {
  std::vector<std::string> out;
  for (const auto& item : raw) {
    std::stringstream ss(item);
    std::string part;
    while (std::getline(ss, part, ',')) {
      if (!part.empty()) out.push_back(part);
    }
  }
  return out;
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path + "'");
  out << text;
}

Dataset window(const Dataset& ds, int days) {
  if (days <= 0 || !ds.date_range()) return ds;
  const Day last = ds.date_range()->last;
  return ds.slice({last - std::chrono::days{days - 1}, last});
}

struct SimulateArgs {
  std::string out;
  std::string truth;
  int units = 100;
  int n_obs = 30;
  double zero_fraction = 0.0;
  std::uint64_t seed = SimConfig{}.seed;
  bool allow_negative = false;
};

int run_simulate(const SimulateArgs& a) {
  SimConfig cfg;
  cfg.n_bid_units = a.units;
  cfg.n_obs_per_unit = a.n_obs;
  cfg.y_zero_fraction = a.zero_fraction;
  cfg.seed = a.seed;
  cfg.truncate_negative_revenue = !a.allow_negative;
  const auto sim = generate(cfg);
  write_csv(sim.dataset, std::filesystem::path(a.out));
  if (!a.truth.empty()) write_ground_truth_csv(sim.true_rpc, a.truth);
  const auto stats = sparsity(sim.dataset);
  spdlog::info("wrote {} rows; x-sparsity {:.3f}, y-sparsity {:.3f}", sim.dataset.size(),
               stats.x_sparsity, stats.y_sparsity.value_or(0.0));
  return 0;
}

struct TrainArgs {
  std::string method = "dheb";
  std::string input;
  std::string out;
  double r = 0.95;
  std::vector<std::string> order;
  std::string trained_at;
  double lambda = kDefaultRidgeLambda;
  int window_days = 0;
};

int run_train(const TrainArgs& a) {
  const auto ingest = ingest_csv(a.input);
  if (ingest.dropped_zero_click > 0) {
    spdlog::info("dropped {} zero-click rows", ingest.dropped_zero_click);
  }
  const Dataset ds = window(ingest.dataset, a.window_days);
  std::string text;
  if (a.method == "wa") {
    text = save_model(train_wa(ds));
  } else if (a.method == "rlr") {
    text = save_model(train_rlr(ds, a.lambda));
  } else {
    TrainConfig cfg;
    cfg.r = a.r;
    cfg.trained_at = a.trained_at.empty() ? utc_timestamp() : a.trained_at;
    const auto model = train_hierarchy(ds, a.method, split_list(a.order), cfg);
    spdlog::info("{}: {} nodes, depth {}", a.method, model.nodes().size(), model.max_depth());
    text = save_model(model);
  }
  write_file_atomic(a.out, text);
  return 0;
}

struct PredictArgs {
  std::string model;
  std::string query;
  std::string out;
};

int run_predict(const PredictArgs& a) {
  const auto model = load_any_model_file(a.model);
  const auto queries = read_query_csv(std::filesystem::path(a.query));
  std::ostringstream out;
  write_predictions_csv(out, queries, *model);
  write_text(a.out, out.str());
  return 0;
}

struct EvaluateArgs {
  std::string input;
  int window = 60;
  int horizon = 30;
  int period = 1;
  double r = 0.95;
  std::vector<std::string> order;
  double lambda = kDefaultRidgeLambda;
  std::string json;
  std::string csv;
};

int run_evaluate(const EvaluateArgs& a) {
  const auto ds = ingest_csv(a.input).dataset;
  TrainConfig train;
  train.r = a.r;
  BacktestConfig bt{a.window, a.horizon, a.period, "WA"};
  auto order = split_list(a.order);
  if (order.empty()) order = ds.schema().feature_names();
  const auto trainers = standard_trainers(train, order, a.lambda);
  const auto report = rolling_backtest(ds, trainers, bt);
  for (const auto& w : report.warnings) spdlog::warn("{}", w);
  if (!a.json.empty()) write_text(a.json, report.to_json());
  std::ostringstream csv;
  report.write_csv(csv);
  write_text(a.csv.empty() ? "-" : a.csv, csv.str());
  return 0;
}

struct BenchmarkArgs {
  std::string grid = "default";
  int replicates = 10;
  std::uint64_t seed = SimConfig{}.seed;
  double r = 0.95;
  std::string json;
  std::string csv;
};

int run_benchmark_cmd(const BenchmarkArgs& a) {
  if (a.grid != "default") throw ConfigError("only --grid default is available");
  BenchmarkConfig cfg;
  cfg.replicates = a.replicates;
  cfg.base.seed = a.seed;
  cfg.train.r = a.r;
  const auto report = run_benchmark(cfg);
  if (!a.json.empty()) write_text(a.json, report.to_json());
  std::ostringstream csv;
  report.write_csv(csv);
  write_text(a.csv.empty() ? "-" : a.csv, csv.str());
  return 0;
}

struct StalenessArgs {
  std::string input;
  std::vector<int> periods = default_staleness_periods();
  std::string method = "dheb";
  std::vector<std::string> order;
  double r = 0.95;
  std::string out;
};

int run_staleness(const StalenessArgs& a) {
  const auto ds = ingest_csv(a.input).dataset;
  TrainConfig train;
  train.r = a.r;
  const auto order = split_list(a.order);
  const std::string method = a.method;
  NamedTrainer trainer{method, [method, order, train](const Dataset& d) {
                         return std::shared_ptr<const RpcModel>(
                             std::make_shared<HierarchyModel>(train_hierarchy(d, method, order, train)));
                       }};
  const auto report = staleness_experiment(ds, trainer, a.periods);
  write_text(a.out, report.to_json());
  return 0;
}

struct ServeArgs {
  std::string config;
  std::string model;
  std::string host;
  int port = -1;
  int threads = 0;
  int watch_ms = 0;
  std::string log_level;
};

int run_serve(const ServeArgs& a) {
  ServeConfig cfg;
  if (!a.config.empty()) cfg = load_serve_config(a.config);
  if (!a.model.empty()) cfg.model_path = a.model;
  if (!a.host.empty()) cfg.host = a.host;
  if (a.port >= 0) cfg.port = a.port;
  if (a.threads > 0) cfg.threads = a.threads;
  if (a.watch_ms > 0) cfg.watch_interval_ms = a.watch_ms;
  if (!a.log_level.empty()) cfg.log_level = a.log_level;
  configure_logging(cfg.log_level);
  PredictionServer server(cfg);
  const int port = server.start();
  std::cout << "listening on " << cfg.host << ':' << port << std::endl;
  install_signal_handlers();
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  server.stop();
  return 0;
}

struct DaemonArgs {
  RetrainConfig cfg;
  std::vector<std::string> order;
  std::string trained_at;
};

int run_daemon(DaemonArgs a) {
  a.cfg.fixed_order = split_list(a.order);
  a.cfg.train.trained_at = a.trained_at;
  install_signal_handlers();
  const int runs = run_retrain_daemon(a.cfg, g_stop);
  spdlog::info("retrain daemon finished after {} successful runs", runs);
  return runs > 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dynamic hierarchical empirical Bayes RPC prediction"};
  app.require_subcommand(1);
  std::string log_level;
  app.add_option("--log-level", log_level, "trace|debug|info|warn|error|off (default: $DHEB_LOG or info)");

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic dataset");
  simulate->add_option("--out", sim.out, "Output dataset CSV")->required();
  simulate->add_option("--truth", sim.truth, "Ground-truth CSV (bid_unit_id,true_rpc)");
  simulate->add_option("--units", sim.units, "Number of bid units")->check(CLI::PositiveNumber);
  simulate->add_option("--n-obs", sim.n_obs, "Observations per bid unit")->check(CLI::PositiveNumber);
  simulate->add_option("--zero-fraction", sim.zero_fraction, "Share of revenues set to zero")
      ->check(CLI::Range(0.0, 1.0));
  simulate->add_option("--seed", sim.seed, "RNG seed");
  simulate->add_flag("--allow-negative", sim.allow_negative, "Keep negative revenue draws");

  TrainArgs tr;
  auto* train = app.add_subcommand("train", "Train a model and write it to a file");
  train->add_option("--method", tr.method, "Model type")
      ->check(CLI::IsMember({"dheb", "fheb", "2hb", "wa", "rlr"}));
  train->add_option("--input", tr.input, "Dataset CSV")->required()->check(CLI::ExistingFile);
  train->add_option("--out", tr.out, "Model file")->required();
  train->add_option("--r", tr.r, "Stopping ratio")->check(CLI::Range(0.0, 1.0));
  train->add_option("--order", tr.order, "Feature order for fheb, e.g. A,B,C")->delimiter(',');
  train->add_option("--trained-at", tr.trained_at, "Timestamp stored in the model (default: now)");
  train->add_option("--lambda", tr.lambda, "Ridge penalty for rlr")->check(CLI::NonNegativeNumber);
  train->add_option("--window-days", tr.window_days, "Train on the last N days only (0 = all)")
      ->check(CLI::NonNegativeNumber);

  PredictArgs pr;
  auto* predict = app.add_subcommand("predict", "Predict RPC for a query CSV");
  predict->add_option("--model", pr.model, "Model file")->required()->check(CLI::ExistingFile);
  predict->add_option("--query", pr.query, "Query CSV (bid_unit_id,date,<features>)")
      ->required()
      ->check(CLI::ExistingFile);
  predict->add_option("--out", pr.out, "Output CSV (default: stdout)");

  EvaluateArgs ev;
  auto* evaluate = app.add_subcommand("evaluate", "Rolling backtest of all models on a dataset");
  evaluate->add_option("--input", ev.input, "Dataset CSV")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--window", ev.window, "Training window in days")->check(CLI::PositiveNumber);
  evaluate->add_option("--horizon", ev.horizon, "Test days")->check(CLI::PositiveNumber);
  evaluate->add_option("--period", ev.period, "Retrain every T days")->check(CLI::PositiveNumber);
  evaluate->add_option("--r", ev.r, "Stopping ratio")->check(CLI::Range(0.0, 1.0));
  evaluate->add_option("--order", ev.order, "FHEB feature order (default: column order)")->delimiter(',');
  evaluate->add_option("--lambda", ev.lambda, "Ridge penalty")->check(CLI::NonNegativeNumber);
  evaluate->add_option("--json", ev.json, "Write the JSON report here");
  evaluate->add_option("--csv", ev.csv, "Write model,metric,value here (default: stdout)");

  BenchmarkArgs bm;
  auto* benchmark = app.add_subcommand("benchmark", "Simulated grid comparison of all models");
  benchmark->add_option("--grid", bm.grid, "Grid name")->check(CLI::IsMember({"default"}));
  benchmark->add_option("--replicates", bm.replicates, "Datasets per cell")->check(CLI::PositiveNumber);
  benchmark->add_option("--seed", bm.seed, "Base seed");
  benchmark->add_option("--r", bm.r, "Stopping ratio")->check(CLI::Range(0.0, 1.0));
  benchmark->add_option("--json", bm.json, "Write the JSON report here");
  benchmark->add_option("--csv", bm.csv, "Write model,metric,value here (default: stdout)");

  StalenessArgs st;
  auto* staleness = app.add_subcommand("staleness", "AVG-MSE degradation by retrain period");
  staleness->add_option("--input", st.input, "Dataset CSV")->required()->check(CLI::ExistingFile);
  staleness->add_option("--periods", st.periods, "Retrain periods, e.g. 1,2,4,7,14")
      ->delimiter(',')
      ->check(CLI::PositiveNumber);
  staleness->add_option("--method", st.method, "Hierarchy type")
      ->check(CLI::IsMember({"dheb", "fheb", "2hb"}));
  staleness->add_option("--order", st.order, "Feature order for fheb")->delimiter(',');
  staleness->add_option("--r", st.r, "Stopping ratio")->check(CLI::Range(0.0, 1.0));
  staleness->add_option("--out", st.out, "JSON report (default: stdout)");

  ServeArgs sv;
  auto* serve = app.add_subcommand("serve", "Serve predictions over HTTP");
  serve->add_option("--config", sv.config, "JSON config file")->check(CLI::ExistingFile);
  serve->add_option("--model", sv.model, "Model file");
  serve->add_option("--host", sv.host, "Listen address");
  serve->add_option("--port", sv.port, "Listen port (0 = any free port)")->check(CLI::Range(0, 65535));
  serve->add_option("--threads", sv.threads, "Worker threads")->check(CLI::PositiveNumber);
  serve->add_option("--watch-ms", sv.watch_ms, "Model file poll interval")->check(CLI::PositiveNumber);

  DaemonArgs dm;
  auto* daemon = app.add_subcommand("retrain-daemon", "Retrain and replace the model every T days");
  daemon->add_option("--input", dm.cfg.data_path, "Dataset CSV")->required()->check(CLI::ExistingFile);
  daemon->add_option("--out", dm.cfg.model_path, "Model file")->required();
  daemon->add_option("--method", dm.cfg.method, "Hierarchy type")
      ->check(CLI::IsMember({"dheb", "fheb", "2hb"}));
  daemon->add_option("--order", dm.order, "Feature order for fheb")->delimiter(',');
  daemon->add_option("--r", dm.cfg.train.r, "Stopping ratio")->check(CLI::Range(0.0, 1.0));
  daemon->add_option("--period", dm.cfg.retrain_period_days, "Retrain period T in days")
      ->check(CLI::PositiveNumber);
  daemon->add_option("--window-days", dm.cfg.train_window_days, "Training window (0 = all data)")
      ->check(CLI::NonNegativeNumber);
  daemon->add_option("--day-seconds", dm.cfg.day_seconds, "Length of a day in seconds")
      ->check(CLI::PositiveNumber);
  daemon->add_option("--max-iterations", dm.cfg.max_iterations, "Stop after N runs (0 = forever)")
      ->check(CLI::NonNegativeNumber);
  daemon->add_option("--trained-at", dm.trained_at, "Fixed timestamp (default: time of each run)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (!serve->parsed()) configure_logging(log_level);
    if (simulate->parsed()) return run_simulate(sim);
    if (train->parsed()) return run_train(tr);
    if (predict->parsed()) return run_predict(pr);
    if (evaluate->parsed()) return run_evaluate(ev);
    if (benchmark->parsed()) return run_benchmark_cmd(bm);
    if (staleness->parsed()) return run_staleness(st);
    if (serve->parsed()) {
      if (sv.log_level.empty()) sv.log_level = log_level;
      return run_serve(sv);
    }
    if (daemon->parsed()) return run_daemon(dm);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
