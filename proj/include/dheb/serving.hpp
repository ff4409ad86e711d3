#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "dheb/predictor.hpp"
#include "dheb/tree.hpp"

namespace dheb {

// Sets the global spdlog level from `level`, or from DHEB_LOG when empty.
// Accepts trace, debug, info, warn, error, critical, off. Unknown values
// throw ConfigError.
void configure_logging(std::optional<std::string> level = std::nullopt);

// Current UTC time as YYYY-MM-DDTHH:MM:SSZ.
std::string utc_timestamp();

// ---- offline query files -------------------------------------------------

// Reads `bid_unit_id,date,<feature...>`. The date column may be empty.
// Throws DataError with the offending line.
std::vector<Query> read_query_csv(std::istream& in);
std::vector<Query> read_query_csv(const std::filesystem::path& path);

// Writes `bid_unit_id,date,rpc` with round-trip doubles.
void write_predictions_csv(std::ostream& out, const std::vector<Query>& queries,
                           const RpcModel& model);

// ---- online phase --------------------------------------------------------

struct ModelSnapshot {
  std::shared_ptr<const HierarchyModel> model;
  std::uint64_t version = 0;
};

// Holds the model currently being served. Readers copy the snapshot pointer
// and use it for the whole request, so a swap never affects a request that is
// already running.
class ModelStore {
 public:
  explicit ModelStore(HierarchyModel model);

  ModelSnapshot current() const;
  // Returns the new version number.
  std::uint64_t swap(HierarchyModel model);

 private:
  mutable std::mutex mutex_;
  ModelSnapshot snapshot_;
};

// Polls a model file and swaps in new versions. A file that fails to load is
// logged and skipped; the previous model keeps serving.
class ModelWatcher {
 public:
  ModelWatcher(ModelStore& store, std::filesystem::path path,
               std::chrono::milliseconds interval = std::chrono::milliseconds(200));
  ~ModelWatcher();
  ModelWatcher(const ModelWatcher&) = delete;
  ModelWatcher& operator=(const ModelWatcher&) = delete;

  void start();
  void stop();
  // One check; true if a new model was swapped in.
  bool poll_once();

 private:
  struct Stamp {
    std::filesystem::file_time_type mtime;
    std::uintmax_t size = 0;
    bool operator==(const Stamp&) const = default;
  };
  std::optional<Stamp> stamp() const;

  ModelStore& store_;
  std::filesystem::path path_;
  std::chrono::milliseconds interval_;
  std::optional<Stamp> last_;
  std::atomic<bool> running_{false};
  std::thread thread_;
};

struct HttpResult {
  int status = 200;
  std::string body;
};

// Parses {"bid_unit_id": str, "date": "YYYY-MM-DD"|null, "features": {...}}.
// Throws DataError on malformed input.
Query parse_query_json(std::string_view body);

// POST /predict: {"rpc", "model_trained_at", "matched_depth", "model_version"}.
// 400 with {"error": ...} on a malformed request.
HttpResult handle_predict(const ModelSnapshot& snapshot, std::string_view body);
// GET /model/meta
HttpResult handle_meta(const ModelSnapshot& snapshot);

struct ServeConfig {
  std::filesystem::path model_path;
  std::string host = "127.0.0.1";
  // 0 picks a free port.
  int port = 8080;
  int retrain_period_days = 1;
  std::filesystem::path data_path;
  std::string log_level;
  int watch_interval_ms = 200;
  int threads = 8;

  // Throws ConfigError.
  void validate() const;
};

// Reads a JSON object whose keys match the ServeConfig fields; missing keys
// keep their defaults.
ServeConfig load_serve_config(const std::filesystem::path& path, ServeConfig base = {});

class PredictionServer {
 public:
  // Loads the model; throws ModelFormatError if it cannot be loaded.
  explicit PredictionServer(ServeConfig config);
  ~PredictionServer();
  PredictionServer(const PredictionServer&) = delete;
  PredictionServer& operator=(const PredictionServer&) = delete;

  // Binds and serves on a background thread. Returns the bound port.
  int start();
  // Blocks until stop() is called from elsewhere.
  void wait();
  void stop();

  ModelStore& store() { return store_; }
  int port() const { return port_; }

 private:
  struct Impl;
  ServeConfig config_;
  ModelStore store_;
  std::unique_ptr<Impl> impl_;
  int port_ = 0;
};

// ---- offline phase -------------------------------------------------------

struct RetrainConfig {
  std::filesystem::path data_path;
  std::filesystem::path model_path;
  std::string method = "dheb";
  std::vector<std::string> fixed_order;
  TrainConfig train;
  int retrain_period_days = 1;
  // Trains on the last `train_window_days` days of the data; 0 uses all of it.
  int train_window_days = 60;
  // Length of a "day" for scheduling.
  double day_seconds = 86400.0;
  // Stop after this many training runs; 0 runs until stopped.
  int max_iterations = 0;

  void validate() const;
};

// Trains the configured hierarchy on `ds` (dheb, fheb or 2hb).
HierarchyModel train_hierarchy(const Dataset& ds, const std::string& method,
                               const std::vector<std::string>& fixed_order,
                               const TrainConfig& config);

// Re-reads the data, trains and atomically replaces the model file every
// retrain_period_days * day_seconds seconds, starting immediately. Returns the
// number of successful runs. A failed run is logged and retried on the next
// tick. Setting `stop` ends the loop at the next check.
int run_retrain_daemon(const RetrainConfig& config, const std::atomic<bool>& stop);

}  // namespace dheb
