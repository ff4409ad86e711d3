#include "dheb/serving.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "dheb/data.hpp"
#include "dheb/error.hpp"
#include "dheb/model_io.hpp"
#include "httplib.h"
#include "json.hpp"

namespace dheb {

namespace {

using Json = nlohmann::ordered_json;

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

HttpResult error_result(int status, const std::string& message) {
  return HttpResult{status, Json{{"error", message}}.dump() + "\n"};
}

}  // namespace

void configure_logging(std::optional<std::string> level) {
  if (!level || level->empty()) {
    const char* env = std::getenv("DHEB_LOG");
    level = env ? std::string(env) : std::string("info");
  }
  static const std::pair<const char*, spdlog::level::level_enum> kLevels[] = {
      {"trace", spdlog::level::trace}, {"debug", spdlog::level::debug},
      {"info", spdlog::level::info},   {"warn", spdlog::level::warn},
      {"error", spdlog::level::err},   {"critical", spdlog::level::critical},
      {"off", spdlog::level::off}};
  for (const auto& [name, value] : kLevels) {
    if (*level == name) {
      spdlog::set_level(value);
      return;
    }
  }
  throw ConfigError("unknown log level '" + *level + "'");
}

std::vector<Query> read_query_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("missing header row", 1);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_csv_line(line);
  if (header.size() < 2 || header[0] != "bid_unit_id" || header[1] != "date") {
    throw DataError("header must be bid_unit_id,date,<features...>", 1);
  }
  std::vector<Query> queries;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw DataError("expected " + std::to_string(header.size()) + " columns, found " +
                          std::to_string(cells.size()),
                      line_no);
    }
    Query q;
    q.bid_unit_id = cells[0];
    if (q.bid_unit_id.empty()) throw DataError("empty bid_unit_id", line_no);
    if (!cells[1].empty()) {
      try {
        q.date = parse_day(cells[1]);
      } catch (const DataError& e) {
        throw DataError(e.what(), line_no);
      }
    }
    for (std::size_t i = 2; i < header.size(); ++i) {
      if (!cells[i].empty()) q.features[header[i]] = cells[i];
    }
    queries.push_back(std::move(q));
  }
  return queries;
}

std::vector<Query> read_query_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  return read_query_csv(in);
}

void write_predictions_csv(std::ostream& out, const std::vector<Query>& queries,
                           const RpcModel& model) {
  out << "bid_unit_id,date,rpc\n";
  for (const auto& q : queries) {
    out << q.bid_unit_id << ',' << (q.date ? format_day(*q.date) : std::string()) << ','
        << format_double(model.predict_rpc(q)) << '\n';
  }
}

ModelStore::ModelStore(HierarchyModel model)
    : snapshot_{std::make_shared<const HierarchyModel>(std::move(model)), 1} {}

ModelSnapshot ModelStore::current() const {
  std::lock_guard lock(mutex_);
  return snapshot_;
}

std::uint64_t ModelStore::swap(HierarchyModel model) {
  auto next = std::make_shared<const HierarchyModel>(std::move(model));
  std::shared_ptr<const HierarchyModel> old;
  std::lock_guard lock(mutex_);
  old = std::move(snapshot_.model);
  snapshot_.model = std::move(next);
  return ++snapshot_.version;
}

ModelWatcher::ModelWatcher(ModelStore& store, std::filesystem::path path,
                           std::chrono::milliseconds interval)
    : store_(store), path_(std::move(path)), interval_(interval), last_(stamp()) {}

ModelWatcher::~ModelWatcher() { stop(); }

std::optional<ModelWatcher::Stamp> ModelWatcher::stamp() const {
  std::error_code ec;
  const auto mtime = std::filesystem::last_write_time(path_, ec);
  if (ec) return std::nullopt;
  const auto size = std::filesystem::file_size(path_, ec);
  if (ec) return std::nullopt;
  return Stamp{mtime, size};
}

bool ModelWatcher::poll_once() {
  const auto now = stamp();
  if (!now || now == last_) return false;
  last_ = now;
  try {
    const auto version = store_.swap(load_model_file(path_));
    spdlog::info("loaded model {} as version {}", path_.string(), version);
    return true;
  } catch (const Error& e) {
    spdlog::warn("ignoring unloadable model {}: {}", path_.string(), e.what());
    return false;
  }
}

void ModelWatcher::start() {
  if (running_.exchange(true)) return;
  thread_ = std::thread([this] {
    while (running_) {
      poll_once();
      auto remaining = interval_;
      const auto step = std::chrono::milliseconds(20);
      while (running_ && remaining.count() > 0) {
        std::this_thread::sleep_for(std::min(step, remaining));
        remaining -= step;
      }
    }
  });
}

void ModelWatcher::stop() {
  running_ = false;
  if (thread_.joinable()) thread_.join();
}

Query parse_query_json(std::string_view body) {
  Json doc;
  try {
    doc = Json::parse(body.begin(), body.end());
  } catch (const Json::exception& e) {
    throw DataError(std::string("request is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw DataError("request must be a JSON object");
  Query q;
  const auto unit = doc.find("bid_unit_id");
  if (unit == doc.end() || !unit->is_string() || unit->get<std::string>().empty()) {
    throw DataError("bid_unit_id must be a non-empty string");
  }
  q.bid_unit_id = unit->get<std::string>();
  if (const auto date = doc.find("date"); date != doc.end() && !date->is_null()) {
    if (!date->is_string()) throw DataError("date must be a YYYY-MM-DD string");
    q.date = parse_day(date->get<std::string>());
  }
  if (const auto features = doc.find("features"); features != doc.end() && !features->is_null()) {
    if (!features->is_object()) throw DataError("features must be an object");
    for (const auto& [name, value] : features->items()) {
      if (!value.is_string()) throw DataError("feature '" + name + "' must be a string");
      q.features[name] = value.get<std::string>();
    }
  }
  return q;
}

HttpResult handle_predict(const ModelSnapshot& snapshot, std::string_view body) {
  Query q;
  try {
    q = parse_query_json(body);
  } catch (const DataError& e) {
    return error_result(400, e.what());
  }
  const auto result = snapshot.model->predict(q);
  Json out{{"rpc", result.rpc},
           {"model_trained_at", snapshot.model->trained_at()},
           {"matched_depth", result.matched_depth},
           {"model_version", snapshot.version}};
  return HttpResult{200, out.dump() + "\n"};
}

HttpResult handle_meta(const ModelSnapshot& snapshot) {
  const auto& m = *snapshot.model;
  Json out;
  out["method"] = m.method();
  out["trained_at"] = m.trained_at();
  out["features"] = m.feature_names();
  out["fixed_order"] = m.fixed_order();
  out["r"] = m.config().r;
  if (const auto& range = m.training_range()) {
    out["training_data_range"] =
        Json{{"first", format_day(range->first)}, {"last", format_day(range->last)}};
  } else {
    out["training_data_range"] = nullptr;
  }
  out["nodes"] = m.nodes().size();
  out["max_depth"] = m.max_depth();
  out["model_version"] = snapshot.version;
  return HttpResult{200, out.dump() + "\n"};
}

void ServeConfig::validate() const {
  if (model_path.empty()) throw ConfigError("model path is required");
  if (port < 0 || port > 65535) throw ConfigError("port must lie in [0, 65535]");
  if (retrain_period_days < 1) throw ConfigError("retrain period T must be >= 1");
  if (watch_interval_ms < 1) throw ConfigError("watch interval must be >= 1 ms");
  if (threads < 1) throw ConfigError("threads must be >= 1");
}

ServeConfig load_serve_config(const std::filesystem::path& path, ServeConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  Json doc;
  try {
    doc = Json::parse(in);
    if (!doc.is_object()) throw ConfigError("config must be a JSON object");
    if (doc.contains("model_path")) base.model_path = doc["model_path"].get<std::string>();
    if (doc.contains("host")) base.host = doc["host"].get<std::string>();
    if (doc.contains("port")) base.port = doc["port"].get<int>();
    if (doc.contains("retrain_period_days")) {
      base.retrain_period_days = doc["retrain_period_days"].get<int>();
    }
    if (doc.contains("data_path")) base.data_path = doc["data_path"].get<std::string>();
    if (doc.contains("log_level")) base.log_level = doc["log_level"].get<std::string>();
    if (doc.contains("watch_interval_ms")) {
      base.watch_interval_ms = doc["watch_interval_ms"].get<int>();
    }
    if (doc.contains("threads")) base.threads = doc["threads"].get<int>();
  } catch (const Json::exception& e) {
    throw ConfigError("bad config '" + path.string() + "': " + e.what());
  }
  return base;
}

struct PredictionServer::Impl {
  httplib::Server http;
  std::unique_ptr<ModelWatcher> watcher;
  std::thread listener;
};

PredictionServer::PredictionServer(ServeConfig config)
    : config_((config.validate(), std::move(config))),
      store_(load_model_file(config_.model_path)),
      impl_(std::make_unique<Impl>()) {
  const int threads = config_.threads;
  impl_->http.new_task_queue = [threads] { return new httplib::ThreadPool(threads); };
  impl_->http.set_tcp_nodelay(true);
  impl_->http.Post("/predict", [this](const httplib::Request& req, httplib::Response& res) {
    const auto snapshot = store_.current();
    const auto result = handle_predict(snapshot, req.body);
    res.status = result.status;
    res.set_content(result.body, "application/json");
  });
  impl_->http.Get("/model/meta", [this](const httplib::Request&, httplib::Response& res) {
    const auto result = handle_meta(store_.current());
    res.status = result.status;
    res.set_content(result.body, "application/json");
  });
  impl_->http.set_exception_handler(
      [](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
        std::string message = "internal error";
        try {
          std::rethrow_exception(ep);
        } catch (const std::exception& e) {
          message = e.what();
        } catch (...) {
        }
        spdlog::error("request failed: {}", message);
        res.status = 500;
        res.set_content(Json{{"error", message}}.dump() + "\n", "application/json");
      });
  impl_->watcher = std::make_unique<ModelWatcher>(
      store_, config_.model_path, std::chrono::milliseconds(config_.watch_interval_ms));
}

PredictionServer::~PredictionServer() { stop(); }

int PredictionServer::start() {
  if (config_.port == 0) {
    port_ = impl_->http.bind_to_any_port(config_.host);
  } else {
    port_ = impl_->http.bind_to_port(config_.host, config_.port) ? config_.port : -1;
  }
  if (port_ < 0) {
    throw Error("cannot listen on " + config_.host + ":" + std::to_string(config_.port));
  }
  impl_->watcher->start();
  impl_->listener = std::thread([this] { impl_->http.listen_after_bind(); });
  impl_->http.wait_until_ready();
  spdlog::info("serving {} on {}:{}", config_.model_path.string(), config_.host, port_);
  return port_;
}

void PredictionServer::wait() {
  if (impl_->listener.joinable()) impl_->listener.join();
}

void PredictionServer::stop() {
  if (!impl_) return;
  impl_->watcher->stop();
  impl_->http.stop();
  if (impl_->listener.joinable()) impl_->listener.join();
}

void RetrainConfig::validate() const {
  if (data_path.empty()) throw ConfigError("data path is required");
  if (model_path.empty()) throw ConfigError("model path is required");
  if (method != "dheb" && method != "fheb" && method != "2hb") {
    throw ConfigError("retrain method must be dheb, fheb or 2hb");
  }
  if (method == "fheb" && fixed_order.empty()) throw ConfigError("fheb needs a feature order");
  if (retrain_period_days < 1) throw ConfigError("retrain period T must be >= 1");
  if (train_window_days < 0) throw ConfigError("training window must be >= 0");
  if (!(day_seconds > 0.0)) throw ConfigError("day length must be > 0");
  if (max_iterations < 0) throw ConfigError("max iterations must be >= 0");
}

HierarchyModel train_hierarchy(const Dataset& ds, const std::string& method,
                               const std::vector<std::string>& fixed_order,
                               const TrainConfig& config) {
  if (method == "dheb") return train_dheb(ds, config);
  if (method == "fheb") {
    if (fixed_order.empty()) throw ConfigError("fheb needs a feature order");
    return train_fheb(ds, fixed_order, config);
  }
  if (method == "2hb") return train_fheb(ds, {}, config);
  throw ConfigError("unknown hierarchy method '" + method + "'");
}

int run_retrain_daemon(const RetrainConfig& config, const std::atomic<bool>& stop) {
  config.validate();
  int runs = 0;
  int attempts = 0;
  const auto period = std::chrono::duration<double>(config.day_seconds * config.retrain_period_days);
  while (!stop) {
    ++attempts;
    const auto started = std::chrono::steady_clock::now();
    try {
      auto data = ingest_csv(config.data_path).dataset;
      if (config.train_window_days > 0 && data.date_range()) {
        const Day last = data.date_range()->last;
        data = data.slice({last - std::chrono::days{config.train_window_days - 1}, last});
      }
      TrainConfig train = config.train;
      if (train.trained_at.empty()) train.trained_at = utc_timestamp();
      const auto model = train_hierarchy(data, config.method, config.fixed_order, train);
      save_model_file(model, config.model_path);
      ++runs;
      spdlog::info("retrain {}: {} nodes written to {}", runs, model.nodes().size(),
                   config.model_path.string());
    } catch (const Error& e) {
      spdlog::error("retrain failed: {}", e.what());
    }
    if (config.max_iterations > 0 && attempts >= config.max_iterations) break;
    const auto wake = started + std::chrono::duration_cast<std::chrono::steady_clock::duration>(period);
    while (!stop && std::chrono::steady_clock::now() < wake) {
      std::this_thread::sleep_for(std::min<std::chrono::steady_clock::duration>(
          std::chrono::milliseconds(50), wake - std::chrono::steady_clock::now()));
    }
  }
  return runs;
}

std::string utc_timestamp() {
  const auto now = std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now());
  const auto day = std::chrono::floor<std::chrono::days>(now);
  const std::chrono::hh_mm_ss hms(now - day);
  char buf[16];
  std::snprintf(buf, sizeof buf, "T%02d:%02d:%02dZ", static_cast<int>(hms.hours().count()),
                static_cast<int>(hms.minutes().count()), static_cast<int>(hms.seconds().count()));
  return format_day(day) + buf;
}

}  // namespace dheb
