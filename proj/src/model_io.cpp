#include "dheb/model_io.hpp"

#include <fstream>
#include <sstream>
#include <system_error>

#include <unistd.h>

#include "dheb/error.hpp"
#include "json.hpp"

namespace dheb {

namespace {

using Json = nlohmann::ordered_json;

Json normal_to_json(const NormalParams& p) { return Json{{"mean", p.mean}, {"var", p.variance}}; }

NormalParams normal_from_json(const Json& j) {
  return NormalParams{j.at("mean").get<double>(), j.at("var").get<double>()};
}

template <typename T>
Json optional_to_json(const std::optional<T>& v) {
  return v ? Json(*v) : Json(nullptr);
}

template <typename T>
std::optional<T> optional_from_json(const Json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<T>();
}

}  // namespace

std::string save_model(const HierarchyModel& model) {
  Json doc;
  doc["format_version"] = kModelFormatVersion;
  doc["method"] = model.method();
  doc["schema"] = Json{{"features", model.feature_names()}, {"bottom", "bid_unit_id"}};
  doc["config"] = Json{{"r", model.config().r},
                       {"variance_floor", model.config().variance_floor},
                       {"tie_break", "lexicographic_feature_name"}};
  doc["trained_at"] = model.trained_at();
  if (const auto& range = model.training_range()) {
    doc["training_data_range"] =
        Json{{"first", format_day(range->first)}, {"last", format_day(range->last)}};
  } else {
    doc["training_data_range"] = nullptr;
  }
  doc["fixed_order"] = model.fixed_order();
  Json nodes = Json::array();
  for (const auto& n : model.nodes()) {
    Json jn;
    jn["node_id"] = n.id;
    jn["parent_id"] = optional_to_json(n.parent);
    jn["depth"] = n.depth;
    jn["split_feature"] = optional_to_json(n.split_feature);
    jn["category"] = optional_to_json(n.category);
    jn["prior"] = normal_to_json(n.prior);
    jn["posterior"] = normal_to_json(n.posterior);
    jn["sigma_eps_sq"] = n.sigma_eps_sq;
    jn["n_obs"] = n.n_obs;
    jn["is_bid_unit_leaf"] = n.is_bid_unit_leaf;
    if (n.is_bid_unit_leaf) jn["bid_unit_id"] = *n.category;
    nodes.push_back(std::move(jn));
  }
  doc["nodes"] = std::move(nodes);
  return doc.dump(1) + "\n";
}

HierarchyModel load_model(std::string_view text) {
  Json doc;
  try {
    doc = Json::parse(text.begin(), text.end());
  } catch (const Json::exception& e) {
    throw ModelFormatError(std::string("model is not valid JSON: ") + e.what());
  }
  try {
    const int version = doc.at("format_version").get<int>();
    if (version != kModelFormatVersion) {
      throw ModelFormatError("unsupported model format_version " + std::to_string(version) +
                             " (expected " + std::to_string(kModelFormatVersion) + ")");
    }
    auto features = doc.at("schema").at("features").get<std::vector<std::string>>();
    TrainConfig config;
    config.r = doc.at("config").at("r").get<double>();
    config.variance_floor = doc.at("config").at("variance_floor").get<double>();
    config.trained_at = doc.at("trained_at").get<std::string>();
    std::optional<DateRange> range;
    if (const auto& jr = doc.at("training_data_range"); !jr.is_null()) {
      range = DateRange{parse_day(jr.at("first").get<std::string>()),
                        parse_day(jr.at("last").get<std::string>())};
    }
    std::vector<TreeNode> nodes;
    for (const auto& jn : doc.at("nodes")) {
      TreeNode n;
      n.id = jn.at("node_id").get<NodeId>();
      n.parent = optional_from_json<NodeId>(jn.at("parent_id"));
      n.depth = jn.at("depth").get<std::uint32_t>();
      n.split_feature = optional_from_json<std::string>(jn.at("split_feature"));
      n.category = optional_from_json<std::string>(jn.at("category"));
      n.prior = normal_from_json(jn.at("prior"));
      n.posterior = normal_from_json(jn.at("posterior"));
      n.sigma_eps_sq = jn.at("sigma_eps_sq").get<double>();
      n.n_obs = jn.at("n_obs").get<std::size_t>();
      n.is_bid_unit_leaf = jn.at("is_bid_unit_leaf").get<bool>();
      if (n.is_bid_unit_leaf && jn.at("bid_unit_id").get<std::string>() != n.category) {
        throw ModelFormatError("bid_unit_id disagrees with category");
      }
      nodes.push_back(std::move(n));
    }
    // Children are implied by parent links.
    for (const auto& n : nodes) {
      if (!n.parent) continue;
      if (*n.parent >= nodes.size() || !n.category) {
        throw ModelFormatError("node " + std::to_string(n.id) + " has an invalid parent");
      }
      if (!nodes[*n.parent].children.emplace(*n.category, n.id).second) {
        throw ModelFormatError("duplicate child category under node " +
                               std::to_string(*n.parent));
      }
    }
    return HierarchyModel(std::move(features), std::move(nodes), std::move(config), range,
                          doc.at("method").get<std::string>(),
                          doc.at("fixed_order").get<std::vector<std::string>>());
  } catch (const Json::exception& e) {
    throw ModelFormatError(std::string("corrupt model: ") + e.what());
  } catch (const DataError& e) {
    throw ModelFormatError(std::string("corrupt model: ") + e.what());
  }
}

void write_file_atomic(const std::filesystem::path& path, const std::string& text) {
  auto tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + tmp.string() + "'");
    out << text;
    out.flush();
    if (!out) throw Error("failed writing '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw Error("cannot move '" + tmp.string() + "' to '" + path.string() + "': " + ec.message());
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ModelFormatError("cannot open model '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void save_model_file(const HierarchyModel& model, const std::filesystem::path& path) {
  write_file_atomic(path, save_model(model));
}

HierarchyModel load_model_file(const std::filesystem::path& path) {
  return load_model(read_file(path));
}

std::string save_model(const WAModel& model) {
  Json doc;
  doc["format_version"] = kModelFormatVersion;
  doc["method"] = "wa";
  doc["global"] = model.global();
  doc["per_unit"] = model.per_unit();
  return doc.dump(1) + "\n";
}

std::string save_model(const RLRModel& model) {
  Json doc;
  doc["format_version"] = kModelFormatVersion;
  doc["method"] = "rlr";
  doc["lambda"] = model.lambda();
  doc["features"] = model.feature_names();
  doc["feature_weights"] = model.feature_weights();
  doc["unit_weights"] = model.unit_weights();
  return doc.dump(1) + "\n";
}

std::shared_ptr<const RpcModel> load_any_model(std::string_view text) {
  Json doc;
  try {
    doc = Json::parse(text.begin(), text.end());
  } catch (const Json::exception& e) {
    throw ModelFormatError(std::string("model is not valid JSON: ") + e.what());
  }
  try {
    const auto method = doc.at("method").get<std::string>();
    if (method != "wa" && method != "rlr") {
      return std::make_shared<const HierarchyModel>(load_model(text));
    }
    const int version = doc.at("format_version").get<int>();
    if (version != kModelFormatVersion) {
      throw ModelFormatError("unsupported model format_version " + std::to_string(version));
    }
    if (method == "wa") {
      return std::make_shared<const WAModel>(
          doc.at("per_unit").get<std::map<std::string, double>>(), doc.at("global").get<double>());
    }
    auto features = doc.at("features").get<std::vector<std::string>>();
    auto weights = doc.at("feature_weights").get<std::vector<std::map<std::string, double>>>();
    if (weights.size() != features.size()) {
      throw ModelFormatError("feature_weights does not match features");
    }
    return std::make_shared<const RLRModel>(std::move(features), std::move(weights),
                                            doc.at("unit_weights").get<std::map<std::string, double>>(),
                                            doc.at("lambda").get<double>());
  } catch (const Json::exception& e) {
    throw ModelFormatError(std::string("corrupt model: ") + e.what());
  }
}

std::shared_ptr<const RpcModel> load_any_model_file(const std::filesystem::path& path) {
  return load_any_model(read_file(path));
}

}  // namespace dheb
