#include "dheb/simulation.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "dheb/error.hpp"

namespace dheb {

namespace {

std::string category_label(const std::string& feature, int index) {
  std::string label = feature;
  for (auto& c : label) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return label + std::to_string(index + 1);
}

std::string unit_label(int index, int total) {
  const int width = static_cast<int>(std::to_string(std::max(total - 1, 0)).size());
  std::string digits = std::to_string(index);
  return "bu" + std::string(static_cast<std::size_t>(std::max(0, width - static_cast<int>(digits.size()))), '0') + digits;
}

}  // namespace

DateRange SimConfig::default_date_range() {
  using namespace std::chrono;
  return DateRange{sys_days{2017y / January / 1}, sys_days{2017y / June / 30}};
}

void SimConfig::validate() const {
  if (n_bid_units < 1) throw ConfigError("n_bid_units must be >= 1");
  if (features.empty() && !implicit_hierarchy.empty()) throw ConfigError("hierarchy without features");
  if (min_categories < 1 || max_categories < min_categories) {
    throw ConfigError("invalid category count range");
  }
  for (const auto& f : features) {
    if (f.n_categories < 0) throw ConfigError("negative category count for '" + f.name + "'");
  }
  for (const auto& h : implicit_hierarchy) {
    if (std::none_of(features.begin(), features.end(), [&](const auto& f) { return f.name == h; })) {
      throw ConfigError("hierarchy feature '" + h + "' is not a declared feature");
    }
  }
  if (date_range.last < date_range.first) throw ConfigError("date range is reversed");
  if (!(top_prior.variance > 0.0) || !std::isfinite(top_prior.mean)) {
    throw ConfigError("top prior needs a finite mean and positive variance");
  }
  if (child_variance && !(*child_variance > 0.0)) throw ConfigError("child variance must be > 0");
  if (!(noise_variance > 0.0)) throw ConfigError("noise variance must be > 0");
  if (n_obs_per_unit < 1) throw ConfigError("n_obs_per_unit must be >= 1");
  if (n_obs_per_unit > date_range.days()) {
    throw ConfigError("n_obs_per_unit exceeds the number of days in the range");
  }
  if (!(y_zero_fraction >= 0.0 && y_zero_fraction <= 1.0)) {
    throw ConfigError("y_zero_fraction must lie in [0, 1]");
  }
  if (min_clicks < 1 || max_clicks < min_clicks) throw ConfigError("invalid click range");
}

SimResult generate(const SimConfig& config) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  const double child_var = config.child_variance.value_or(config.top_prior.variance);
  const double child_sd = std::sqrt(child_var);

  std::vector<std::string> names;
  std::vector<int> counts;
  for (const auto& f : config.features) {
    names.push_back(f.name);
    int count = f.n_categories;
    if (count == 0) {
      count = std::uniform_int_distribution<int>(config.min_categories, config.max_categories)(rng);
    }
    counts.push_back(count);
  }
  FeatureSchema schema(names);
  for (std::size_t f = 0; f < names.size(); ++f) {
    for (int c = 0; c < counts[f]; ++c) {
      schema.mutable_feature(f).domain.intern(category_label(names[f], c));
    }
  }

  // Latent tree: parent category and mean per category, level by level.
  std::vector<std::size_t> levels;
  for (const auto& h : config.implicit_hierarchy) levels.push_back(*schema.feature_index(h));
  std::vector<std::vector<int>> parent(levels.size());
  std::vector<std::vector<double>> mean(levels.size());
  for (std::size_t l = 0; l < levels.size(); ++l) {
    const int count = counts[levels[l]];
    parent[l].resize(static_cast<std::size_t>(count), -1);
    mean[l].resize(static_cast<std::size_t>(count));
    for (int c = 0; c < count; ++c) {
      double parent_mean = config.top_prior.mean;
      double sd = std::sqrt(config.top_prior.variance);
      if (l > 0) {
        const int p = std::uniform_int_distribution<int>(0, counts[levels[l - 1]] - 1)(rng);
        parent[l][c] = p;
        parent_mean = mean[l - 1][p];
        sd = child_sd;
      }
      mean[l][c] = std::normal_distribution<double>(parent_mean, sd)(rng);
    }
  }

  // Bid units: bottom category, path to the top, RPC, free features.
  struct Unit {
    std::vector<std::uint32_t> features;
    double rpc = 0.0;
  };
  std::vector<Unit> units(static_cast<std::size_t>(config.n_bid_units));
  std::map<std::string, double> truth;
  for (int u = 0; u < config.n_bid_units; ++u) {
    Unit& unit = units[u];
    unit.features.assign(names.size(), 0);
    double parent_mean = config.top_prior.mean;
    double sd = std::sqrt(config.top_prior.variance);
    if (!levels.empty()) {
      int c = std::uniform_int_distribution<int>(0, counts[levels.back()] - 1)(rng);
      parent_mean = mean.back()[c];
      sd = child_sd;
      for (std::size_t l = levels.size(); l-- > 0;) {
        unit.features[levels[l]] = static_cast<std::uint32_t>(c);
        if (l > 0) c = parent[l][c];
      }
    }
    for (std::size_t f = 0; f < names.size(); ++f) {
      if (std::find(levels.begin(), levels.end(), f) != levels.end()) continue;
      unit.features[f] =
          static_cast<std::uint32_t>(std::uniform_int_distribution<int>(0, counts[f] - 1)(rng));
    }
    unit.rpc = std::normal_distribution<double>(parent_mean, sd)(rng);
    const auto id = unit_label(u, config.n_bid_units);
    schema.mutable_bid_units().intern(id);
    truth.emplace(id, unit.rpc);
  }

  // Observations: n distinct days per unit, uniform clicks, Gaussian noise.
  const int days = config.date_range.days();
  std::vector<int> day_index(static_cast<std::size_t>(days));
  std::iota(day_index.begin(), day_index.end(), 0);
  std::uniform_int_distribution<int> clicks_dist(config.min_clicks, config.max_clicks);
  std::normal_distribution<double> noise(0.0, std::sqrt(config.noise_variance));
  std::vector<Observation> obs;
  obs.reserve(static_cast<std::size_t>(config.n_bid_units) *
              static_cast<std::size_t>(config.n_obs_per_unit));
  for (int u = 0; u < config.n_bid_units; ++u) {
    // Partial Fisher-Yates: the first n entries become a uniform sample.
    for (int i = 0; i < config.n_obs_per_unit; ++i) {
      const int j = std::uniform_int_distribution<int>(i, days - 1)(rng);
      std::swap(day_index[i], day_index[j]);
    }
    std::vector<int> chosen(day_index.begin(), day_index.begin() + config.n_obs_per_unit);
    std::sort(chosen.begin(), chosen.end());
    for (int d : chosen) {
      Observation o;
      o.date = config.date_range.first + std::chrono::days{d};
      o.bid_unit = static_cast<std::uint32_t>(u);
      o.clicks = clicks_dist(rng);
      o.revenue = units[u].rpc * static_cast<double>(o.clicks) + noise(rng);
      if (config.truncate_negative_revenue) o.revenue = std::max(o.revenue, 0.0);
      o.features = units[u].features;
      obs.push_back(std::move(o));
    }
  }

  // y-sparsity: zero an exact share s of all revenues, chosen uniformly.
  const auto zeroed =
      static_cast<std::size_t>(std::llround(config.y_zero_fraction * static_cast<double>(obs.size())));
  if (zeroed > 0) {
    std::vector<std::size_t> idx(obs.size());
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = 0; i < zeroed; ++i) {
      const auto j = std::uniform_int_distribution<std::size_t>(i, idx.size() - 1)(rng);
      std::swap(idx[i], idx[j]);
      obs[idx[i]].revenue = 0.0;
    }
  }

  std::sort(obs.begin(), obs.end(), [](const Observation& a, const Observation& b) {
    return a.date != b.date ? a.date < b.date : a.bid_unit < b.bid_unit;
  });
  std::vector<std::map<std::string, double>> latent(levels.size());
  for (std::size_t l = 0; l < levels.size(); ++l) {
    for (std::size_t c = 0; c < mean[l].size(); ++c) {
      latent[l].emplace(schema.feature(levels[l]).domain.value(static_cast<std::uint32_t>(c)), mean[l][c]);
    }
  }
  auto shared = std::make_shared<const FeatureSchema>(std::move(schema));
  return SimResult{Dataset(std::move(shared), std::move(obs), config.date_range,
                           !config.truncate_negative_revenue),
                   std::move(truth), std::move(counts), std::move(latent)};
}

std::vector<GridCell> default_grid() {
  std::vector<GridCell> cells;
  for (int n : {30, 10, 3}) {
    for (double s : {0.5, 0.9, 0.98}) cells.push_back(GridCell{n, s});
  }
  return cells;
}

std::uint64_t replicate_seed(std::uint64_t base_seed, std::size_t cell_index, int replicate) {
  std::seed_seq seq{static_cast<std::uint32_t>(base_seed), static_cast<std::uint32_t>(base_seed >> 32),
                    static_cast<std::uint32_t>(cell_index), static_cast<std::uint32_t>(replicate),
                    0x9e3779b9u};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

SimConfig grid_config(const SimConfig& base, const GridCell& cell, std::size_t cell_index,
                      int replicate) {
  SimConfig cfg = base;
  cfg.n_obs_per_unit = cell.n_obs_per_unit;
  cfg.y_zero_fraction = cell.y_zero_fraction;
  cfg.seed = replicate_seed(base.seed, cell_index, replicate);
  return cfg;
}

std::vector<GridDataset> grid(const SimConfig& base, const std::vector<GridCell>& cells,
                              int replicates) {
  if (replicates < 1) throw ConfigError("replicates must be >= 1");
  std::vector<GridDataset> out;
  out.reserve(cells.size() * static_cast<std::size_t>(replicates));
  for (std::size_t c = 0; c < cells.size(); ++c) {
    for (int r = 0; r < replicates; ++r) {
      SimConfig cfg = grid_config(base, cells[c], c, r);
      SimResult data = generate(cfg);
      out.push_back(GridDataset{c, r, cells[c], std::move(cfg), std::move(data)});
    }
  }
  return out;
}

void write_ground_truth_csv(const std::map<std::string, double>& truth,
                            const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << "bid_unit_id,true_rpc\n";
  for (const auto& [unit, rpc] : truth) out << unit << ',' << format_double(rpc) << '\n';
}

}  // namespace dheb
