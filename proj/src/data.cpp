#include "dheb/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <unordered_set>

#include "dheb/error.hpp"

namespace dheb {

namespace {

constexpr std::string_view kReservedColumns[] = {"date", "bid_unit_id", "clicks",
                                                 "revenue"};

bool is_reserved(std::string_view name) {
  return std::find(std::begin(kReservedColumns), std::end(kReservedColumns), name) !=
         std::end(kReservedColumns);
}

std::vector<std::string_view> split_row(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      cells.push_back(line.substr(start));
      break;
    }
    cells.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return cells;
}

std::string_view strip_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

template <typename T>
bool parse_number(std::string_view text, T& out) {
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

}  // namespace

Day parse_day(std::string_view text) {
  int y = 0;
  unsigned m = 0;
  unsigned d = 0;
  if (text.size() != 10 || text[4] != '-' || text[7] != '-' ||
      !parse_number(text.substr(0, 4), y) || !parse_number(text.substr(5, 2), m) ||
      !parse_number(text.substr(8, 2), d)) {
    throw DataError("invalid date '" + std::string(text) + "', expected YYYY-MM-DD");
  }
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m},
                                        std::chrono::day{d}};
  if (!ymd.ok()) throw DataError("invalid calendar date '" + std::string(text) + "'");
  return Day{ymd};
}

std::string format_day(Day day) {
  const std::chrono::year_month_day ymd{day};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

std::string day_of_week_name(Day day) {
  static constexpr const char* kNames[] = {"Sun", "Mon", "Tue", "Wed", "Thu", "Fri", "Sat"};
  return kNames[std::chrono::weekday{day}.c_encoding()];
}

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ptr);
}

std::uint32_t CategoryDomain::intern(std::string_view value) {
  if (auto it = index_.find(std::string(value)); it != index_.end()) return it->second;
  const auto idx = static_cast<std::uint32_t>(values_.size());
  values_.emplace_back(value);
  index_.emplace(values_.back(), idx);
  return idx;
}

std::optional<std::uint32_t> CategoryDomain::find(std::string_view value) const {
  if (auto it = index_.find(std::string(value)); it != index_.end()) return it->second;
  return std::nullopt;
}

FeatureSchema::FeatureSchema(std::vector<std::string> feature_names) {
  std::unordered_set<std::string> seen;
  for (auto& name : feature_names) {
    if (name.empty()) throw ConfigError("empty feature name");
    if (is_reserved(name)) throw ConfigError("feature name '" + name + "' is reserved");
    if (!seen.insert(name).second) throw ConfigError("duplicate feature name '" + name + "'");
    features_.push_back(FeatureSpec{std::move(name), {}});
  }
}

std::optional<std::size_t> FeatureSchema::feature_index(std::string_view name) const {
  for (std::size_t i = 0; i < features_.size(); ++i) {
    if (features_[i].name == name) return i;
  }
  return std::nullopt;
}

std::vector<std::string> FeatureSchema::feature_names() const {
  std::vector<std::string> names;
  names.reserve(features_.size());
  for (const auto& f : features_) names.push_back(f.name);
  return names;
}

Dataset::Dataset(std::shared_ptr<const FeatureSchema> schema,
                 std::vector<Observation> observations, std::optional<DateRange> range,
                 bool allow_negative_revenue)
    : schema_(std::move(schema)), observations_(std::move(observations)), range_(range) {
  if (!schema_) throw ConfigError("dataset requires a schema");
  if (range_ && range_->last < range_->first) throw DataError("date range is reversed");
  const std::size_t k = schema_->num_features();
  std::optional<DateRange> seen;
  for (const auto& o : observations_) {
    if (o.clicks <= 0) throw DataError("observation with non-positive clicks");
    if (!std::isfinite(o.revenue) || (!allow_negative_revenue && o.revenue < 0.0)) {
      throw DataError("observation with invalid revenue");
    }
    if (o.features.size() != k) throw DataError("observation feature count mismatch");
    for (std::size_t f = 0; f < k; ++f) {
      if (o.features[f] >= schema_->feature(f).domain.size()) {
        throw DataError("observation category outside domain of '" +
                        schema_->feature(f).name + "'");
      }
    }
    if (o.bid_unit >= schema_->bid_units().size()) {
      throw DataError("observation bid unit outside domain");
    }
    if (range_ && !range_->contains(o.date)) {
      throw DataError("observation dated " + format_day(o.date) + " outside date range");
    }
    if (!seen) {
      seen = DateRange{o.date, o.date};
    } else {
      seen->first = std::min(seen->first, o.date);
      seen->last = std::max(seen->last, o.date);
    }
  }
  if (!range_) range_ = seen;
}

Dataset Dataset::slice(DateRange range) const {
  std::vector<Observation> kept;
  for (const auto& o : observations_) {
    if (range.contains(o.date)) kept.push_back(o);
  }
  return Dataset(schema_, std::move(kept), range, true);
}

bool Dataset::operator==(const Dataset& other) const {
  return *schema_ == *other.schema_ && observations_ == other.observations_ &&
         range_ == other.range_;
}

IngestResult ingest_csv_stream(std::istream& in, std::optional<FeatureSchema> schema) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("missing header row", 1);
  const auto header = split_row(strip_cr(line));
  if (header.size() < 4 || header[0] != "date" || header[1] != "bid_unit_id" ||
      header[header.size() - 2] != "clicks" || header.back() != "revenue") {
    throw DataError("header must be date,bid_unit_id,<features...>,clicks,revenue", 1);
  }
  std::vector<std::string> names;
  for (std::size_t i = 2; i + 2 < header.size(); ++i) names.emplace_back(header[i]);
  if (!schema) {
    schema = FeatureSchema(names);
  } else if (schema->feature_names() != names) {
    throw DataError("header feature columns do not match the schema", 1);
  }

  const std::size_t k = names.size();
  const std::size_t columns = header.size();
  std::vector<Observation> rows;
  std::size_t dropped = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view row = strip_cr(line);
    if (row.empty()) continue;
    const auto cells = split_row(row);
    if (cells.size() != columns) {
      throw DataError("expected " + std::to_string(columns) + " columns, found " +
                          std::to_string(cells.size()),
                      line_no);
    }
    Observation o;
    try {
      o.date = parse_day(cells[0]);
    } catch (const DataError& e) {
      throw DataError(e.what(), line_no);
    }
    if (cells[1].empty()) throw DataError("empty bid_unit_id", line_no);
    if (!parse_number(cells[k + 2], o.clicks)) throw DataError("malformed clicks", line_no);
    if (!parse_number(cells[k + 3], o.revenue) || !std::isfinite(o.revenue)) {
      throw DataError("malformed revenue", line_no);
    }
    if (o.clicks < 0) throw DataError("negative clicks", line_no);
    if (o.revenue < 0.0) throw DataError("negative revenue", line_no);
    if (o.clicks == 0) {
      ++dropped;
      continue;
    }
    o.bid_unit = schema->mutable_bid_units().intern(cells[1]);
    o.features.resize(k);
    for (std::size_t f = 0; f < k; ++f) {
      if (cells[f + 2].empty()) throw DataError("empty category for '" + names[f] + "'", line_no);
      o.features[f] = schema->mutable_feature(f).domain.intern(cells[f + 2]);
    }
    rows.push_back(std::move(o));
  }
  auto shared = std::make_shared<const FeatureSchema>(std::move(*schema));
  return IngestResult{Dataset(std::move(shared), std::move(rows)), dropped};
}

IngestResult ingest_csv(const std::filesystem::path& path, FeatureSchema schema) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  return ingest_csv_stream(in, std::move(schema));
}

IngestResult ingest_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  return ingest_csv_stream(in, std::nullopt);
}

void write_csv(const Dataset& ds, std::ostream& out) {
  out << "date,bid_unit_id";
  for (const auto& f : ds.schema().features()) out << ',' << f.name;
  out << ",clicks,revenue\n";
  for (const auto& o : ds.observations()) {
    out << format_day(o.date) << ',' << ds.bid_unit_id(o);
    for (std::size_t f = 0; f < o.features.size(); ++f) out << ',' << ds.category(o, f);
    out << ',' << o.clicks << ',' << format_double(o.revenue) << '\n';
  }
}

void write_csv(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  write_csv(ds, out);
}

SparsityStats sparsity(std::span<const UnitDay> unit_days) {
  std::size_t zero_click = 0;
  std::size_t clicked = 0;
  std::size_t clicked_zero_revenue = 0;
  for (const auto& ud : unit_days) {
    if (ud.clicks == 0) {
      ++zero_click;
    } else {
      ++clicked;
      if (ud.revenue == 0.0) ++clicked_zero_revenue;
    }
  }
  SparsityStats stats;
  if (!unit_days.empty()) {
    stats.x_sparsity = static_cast<double>(zero_click) / static_cast<double>(unit_days.size());
  }
  if (clicked > 0) {
    stats.y_sparsity =
        static_cast<double>(clicked_zero_revenue) / static_cast<double>(clicked);
  }
  return stats;
}

SparsityStats sparsity(const Dataset& ds) {
  if (ds.empty() || !ds.date_range()) return SparsityStats{};
  std::set<std::uint32_t> units;
  // (unit, day) -> aggregated clicks/revenue; a unit can appear once per day in
  // well-formed data, but duplicates are summed rather than double counted.
  std::map<std::pair<std::uint32_t, Day>, UnitDay> clicked;
  for (const auto& o : ds.observations()) {
    units.insert(o.bid_unit);
    auto& ud = clicked[{o.bid_unit, o.date}];
    ud.clicks += o.clicks;
    ud.revenue += o.revenue;
  }
  const std::size_t total =
      units.size() * static_cast<std::size_t>(ds.date_range()->days());
  std::size_t zero_revenue = 0;
  for (const auto& [key, ud] : clicked) {
    if (ud.revenue == 0.0) ++zero_revenue;
  }
  SparsityStats stats;
  stats.x_sparsity =
      static_cast<double>(total - clicked.size()) / static_cast<double>(total);
  stats.y_sparsity = static_cast<double>(zero_revenue) / static_cast<double>(clicked.size());
  return stats;
}

std::map<std::string, Dataset> group_by(const Dataset& ds, std::string_view feature) {
  const auto idx = ds.schema().feature_index(feature);
  if (!idx) throw ConfigError("unknown feature '" + std::string(feature) + "'");
  std::map<std::string, std::vector<Observation>> parts;
  for (const auto& o : ds.observations()) parts[ds.category(o, *idx)].push_back(o);
  std::map<std::string, Dataset> out;
  for (auto& [cat, obs] : parts) {
    out.emplace(cat, Dataset(ds.schema_ptr(), std::move(obs), ds.date_range(), true));
  }
  return out;
}

}  // namespace dheb
