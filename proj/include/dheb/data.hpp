#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace dheb {

using Day = std::chrono::sys_days;

// Parses an ISO-8601 calendar day ("2017-01-31"). Throws DataError.
Day parse_day(std::string_view text);
std::string format_day(Day day);
// "Mon" .. "Sun".
std::string day_of_week_name(Day day);

// Inclusive interval of calendar days.
struct DateRange {
  Day first;
  Day last;

  bool contains(Day d) const { return first <= d && d <= last; }
  int days() const { return static_cast<int>((last - first).count()) + 1; }
  bool operator==(const DateRange&) const = default;
};

// Category values of one feature. Grows as data is ingested; indices are
// stable once assigned.
class CategoryDomain {
 public:
  std::uint32_t intern(std::string_view value);
  std::optional<std::uint32_t> find(std::string_view value) const;
  const std::string& value(std::uint32_t index) const { return values_.at(index); }
  std::size_t size() const { return values_.size(); }
  const std::vector<std::string>& values() const { return values_; }

  bool operator==(const CategoryDomain& other) const { return values_ == other.values_; }

 private:
  std::vector<std::string> values_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

struct FeatureSpec {
  std::string name;
  CategoryDomain domain;

  bool operator==(const FeatureSpec&) const = default;
};

// Name of the feature that is derived from the observation date at
// prediction time when a query does not supply it.
inline constexpr std::string_view kDayOfWeekFeature = "day_of_week";

// Ordered structural features plus the bid-unit domain. The bid unit is the
// fixed bottom level and is never a split candidate, so it is held apart from
// `features()`.
class FeatureSchema {
 public:
  FeatureSchema() = default;
  // Throws ConfigError on duplicate or reserved names.
  explicit FeatureSchema(std::vector<std::string> feature_names);

  std::size_t num_features() const { return features_.size(); }
  const std::vector<FeatureSpec>& features() const { return features_; }
  const FeatureSpec& feature(std::size_t i) const { return features_.at(i); }
  FeatureSpec& mutable_feature(std::size_t i) { return features_.at(i); }
  std::optional<std::size_t> feature_index(std::string_view name) const;
  std::vector<std::string> feature_names() const;

  const CategoryDomain& bid_units() const { return bid_units_; }
  CategoryDomain& mutable_bid_units() { return bid_units_; }

  bool operator==(const FeatureSchema&) const = default;

 private:
  std::vector<FeatureSpec> features_;
  CategoryDomain bid_units_;
};

// One (date, bid unit) record. `features[k]` indexes into the k-th feature's
// domain, `bid_unit` into the schema's bid-unit domain.
struct Observation {
  Day date;
  std::uint32_t bid_unit = 0;
  std::int64_t clicks = 0;
  double revenue = 0.0;
  std::vector<std::uint32_t> features;

  bool operator==(const Observation&) const = default;
};

// Immutable collection of observations sharing one schema.
class Dataset {
 public:
  // Validates every observation: clicks > 0, finite revenue >= 0 (unless
  // negative revenue is explicitly allowed), feature indices inside their
  // domains, and dates inside `range`. When `range` is empty it is taken from
  // the observations; an empty dataset without a range has no date_range().
  Dataset(std::shared_ptr<const FeatureSchema> schema,
          std::vector<Observation> observations,
          std::optional<DateRange> range = std::nullopt,
          bool allow_negative_revenue = false);

  const FeatureSchema& schema() const { return *schema_; }
  const std::shared_ptr<const FeatureSchema>& schema_ptr() const { return schema_; }
  std::span<const Observation> observations() const { return observations_; }
  const Observation& operator[](std::size_t i) const { return observations_[i]; }
  std::size_t size() const { return observations_.size(); }
  bool empty() const { return observations_.empty(); }
  const std::optional<DateRange>& date_range() const { return range_; }

  // Observations with date inside `range`; the result's range is `range`.
  Dataset slice(DateRange range) const;

  const std::string& bid_unit_id(const Observation& o) const {
    return schema_->bid_units().value(o.bid_unit);
  }
  const std::string& category(const Observation& o, std::size_t feature) const {
    return schema_->feature(feature).domain.value(o.features[feature]);
  }

  bool operator==(const Dataset& other) const;

 private:
  std::shared_ptr<const FeatureSchema> schema_;
  std::vector<Observation> observations_;
  std::optional<DateRange> range_;
};

struct IngestResult {
  Dataset dataset;
  std::size_t dropped_zero_click = 0;
};

// Reads `date,bid_unit_id,<features...>,clicks,revenue`. The header's feature
// columns must match `schema` in order. Zero-click rows are dropped; unknown
// categories extend the schema's domains.
IngestResult ingest_csv(const std::filesystem::path& path, FeatureSchema schema);
// Same, with the feature columns taken from the header.
IngestResult ingest_csv(const std::filesystem::path& path);
IngestResult ingest_csv_stream(std::istream& in, std::optional<FeatureSchema> schema);

void write_csv(const Dataset& ds, std::ostream& out);
void write_csv(const Dataset& ds, const std::filesystem::path& path);

// Shortest decimal representation that parses back to the same double.
std::string format_double(double value);

struct UnitDay {
  std::int64_t clicks = 0;
  double revenue = 0.0;
};

struct SparsityStats {
  double x_sparsity = 0.0;
  // Empty when no unit-day has clicks.
  std::optional<double> y_sparsity;
};

SparsityStats sparsity(std::span<const UnitDay> unit_days);
// Densifies the dataset over (every bid unit present) x (every day in the
// date range); absent unit-days count as zero-click days.
SparsityStats sparsity(const Dataset& ds);

// Partition by one structural feature, keyed by category value.
std::map<std::string, Dataset> group_by(const Dataset& ds, std::string_view feature);

}  // namespace dheb
