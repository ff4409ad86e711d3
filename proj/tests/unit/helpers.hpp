#pragma once

#include <memory>
#include <string>
#include <vector>

#include "dheb/data.hpp"

namespace testing {

struct Row {
  std::string date;
  std::string unit;
  std::vector<std::string> features;
  std::int64_t clicks;
  double revenue;
};

inline dheb::Dataset make_dataset(const std::vector<std::string>& feature_names,
                                  const std::vector<Row>& rows) {
  dheb::FeatureSchema schema(feature_names);
  std::vector<dheb::Observation> obs;
  for (const auto& r : rows) {
    dheb::Observation o;
    o.date = dheb::parse_day(r.date);
    o.bid_unit = schema.mutable_bid_units().intern(r.unit);
    for (std::size_t f = 0; f < r.features.size(); ++f) {
      o.features.push_back(schema.mutable_feature(f).domain.intern(r.features[f]));
    }
    o.clicks = r.clicks;
    o.revenue = r.revenue;
    obs.push_back(std::move(o));
  }
  return dheb::Dataset(std::make_shared<const dheb::FeatureSchema>(std::move(schema)),
                       std::move(obs));
}

}  // namespace testing
