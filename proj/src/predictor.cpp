#include "dheb/predictor.hpp"

namespace dheb {

std::optional<std::string> Query::feature(const std::string& name) const {
  if (auto it = features.find(name); it != features.end()) return it->second;
  if (name == kDayOfWeekFeature && date) return day_of_week_name(*date);
  return std::nullopt;
}

Query query_for(const Dataset& ds, const Observation& o) {
  Query q;
  q.bid_unit_id = ds.bid_unit_id(o);
  q.date = o.date;
  for (std::size_t f = 0; f < o.features.size(); ++f) {
    q.features.emplace(ds.schema().feature(f).name, ds.category(o, f));
  }
  return q;
}

}  // namespace dheb
