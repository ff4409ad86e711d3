#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include "dheb/data.hpp"

namespace dheb {

// A request for one bid unit's revenue per click.
struct Query {
  std::string bid_unit_id;
  std::optional<Day> date;
  // Structural feature values by feature name. Missing features are treated
  // as unseen categories, except day_of_week which is derived from `date`.
  std::map<std::string, std::string> features;

  // Value of `feature`, deriving day_of_week from the date when absent.
  std::optional<std::string> feature(const std::string& name) const;
};

// Builds the query that describes an observation (its unit, date and
// categories).
Query query_for(const Dataset& ds, const Observation& o);

// Anything that predicts revenue per click for a bid unit.
class RpcModel {
 public:
  virtual ~RpcModel() = default;
  virtual double predict_rpc(const Query& query) const = 0;
};

using Trainer = std::function<std::shared_ptr<const RpcModel>(const Dataset&)>;

struct NamedTrainer {
  std::string name;
  Trainer train;
};

}  // namespace dheb
