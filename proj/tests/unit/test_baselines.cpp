#include <cmath>

#include "doctest.h"
#include "dheb/baselines.hpp"
#include "dheb/error.hpp"
#include "dheb/model_io.hpp"
#include "dheb/simulation.hpp"
#include "helpers.hpp"

using namespace dheb;

namespace {

Query q(std::string unit, std::map<std::string, std::string> f = {}) {
  return Query{std::move(unit), std::nullopt, std::move(f)};
}

}  // namespace

TEST_CASE("weighted average") {
  const auto ds = testing::make_dataset({}, {{"2017-01-01", "a", {}, 2, 4.0},
                                             {"2017-01-01", "b", {}, 1, 2.0},
                                             {"2017-01-02", "b", {}, 3, 3.0}});
  const auto m = train_wa(ds);
  CHECK(m.predict_rpc(q("a")) == 2.0);
  CHECK(m.predict_rpc(q("b")) == 1.25);
  CHECK(m.predict_rpc(q("new")) == 9.0 / 6.0);
}

TEST_CASE("weighted average of a constant ratio is exact") {
  const auto ds = testing::make_dataset({}, {{"2017-01-01", "a", {}, 3, 0.3 * 3},
                                             {"2017-01-02", "a", {}, 7, 0.3 * 7},
                                             {"2017-01-03", "a", {}, 11, 0.3 * 11}});
  CHECK(train_wa(ds).predict_rpc(q("a")) == doctest::Approx(0.3).epsilon(1e-15));
}

TEST_CASE("ridge with unit indicators and no penalty is per-unit OLS") {
  const auto ds = testing::make_dataset({}, {{"2017-01-01", "a", {}, 1, 2.0},
                                             {"2017-01-02", "a", {}, 2, 2.0},
                                             {"2017-01-01", "b", {}, 3, 1.0}});
  const auto m = train_rlr(ds, 0.0);
  CHECK(m.predict_rpc(q("a")) == doctest::Approx(6.0 / 5.0));
  CHECK(m.predict_rpc(q("b")) == doctest::Approx(1.0 / 3.0));
  CHECK(m.predict_rpc(q("new")) == 0.0);
}

TEST_CASE("ridge with no penalty on a collinear design asks for a penalty") {
  const auto ds = testing::make_dataset({"A"}, {{"2017-01-01", "a", {"x"}, 1, 2.0},
                                                {"2017-01-02", "a", {"x"}, 2, 2.0}});
  CHECK_THROWS_AS(train_rlr(ds, 0.0), ConfigError);
  CHECK_THROWS_AS(train_rlr(ds, -1.0), ConfigError);
}

TEST_CASE("ridge with a huge penalty predicts zero") {
  const auto ds = testing::make_dataset({"A"}, {{"2017-01-01", "a", {"x"}, 5, 10.0},
                                                {"2017-01-02", "b", {"y"}, 2, 1.0}});
  const auto m = train_rlr(ds, 1e12);
  CHECK(std::abs(m.predict_rpc(q("a", {{"A", "x"}}))) < 1e-9);
}

TEST_CASE("ridge separates two categories with exact rates") {
  // Hand solution: each category has one unit, so the two indicator columns
  // of a category coincide and share the rate equally as lambda -> 0.
  const auto ds = testing::make_dataset({"A"}, {{"2017-01-01", "p", {"two"}, 1, 2.0},
                                                {"2017-01-02", "p", {"two"}, 3, 6.0},
                                                {"2017-01-01", "z", {"zero"}, 2, 0.0},
                                                {"2017-01-02", "z", {"zero"}, 4, 0.0}});
  const auto m = train_rlr(ds, 1e-6);
  CHECK(m.predict_rpc(q("p", {{"A", "two"}})) == doctest::Approx(2.0).epsilon(1e-3));
  CHECK(std::abs(m.predict_rpc(q("z", {{"A", "zero"}}))) < 1e-3);
  const auto fw = m.feature_weights()[0];
  CHECK(fw.at("two") == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(m.unit_weights().at("p") == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("lambda selection returns a grid member") {
  SimConfig cfg;
  cfg.n_obs_per_unit = 30;
  const auto ds = generate(cfg).dataset;
  const std::vector<double> grid{0.01, 1.0, 100.0};
  const double lambda = select_rlr_lambda(ds, grid);
  CHECK(std::find(grid.begin(), grid.end(), lambda) != grid.end());
}

TEST_CASE("two-level shrinkage limits") {
  std::vector<testing::Row> rows;
  for (int d = 0; d < 9; ++d) {
    rows.push_back({"2017-01-0" + std::to_string(d + 1), "big", {}, 1000000, 3.0 * 1000000 + (d % 2 ? 1 : -1)});
    rows.push_back({"2017-01-0" + std::to_string(d + 1), "u" + std::to_string(d), {}, 5,
                    static_cast<double>(d)});
  }
  rows.push_back({"2017-01-09", "tiny", {}, 1, 9.0});
  const auto ds = testing::make_dataset({}, rows);
  const auto m = train_2hb(ds);
  CHECK(m.predict_rpc(q("big")) == doctest::Approx(3.0).epsilon(1e-6));
  // One click: the prior precision dominates the data precision.
  const double mu0 = m.root().posterior.mean;
  const auto& tiny = m.node(m.root().children.at("tiny"));
  const double data_precision = 1.0 / tiny.sigma_eps_sq;
  CHECK(tiny.prior.precision() > data_precision);
  CHECK(std::abs(tiny.posterior.mean - mu0) < std::abs(9.0 - tiny.posterior.mean));
}

TEST_CASE("two-level predictions are strictly between prior and OLS") {
  SimConfig cfg;
  cfg.n_bid_units = 30;
  cfg.n_obs_per_unit = 5;
  const auto ds = generate(cfg).dataset;
  const auto m = train_2hb(ds);
  const double mu0 = m.root().posterior.mean;
  std::map<std::string, std::pair<double, double>> s;
  for (const auto& o : ds.observations()) {
    auto& e = s[ds.bid_unit_id(o)];
    e.first += static_cast<double>(o.clicks * o.clicks);
    e.second += static_cast<double>(o.clicks) * o.revenue;
  }
  for (const auto& [unit, e] : s) {
    const double o = e.second / e.first;
    if (o == mu0) continue;
    const double p = m.predict_rpc(q(unit));
    CHECK(p > std::min(mu0, o));
    CHECK(p < std::max(mu0, o));
  }
}

TEST_CASE("baseline model files round-trip") {
  SimConfig cfg;
  cfg.n_bid_units = 20;
  const auto ds = generate(cfg).dataset;
  const auto wa = train_wa(ds);
  const auto rlr = train_rlr(ds, 0.5);
  const auto wa_back = load_any_model(save_model(wa));
  const auto rlr_back = load_any_model(save_model(rlr));
  for (const auto& o : ds.observations()) {
    const auto query = query_for(ds, o);
    CHECK(wa_back->predict_rpc(query) == wa.predict_rpc(query));
    CHECK(rlr_back->predict_rpc(query) == rlr.predict_rpc(query));
  }
  CHECK_THROWS_AS(load_any_model("{\"method\": \"wa\"}"), ModelFormatError);
}
