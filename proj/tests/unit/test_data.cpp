#include <algorithm>
#include <random>
#include <sstream>

#include "doctest.h"
#include "dheb/data.hpp"
#include "dheb/error.hpp"
#include "helpers.hpp"

using namespace dheb;

namespace {

IngestResult ingest_text(const std::string& text) {
  std::istringstream in(text);
  return ingest_csv_stream(in, std::nullopt);
}

}  // namespace

TEST_CASE("dates parse, format and name weekdays") {
  const Day d = parse_day("2017-01-01");
  CHECK(format_day(d) == "2017-01-01");
  CHECK(day_of_week_name(d) == "Sun");
  CHECK(day_of_week_name(parse_day("2017-01-02")) == "Mon");
  CHECK_THROWS_AS(parse_day("2017-02-30"), DataError);
  CHECK_THROWS_AS(parse_day("17-1-1"), DataError);
  CHECK(DateRange{parse_day("2017-01-01"), parse_day("2017-06-30")}.days() == 181);
}

TEST_CASE("ingest drops zero-click rows and reports them") {
  const auto r = ingest_text(
      "date,bid_unit_id,A,clicks,revenue\n"
      "2017-01-01,bu1,a1,5,12.5\n"
      "2017-01-02,bu1,a1,0,0\n"
      "2017-01-03,bu2,a2,1,0\n");
  CHECK(r.dataset.size() == 2);
  CHECK(r.dropped_zero_click == 1);
  const auto& o = r.dataset[0];
  CHECK(o.clicks == 5);
  CHECK(o.revenue == 12.5);
  CHECK(r.dataset.bid_unit_id(o) == "bu1");
  CHECK(r.dataset.category(o, 0) == "a1");
}

TEST_CASE("ingest of a header-only file gives an empty dataset") {
  const auto r = ingest_text("date,bid_unit_id,A,clicks,revenue\n");
  CHECK(r.dataset.empty());
  CHECK(r.dropped_zero_click == 0);
}

TEST_CASE("ingest errors name the line") {
  auto line_of = [](const std::string& text) {
    try {
      ingest_text(text);
    } catch (const DataError& e) {
      return e.line();
    }
    return std::size_t{0};
  };
  const std::string header = "date,bid_unit_id,A,clicks,revenue\n";
  CHECK(line_of(header + "2017-01-01,bu1,a1,1,1\n2017-01-02,bu1,a1,-1,0\n") == 3);
  CHECK(line_of(header + "2017-01-01,bu1,a1,1,-0.5\n") == 2);
  CHECK(line_of(header + "2017-01-01,bu1,a1,1\n") == 2);
  CHECK(line_of(header + "2017-13-01,bu1,a1,1,1\n") == 2);
  CHECK(line_of(header + "2017-01-01,bu1,a1,x,1\n") == 2);
  CHECK(line_of("date,unit,clicks,revenue\n") == 1);
}

TEST_CASE("unknown categories extend the domain") {
  FeatureSchema schema({"A"});
  schema.mutable_feature(0).domain.intern("a1");
  std::istringstream in("date,bid_unit_id,A,clicks,revenue\n2017-01-01,bu1,a9,1,1\n");
  const auto r = ingest_csv_stream(in, schema);
  CHECK(r.dataset.schema().feature(0).domain.size() == 2);
  CHECK(r.dataset.category(r.dataset[0], 0) == "a9");
}

TEST_CASE("schema rejects reserved and duplicate names") {
  CHECK_THROWS_AS(FeatureSchema({"clicks"}), ConfigError);
  CHECK_THROWS_AS(FeatureSchema({"A", "A"}), ConfigError);
}

TEST_CASE("dataset validates observations against its range") {
  auto ds = testing::make_dataset({"A"}, {{"2017-01-05", "u", {"a"}, 1, 1.0}});
  CHECK(ds.date_range()->first == parse_day("2017-01-05"));
  FeatureSchema schema({"A"});
  schema.mutable_feature(0).domain.intern("a");
  schema.mutable_bid_units().intern("u");
  Observation o{parse_day("2017-02-01"), 0, 1, 1.0, {0}};
  CHECK_THROWS_AS(Dataset(std::make_shared<const FeatureSchema>(schema), {o},
                          DateRange{parse_day("2017-01-01"), parse_day("2017-01-31")}),
                  DataError);
  o.date = parse_day("2017-01-10");
  o.revenue = -1.0;
  CHECK_THROWS_AS(Dataset(std::make_shared<const FeatureSchema>(schema), {o}), DataError);
  CHECK_NOTHROW(Dataset(std::make_shared<const FeatureSchema>(schema), {o}, std::nullopt, true));
}

TEST_CASE("ingest, write, re-ingest is the identity") {
  std::mt19937 rng(7);
  std::ostringstream text;
  text << "date,bid_unit_id,A,B,clicks,revenue\n";
  for (int i = 0; i < 300; ++i) {
    const Day d = parse_day("2017-01-01") + std::chrono::days{static_cast<int>(rng() % 90)};
    text << format_day(d) << ",bu" << rng() % 17 << ",a" << rng() % 5 << ",b" << rng() % 9 << ','
         << 1 + rng() % 20 << ',' << std::uniform_real_distribution<double>(0, 30)(rng) << '\n';
  }
  const auto first = ingest_text(text.str());
  std::ostringstream round;
  write_csv(first.dataset, round);
  const auto second = ingest_text(round.str());
  CHECK(first.dataset == second.dataset);
  std::ostringstream again;
  write_csv(second.dataset, again);
  CHECK(round.str() == again.str());
}

TEST_CASE("format_double round-trips") {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 1000; ++i) {
    const double v = std::uniform_real_distribution<double>(-1e6, 1e6)(rng);
    CHECK(std::stod(format_double(v)) == v);
  }
  CHECK(format_double(0.1) == "0.1");
}

TEST_CASE("sparsity counts unit-days") {
  std::vector<UnitDay> t(10);
  t[0] = {3, 0.0};
  auto s = sparsity(t);
  CHECK(s.x_sparsity == doctest::Approx(0.9));
  CHECK(*s.y_sparsity == doctest::Approx(1.0));

  std::vector<UnitDay> all(5, UnitDay{2, 1.0});
  s = sparsity(all);
  CHECK(s.x_sparsity == 0.0);
  CHECK(*s.y_sparsity == 0.0);

  std::vector<UnitDay> hundred(100);
  for (int i = 0; i < 10; ++i) hundred[i] = {1, i < 2 ? 5.0 : 0.0};
  s = sparsity(hundred);
  CHECK(s.x_sparsity == doctest::Approx(0.90));
  CHECK(*s.y_sparsity == doctest::Approx(0.80));

  std::vector<UnitDay> none(4);
  s = sparsity(none);
  CHECK(s.x_sparsity == 1.0);
  CHECK_FALSE(s.y_sparsity.has_value());
}

TEST_CASE("sparsity keeps precision at a million unit-days") {
  std::vector<UnitDay> t(1'000'000);
  for (std::size_t i = 0; i < 100'000; ++i) t[i] = {1, i < 2'000 ? 1.0 : 0.0};
  const auto s = sparsity(t);
  CHECK(s.x_sparsity == 0.9);
  CHECK(*s.y_sparsity == 0.98);
}

TEST_CASE("dataset sparsity densifies over units and days") {
  auto ds = testing::make_dataset({"A"}, {{"2017-01-01", "u1", {"a"}, 1, 0.0},
                                          {"2017-01-04", "u2", {"a"}, 2, 1.0}});
  const auto s = sparsity(ds);
  CHECK(s.x_sparsity == doctest::Approx(6.0 / 8.0));
  CHECK(*s.y_sparsity == doctest::Approx(0.5));
}

TEST_CASE("group_by partitions the dataset") {
  auto ds = testing::make_dataset({"A", "G"}, {{"2017-01-01", "u1", {"a", "g"}, 1, 1.0},
                                               {"2017-01-01", "u2", {"b", "g"}, 2, 1.0},
                                               {"2017-01-02", "u1", {"a", "g"}, 3, 1.0},
                                               {"2017-01-02", "u3", {"b", "g"}, 4, 1.0}});
  const auto parts = group_by(ds, "A");
  CHECK(parts.size() == 2);
  CHECK(parts.at("a").size() + parts.at("b").size() == 4);

  const auto single = group_by(ds, "G");
  REQUIRE(single.size() == 1);
  CHECK(single.at("g") == ds);

  CHECK_THROWS_AS(group_by(ds, "Z"), ConfigError);
  CHECK(group_by(ds.slice({parse_day("2018-01-01"), parse_day("2018-01-02")}), "A").empty());
}

TEST_CASE("group_by parts form a multiset partition") {
  std::mt19937 rng(11);
  std::vector<testing::Row> rows;
  for (int i = 0; i < 500; ++i) {
    rows.push_back({"2017-01-0" + std::to_string(1 + rng() % 9), "u" + std::to_string(rng() % 30),
                    {"a" + std::to_string(rng() % 7), "b" + std::to_string(rng() % 3)},
                    static_cast<std::int64_t>(1 + rng() % 5), static_cast<double>(rng() % 4)});
  }
  auto ds = testing::make_dataset({"A", "B"}, rows);
  for (const std::string f : {"A", "B"}) {
    std::vector<Observation> merged;
    for (const auto& [cat, part] : group_by(ds, f)) {
      for (const auto& o : part.observations()) {
        CHECK(part.category(o, *ds.schema().feature_index(f)) == cat);
        merged.push_back(o);
      }
    }
    std::vector<Observation> original(ds.observations().begin(), ds.observations().end());
    auto key = [](const Observation& a, const Observation& b) {
      return std::tie(a.date, a.bid_unit, a.clicks, a.revenue, a.features) <
             std::tie(b.date, b.bid_unit, b.clicks, b.revenue, b.features);
    };
    std::sort(merged.begin(), merged.end(), key);
    std::sort(original.begin(), original.end(), key);
    CHECK(merged == original);
  }
}
