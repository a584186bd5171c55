#include <algorithm>
#include <random>

#include <gtest/gtest.h>

#include "factscope/error.hpp"
#include "factscope/fact_engine.hpp"
#include "oracles.hpp"

using namespace factscope;

namespace {

SubTable series_table(const std::string& country, std::vector<std::pair<double, double>> points) {
  SubTable t;
  t.source_dataset = "s";
  t.fields = {{"country", FieldKind::categorical, "s", {}},
              {"year", FieldKind::temporal, "s", {}},
              {"value", FieldKind::numerical, "s", {}}};
  for (auto [y, v] : points) {
    t.rows.push_back({country, y, v});
    t.source_rows.push_back(t.source_rows.size());
  }
  return t;
}

DataFact fact(FactType type, std::string breakdown, std::vector<Measure> m, std::vector<FilterClause> sub = {},
              std::vector<FilterClause> focus = {}) {
  DataFact f;
  f.type = type;
  f.breakdown = {std::move(breakdown)};
  f.measure = std::move(m);
  f.subspace = std::move(sub);
  f.focus = std::move(focus);
  f.description = "test";
  return f;
}

ErrorCode code_of(const DataFact& f, const SubTable& t) {
  try {
    compute_fact(f, t);
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::INTERNAL;
}

}  // namespace

TEST(ComputeFact, JapanAgingTrend) {
  auto t = series_table("Japan", {{2012, 24.64}, {2014, 26.17}, {2016, 27.34}, {2018, 28.12}, {2020, 28.8},
                                  {2023, 30.07}});
  auto r = compute_fact(fact(FactType::trend, "year", {{"value"}}, {{"country", std::string("Japan")}}), t);
  const auto& tr = std::get<TrendResult>(r.derived);
  EXPECT_EQ(tr.direction, Direction::increasing);
  EXPECT_EQ(tr.start, 24.64);
  EXPECT_EQ(tr.end, 30.07);
  EXPECT_EQ(std::get<double>(tr.start_key), 2012.0);
  EXPECT_EQ(std::get<double>(tr.end_key), 2023.0);
}

TEST(ComputeFact, ConstantTrendIsFlat) {
  auto t = series_table("X", {{2001, 5}, {2002, 5}, {2003, 5}, {2004, 5}});
  auto r = compute_fact(fact(FactType::trend, "year", {{"value"}}, {{"country", std::string("X")}}), t);
  EXPECT_EQ(std::get<TrendResult>(r.derived).slope, 0.0);
  EXPECT_EQ(std::get<TrendResult>(r.derived).direction, Direction::flat);
}

TEST(ComputeFact, SelfAssociationIsOne) {
  auto t = series_table("X", {{2001, 1}, {2002, 4}, {2003, 2}, {2004, 8}});
  auto r = compute_fact(fact(FactType::association, "year", {{"value"}, {"value"}}), t);
  EXPECT_DOUBLE_EQ(std::get<AssociationResult>(r.derived).pearson_r, 1.0);
}

TEST(ComputeFact, Degenerate) {
  auto t = series_table("X", {{2001, 1}, {2002, 0}});
  EXPECT_EQ(code_of(fact(FactType::trend, "year", {{"value"}}, {{"country", std::string("X")}}), t),
            ErrorCode::DEGENERATE);
  EXPECT_EQ(code_of(fact(FactType::difference, "year", {{"value"}}, {}, {{"year", 2001.0}, {"year", 2002.0}}), t),
            ErrorCode::DEGENERATE);
  EXPECT_EQ(code_of(fact(FactType::value, "year", {{"value"}}, {{"country", std::string("Y")}}), t),
            ErrorCode::EMPTY_SUBSPACE);
  EXPECT_EQ(code_of(fact(FactType::value, "year", {{"missing"}}), t), ErrorCode::INVALID_FACT);
}

TEST(ComputeFact, OracleEquivalence) {
  std::mt19937_64 rng(99);
  int compared = 0;
  for (int attempt = 0; attempt < 20000 && compared < 300; ++attempt) {
    SubTable t = oracle::random_table(rng);
    DataFact f = oracle::random_fact(rng, t);
    if (!validate_fact(f, t).ok) continue;
    ++compared;
    auto expected = oracle::evaluate(f, t);
    if (auto* code = std::get_if<ErrorCode>(&expected)) {
      EXPECT_EQ(code_of(f, t), *code) << to_json(f).dump();
      continue;
    }
    const auto& e = std::get<oracle::Expected>(expected);
    FactResult r = compute_fact(f, t);
    ASSERT_EQ(r.groups.size(), e.groups.size()) << to_json(f).dump();
    std::visit(
        [&](const auto& d) {
          using T = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<T, ValueResult>) EXPECT_EQ(d.scalar, e.scalar);
          if constexpr (std::is_same_v<T, DifferenceResult>) {
            EXPECT_EQ(d.rel_diff, e.rel_diff);
            EXPECT_EQ(d.abs_diff, e.abs_diff);
          }
          if constexpr (std::is_same_v<T, ProportionResult>) EXPECT_EQ(d.share, e.share);
          if constexpr (std::is_same_v<T, TrendResult>) EXPECT_TRUE(oracle::close(d.slope, e.slope, 1e-9));
          if constexpr (std::is_same_v<T, AssociationResult>) EXPECT_TRUE(oracle::close(d.pearson_r, e.pearson, 1e-9));
          if constexpr (std::is_same_v<T, RankResult>) EXPECT_EQ(d.ordering, e.ordering);
          if constexpr (std::is_same_v<T, ExtremeResult>) {
            EXPECT_EQ(d.key, e.extreme_key);
            EXPECT_EQ(d.value, e.extreme_value);
          }
        },
        r.derived);
  }
  EXPECT_EQ(compared, 300);
}

TEST(ComputeFact, RowOrderDoesNotMatter) {
  std::mt19937_64 rng(5);
  int checked = 0;
  for (int attempt = 0; attempt < 5000 && checked < 200; ++attempt) {
    SubTable t = oracle::random_table(rng);
    DataFact f = oracle::random_fact(rng, t);
    if (!validate_fact(f, t).ok) continue;
    std::string first;
    try {
      first = to_json(compute_fact(f, t)).dump();
    } catch (const Error&) {
      continue;
    }
    std::shuffle(t.rows.begin(), t.rows.end(), rng);
    EXPECT_EQ(to_json(compute_fact(f, t)).dump(), first);
    ++checked;
  }
  EXPECT_EQ(checked, 200);
}

TEST(ChartSpec, MarksAndEncodings) {
  SubTable t;
  t.source_dataset = "gini";
  t.fields = {{"country", FieldKind::categorical, "gini", {}}, {"value", FieldKind::numerical, "gini", {}},
              {"other", FieldKind::numerical, "gini", {}}};
  const std::pair<const char*, double> gini[] = {{"South Africa", 63.0}, {"Brazil", 53.9}, {"Colombia", 50.4},
                                                 {"Mexico", 45.4},       {"United States", 41.4}, {"China", 38.5},
                                                 {"India", 35.7},        {"Japan", 32.9}, {"Germany", 31.9},
                                                 {"Sweden", 28.8}};
  for (auto [c, v] : gini) t.rows.push_back({std::string(c), v, v / 2 + 1});
  auto r = compute_fact(fact(FactType::extreme, "country", {{"value"}}), t);
  EXPECT_EQ(std::get<std::string>(std::get<ExtremeResult>(r.derived).key), "South Africa");
  ChartSpec c = chart_spec(r, "World Bank WDI");
  EXPECT_EQ(c.mark, ChartMark::bar);
  EXPECT_EQ(c.highlight, std::vector<std::string>{"South Africa"});
  EXPECT_EQ(c.source, "World Bank WDI");
  EXPECT_FALSE(c.x.title.empty());
  EXPECT_FALSE(c.y.title.empty());
  EXPECT_EQ(c.data.size(), 10u);

  auto a = chart_spec(compute_fact(fact(FactType::association, "country", {{"value"}, {"other"}}), t), "src");
  EXPECT_EQ(a.mark, ChartMark::scatter);
  EXPECT_EQ(a.x.field, "value");
  EXPECT_EQ(a.y.field, "other");

  auto v = compute_fact(fact(FactType::value, "country", {{"value"}}, {{"country", std::string("Japan")}}), t);
  EXPECT_EQ(chart_spec(v, "").mark, ChartMark::big_number);
  EXPECT_EQ(chart_spec(v, "").source, "Source: unknown");

  auto j = to_json(c);
  for (const char* key : {"mark", "encoding", "highlight", "caption", "source", "data"}) EXPECT_TRUE(j.contains(key));
}
