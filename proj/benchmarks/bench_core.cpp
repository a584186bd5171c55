#include <random>

#include <benchmark/benchmark.h>

#include "factscope/embedding.hpp"
#include "factscope/fact_engine.hpp"
#include "factscope/retrieval_tree.hpp"
#include "factscope/sql.hpp"

using namespace factscope;

namespace {

Dataset gdp_dataset(std::size_t countries, std::size_t years) {
  RawTable raw{{"country", "series", "year", "value"}, {}};
  std::mt19937_64 rng(1);
  for (std::size_t c = 0; c < countries; ++c) {
    for (std::size_t y = 0; y < years; ++y) {
      raw.rows.push_back({"Country " + std::to_string(c), "GDP per capita (current US$)", std::to_string(1990 + y),
                          std::to_string(500 + rng() % 60000)});
    }
  }
  Dataset d = normalize_dataset(raw, "gdp", "bench");
  d.id = "gdp";
  return d;
}

SubTable year_table() {
  SubTable t;
  t.source_dataset = "gdp";
  t.fields = {{"country", FieldKind::categorical, "gdp", {}},
              {"year", FieldKind::temporal, "gdp", {}},
              {"value", FieldKind::numerical, "gdp", {}}};
  for (int y = 2012; y <= 2021; ++y) t.rows.push_back({std::string("World"), double(y), 10000.0 + 97.5 * (y - 2012)});
  return t;
}

DataFact fact(FactType type, std::vector<FilterClause> focus = {}) {
  DataFact f;
  f.type = type;
  f.breakdown = {"year"};
  f.measure = {{"value", Aggregate::none}};
  f.subspace = {{"country", std::string("World")}};
  f.focus = std::move(focus);
  f.description = "bench";
  return f;
}

void BM_ComputeTrend(benchmark::State& state) {
  const auto t = year_table();
  const auto f = fact(FactType::trend);
  for (auto _ : state) benchmark::DoNotOptimize(compute_fact(f, t));
}
BENCHMARK(BM_ComputeTrend);

void BM_ComputeRank(benchmark::State& state) {
  const auto t = year_table();
  const auto f = fact(FactType::rank, {{"year", 2015.0}});
  for (auto _ : state) benchmark::DoNotOptimize(compute_fact(f, t));
}
BENCHMARK(BM_ComputeRank);

void BM_ValidateFact(benchmark::State& state) {
  const auto t = year_table();
  const auto f = fact(FactType::difference, {{"year", 2021.0}, {"year", 2012.0}});
  for (auto _ : state) benchmark::DoNotOptimize(validate_fact(f, t));
}
BENCHMARK(BM_ValidateFact);

void BM_CheckDescription(benchmark::State& state) {
  const auto r = compute_fact(fact(FactType::trend), year_table());
  const std::string caption = canonical_description(r);
  for (auto _ : state) benchmark::DoNotOptimize(check_description(r, caption));
}
BENCHMARK(BM_CheckDescription);

void BM_SqlExecute(benchmark::State& state) {
  const auto d = gdp_dataset(static_cast<std::size_t>(state.range(0)), 30);
  const std::string q =
      "SELECT country, year, value FROM gdp WHERE country LIKE 'Country 1%' AND year BETWEEN 2000 AND 2010 "
      "ORDER BY value DESC LIMIT 10";
  for (auto _ : state) benchmark::DoNotOptimize(sql::execute_query(q, d));
  state.SetItemsProcessed(static_cast<int64_t>(state.iterations() * d.rows.size()));
}
BENCHMARK(BM_SqlExecute)->Arg(10)->Arg(100)->Arg(1000);

void BM_MockEmbed(benchmark::State& state) {
  MockEmbeddingProvider p;
  for (auto _ : state) benchmark::DoNotOptimize(p.embed("Is global GDP per capita growing faster in low income countries?"));
}
BENCHMARK(BM_MockEmbed);

void BM_FieldTopK(benchmark::State& state) {
  Embedder e(std::make_shared<MockEmbeddingProvider>());
  std::vector<FieldDescriptor> fields;
  for (int i = 0; i < state.range(0); ++i) {
    fields.push_back({"field_" + std::to_string(i) + " indicator", FieldKind::numerical, "d" + std::to_string(i % 7), {}});
  }
  FieldIndex idx(e, fields, {});
  for (auto _ : state) benchmark::DoNotOptimize(idx.top_k("field indicator growth 42", 3));
}
BENCHMARK(BM_FieldTopK)->Arg(50)->Arg(500)->Arg(5000);

void BM_RankOrder(benchmark::State& state) {
  std::mt19937_64 rng(2);
  std::vector<RankItem> items(static_cast<std::size_t>(state.range(0)));
  for (auto& it : items) it = {static_cast<double>(rng() % 1000) / 1000.0, rng() % 2 ? Stance::support : Stance::oppose};
  for (auto _ : state) benchmark::DoNotOptimize(rank_order(items, Stance::support));
}
BENCHMARK(BM_RankOrder)->Arg(9)->Arg(1000);

}  // namespace

BENCHMARK_MAIN();
