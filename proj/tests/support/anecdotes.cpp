#include "anecdotes.hpp"

#include <cstdio>
#include <set>

namespace oracle {

using namespace factscope;

namespace {

std::string two_decimals(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

std::vector<Anecdote> anecdote_cases(std::mt19937_64& rng, std::size_t n) {
  std::vector<Anecdote> out;
  for (std::size_t i = 0; i < n; ++i) {
    SubTable t;
    t.source_dataset = "series";
    t.fields = {{"country", FieldKind::categorical, "series", {}},
                {"year", FieldKind::temporal, "series", {}},
                {"value", FieldKind::numerical, "series", {}}};
    const int start = 1960 + static_cast<int>(rng() % 20);
    const int step = 4 + static_cast<int>(rng() % 3);
    const bool rising = rng() % 2 == 0;
    double v = 20 + static_cast<double>(rng() % 40);
    std::set<int> years;
    for (int k = 0; k < 10; ++k) {
      const int y = start + k * step;
      years.insert(y);
      t.rows.push_back({std::string("Country"), double(y), v});
      t.source_rows.push_back(static_cast<std::size_t>(k));
      v += (rising ? 1 : -1) * (0.5 + static_cast<double>(rng() % 30) / 10.0);
    }
    DataFact f;
    f.type = FactType::trend;
    f.breakdown = {"year"};
    f.measure = {{"value", Aggregate::none}};
    f.subspace = {{"country", std::string("Country")}};
    f.description = "trend";
    Anecdote a{compute_fact(f, t), "", MismatchKind::YEAR_OUT_OF_RANGE};
    const auto& tr = std::get<TrendResult>(a.result.derived);
    const std::string from = two_decimals(tr.start), to = two_decimals(tr.end);
    if (i % 2 == 0) {
      // cite a window the series never starts or ends at, like 1976 to 1986
      int y1 = start + 1 + static_cast<int>(rng() % 5), y2 = y1 + 10;
      while (years.count(y1)) ++y1;
      while (years.count(y2)) ++y2;
      a.caption = std::string(rising ? "Rose" : "Fell") + " from " + from + " in " + std::to_string(y1) + " to " +
                  to + " in " + std::to_string(y2) + ".";
      a.expected = MismatchKind::YEAR_OUT_OF_RANGE;
    } else {
      const int y0 = start, y9 = start + 9 * step;
      a.caption = std::string(rising ? "Declined steadily" : "Increased steadily") + " from " + from + " in " +
                  std::to_string(y0) + " to " + to + " in " + std::to_string(y9) + ".";
      a.expected = MismatchKind::DIRECTION_CONFLICT;
    }
    out.push_back(std::move(a));
  }
  return out;
}

}  // namespace oracle
