#include "factscope/fact_engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <regex>

#include "factscope/error.hpp"
#include "factscope/numeric.hpp"
#include "factscope/text_util.hpp"

namespace factscope {

std::string_view to_string(Direction d) {
  switch (d) {
    case Direction::increasing: return "increasing";
    case Direction::decreasing: return "decreasing";
    case Direction::flat: return "flat";
  }
  return "flat";
}

std::optional<double> time_ordinal(const Cell& key) {
  if (const auto* d = std::get_if<double>(&key)) {
    if (*d == std::floor(*d)) return *d;
    return std::nullopt;
  }
  const auto* s = std::get_if<std::string>(&key);
  if (!s) return std::nullopt;
  static const std::regex year_re(R"(^\d{4}$)");
  static const std::regex date_re(R"(^(\d{4})-(\d{2})-(\d{2})$)");
  std::smatch m;
  if (std::regex_match(*s, year_re)) return std::stod(*s);
  if (std::regex_match(*s, m, date_re)) {
    std::chrono::year_month_day ymd{std::chrono::year{std::stoi(m[1].str())},
                                    std::chrono::month{static_cast<unsigned>(std::stoi(m[2].str()))},
                                    std::chrono::day{static_cast<unsigned>(std::stoi(m[3].str()))}};
    if (!ymd.ok()) return std::nullopt;
    return static_cast<double>(std::chrono::sys_days{ymd}.time_since_epoch().count());
  }
  return std::nullopt;
}

namespace {

[[noreturn]] void degenerate(const std::string& why) { throw Error(ErrorCode::DEGENERATE, why); }

double mean_of(const std::vector<double>& v) { return numeric::exact_sum(v) / static_cast<double>(v.size()); }

// Population standard deviation.
double std_of(const std::vector<double>& v, double mean) {
  std::vector<double> sq;
  sq.reserve(v.size());
  for (double x : v) sq.push_back((x - mean) * (x - mean));
  return std::sqrt(numeric::exact_sum(sq) / static_cast<double>(v.size()));
}

double aggregate(Aggregate agg, std::vector<double>& values, std::size_t nonnull) {
  switch (agg) {
    case Aggregate::count: return static_cast<double>(nonnull);
    case Aggregate::none:
      if (values.size() > 1) {
        throw Error(ErrorCode::INVALID_FACT, "aggregate none over a group with several values");
      }
      return values.front();
    case Aggregate::sum: return numeric::exact_sum(values);
    case Aggregate::avg: return mean_of(values);
    case Aggregate::min: return *std::min_element(values.begin(), values.end());
    case Aggregate::max: return *std::max_element(values.begin(), values.end());
  }
  return 0.0;
}

struct CellLess {
  bool operator()(const Cell& a, const Cell& b) const { return compare_cells(a, b) < 0; }
};

std::vector<double> group_values(const std::vector<FactGroup>& groups, std::size_t measure = 0) {
  std::vector<double> out;
  out.reserve(groups.size());
  for (const auto& g : groups) out.push_back(g.values[measure]);
  return out;
}

}  // namespace

FactResult compute_fact(const DataFact& f, const SubTable& t) {
  if (f.breakdown.empty()) throw Error(ErrorCode::INVALID_FACT, "fact has no breakdown");
  auto bidx = t.field_index(f.breakdown.front());
  if (!bidx) throw Error(ErrorCode::INVALID_FACT, "unknown breakdown field '" + f.breakdown.front() + "'");
  if (f.measure.empty()) throw Error(ErrorCode::INVALID_FACT, "fact has no measure");
  std::vector<std::size_t> mcols;
  for (const auto& m : f.measure) {
    auto idx = t.field_index(m.field);
    if (!idx) throw Error(ErrorCode::INVALID_FACT, "unknown measure field '" + m.field + "'");
    mcols.push_back(*idx);
  }
  for (const auto& c : f.subspace) {
    if (!t.field_index(c.field)) throw Error(ErrorCode::INVALID_FACT, "unknown subspace field '" + c.field + "'");
  }

  const std::vector<std::size_t> rows = rows_in_subspace(f, t);
  if (rows.empty()) throw Error(ErrorCode::EMPTY_SUBSPACE, "no rows satisfy the subspace");

  struct Acc {
    std::vector<std::vector<double>> values;
    std::vector<std::size_t> nonnull;
    std::size_t rows = 0;
  };
  std::map<Cell, Acc, CellLess> acc;
  for (std::size_t r : rows) {
    const Row& row = t.rows[r];
    const Cell& key = row[*bidx];
    if (is_null(key)) continue;
    Acc& a = acc[key];
    if (a.values.empty()) {
      a.values.resize(mcols.size());
      a.nonnull.resize(mcols.size());
    }
    ++a.rows;
    for (std::size_t m = 0; m < mcols.size(); ++m) {
      const Cell& c = row[mcols[m]];
      if (is_null(c)) continue;
      ++a.nonnull[m];
      if (const auto* d = std::get_if<double>(&c)) a.values[m].push_back(*d);
    }
  }

  FactResult res;
  res.fact = f;
  res.breakdown_field = t.fields[*bidx].name;
  res.breakdown_kind = t.fields[*bidx].kind;
  for (auto& [key, a] : acc) {
    FactGroup g;
    g.key = key;
    g.row_count = a.rows;
    bool defined = true;
    for (std::size_t m = 0; m < mcols.size(); ++m) {
      if (f.measure[m].aggregate != Aggregate::count && a.values[m].empty()) {
        defined = false;
        break;
      }
      // Sorting first keeps min/max/none independent of row order.
      std::sort(a.values[m].begin(), a.values[m].end());
      g.values.push_back(aggregate(f.measure[m].aggregate, a.values[m], a.nonnull[m]));
    }
    if (defined) res.groups.push_back(std::move(g));
  }
  if (res.groups.empty()) degenerate("no group has a non-null measure value");

  // Group order: temporal keys by time; rank/extreme by value descending;
  // otherwise by key.
  const bool temporal = res.breakdown_kind == FieldKind::temporal;
  if (temporal) {
    std::stable_sort(res.groups.begin(), res.groups.end(), [](const FactGroup& a, const FactGroup& b) {
      auto ta = time_ordinal(a.key), tb = time_ordinal(b.key);
      if (ta && tb && *ta != *tb) return *ta < *tb;
      if (ta.has_value() != tb.has_value()) return ta.has_value();
      return compare_cells(a.key, b.key) < 0;
    });
  } else if (f.type == FactType::rank || f.type == FactType::extreme) {
    std::stable_sort(res.groups.begin(), res.groups.end(), [](const FactGroup& a, const FactGroup& b) {
      if (a.value() != b.value()) return a.value() > b.value();
      return compare_cells(a.key, b.key) < 0;
    });
  }

  for (const auto& c : f.focus) {
    auto it = std::find_if(res.groups.begin(), res.groups.end(),
                           [&](const FactGroup& g) { return cell_matches(g.key, c.value); });
    if (it != res.groups.end()) res.focus_keys.push_back(it->key);
  }

  auto find_group = [&](const Cell& key) -> const FactGroup& {
    return *std::find_if(res.groups.begin(), res.groups.end(),
                         [&](const FactGroup& g) { return compare_cells(g.key, key) == 0; });
  };
  const std::vector<double> values = group_values(res.groups);
  const std::size_t n = res.groups.size();

  switch (f.type) {
    case FactType::value: {
      if (n != 1) degenerate("value fact covers " + std::to_string(n) + " groups");
      res.derived = ValueResult{values.front()};
      break;
    }
    case FactType::difference: {
      if (res.focus_keys.size() < 2) degenerate("difference needs two focus groups with values");
      const FactGroup& ga = find_group(res.focus_keys[0]);
      const FactGroup& gb = find_group(res.focus_keys[1]);
      double a = ga.value(), b = gb.value();
      if (b == 0.0) degenerate("relative difference has a zero denominator");
      res.derived = DifferenceResult{ga.key, gb.key, a, b, a - b, (a - b) / b};
      break;
    }
    case FactType::proportion: {
      if (res.focus_keys.empty()) degenerate("proportion needs a focus group with a value");
      if (std::any_of(values.begin(), values.end(), [](double v) { return v < 0.0; })) {
        degenerate("proportion needs non-negative values");
      }
      double total = numeric::exact_sum(values);
      if (total == 0.0) degenerate("proportion total is zero");
      ProportionResult p;
      p.focus_key = res.focus_keys.front();
      for (double v : values) p.shares.push_back(v / total);
      p.share = find_group(p.focus_key).value() / total;
      res.derived = std::move(p);
      break;
    }
    case FactType::trend: {
      if (n < kTrendMinPoints) {
        degenerate("trend needs at least " + std::to_string(kTrendMinPoints) + " time points, got " +
                   std::to_string(n));
      }
      std::vector<double> xs;
      for (const auto& g : res.groups) {
        auto x = time_ordinal(g.key);
        if (!x) throw Error(ErrorCode::INVALID_FACT, "trend breakdown value '" + cell_text(g.key) + "' is not a time");
        xs.push_back(*x);
      }
      const double xbar = mean_of(xs);
      std::vector<double> num, den;
      for (std::size_t i = 0; i < n; ++i) {
        const double dx = xs[i] - xbar;
        num.push_back(dx * values[i]);
        den.push_back(dx * dx);
      }
      const double sxx = numeric::exact_sum(den);
      if (sxx == 0.0) degenerate("trend time points do not vary");
      const double slope = numeric::exact_sum(num) / sxx;
      const double span = *std::max_element(xs.begin(), xs.end()) - *std::min_element(xs.begin(), xs.end());
      const double scale = std::max(std::abs(mean_of(values)), std::numeric_limits<double>::epsilon());
      Direction dir = Direction::flat;
      if (std::abs(slope) * span / scale >= kFlatTrendThreshold) {
        dir = slope > 0 ? Direction::increasing : Direction::decreasing;
      }
      res.derived = TrendResult{slope, dir, values.front(), values.back(), res.groups.front().key,
                                res.groups.back().key};
      break;
    }
    case FactType::categorization: {
      CategorizationResult c;
      for (const auto& g : res.groups) {
        c.categories.push_back(g.key);
        c.counts.push_back(g.row_count);
      }
      res.derived = std::move(c);
      break;
    }
    case FactType::distribution: {
      const double mean = mean_of(values);
      res.derived = DistributionResult{mean, std_of(values, mean), *std::min_element(values.begin(), values.end()),
                                       *std::max_element(values.begin(), values.end())};
      break;
    }
    case FactType::rank: {
      std::vector<const FactGroup*> order;
      for (const auto& g : res.groups) order.push_back(&g);
      std::stable_sort(order.begin(), order.end(), [](const FactGroup* a, const FactGroup* b) {
        if (a->value() != b->value()) return a->value() > b->value();
        return compare_cells(a->key, b->key) < 0;
      });
      RankResult r;
      for (const auto* g : order) r.ordering.push_back(g->key);
      if (!res.focus_keys.empty()) {
        for (std::size_t i = 0; i < r.ordering.size(); ++i) {
          if (compare_cells(r.ordering[i], res.focus_keys.front()) == 0) r.focus_position = i + 1;
        }
      }
      res.derived = std::move(r);
      break;
    }
    case FactType::association: {
      if (f.measure.size() < 2) throw Error(ErrorCode::INVALID_FACT, "association needs two measures");
      if (n < 2) degenerate("association needs at least 2 paired points");
      const std::vector<double> ys = group_values(res.groups, 1);
      const double mx = mean_of(values), my = mean_of(ys);
      std::vector<double> sxy, sxx, syy;
      for (std::size_t i = 0; i < n; ++i) {
        const double dx = values[i] - mx, dy = ys[i] - my;
        sxy.push_back(dx * dy);
        sxx.push_back(dx * dx);
        syy.push_back(dy * dy);
      }
      const double vx = numeric::exact_sum(sxx), vy = numeric::exact_sum(syy);
      if (vx == 0.0 || vy == 0.0) degenerate("association measure has zero variance");
      const double r = numeric::exact_sum(sxy) / std::sqrt(vx * vy);
      res.derived = AssociationResult{std::clamp(r, -1.0, 1.0), n};
      break;
    }
    case FactType::extreme: {
      const ExtremeKind kind = f.measure.front().aggregate == Aggregate::min ? ExtremeKind::min : ExtremeKind::max;
      std::size_t best = 0;
      for (std::size_t i = 1; i < n; ++i) {
        if (kind == ExtremeKind::max ? values[i] > values[best] : values[i] < values[best]) best = i;
      }
      res.derived = ExtremeResult{kind, res.groups[best].key, values[best]};
      break;
    }
    case FactType::outlier: {
      if (n < kOutlierMinGroups) {
        degenerate("outlier detection needs at least " + std::to_string(kOutlierMinGroups) + " groups");
      }
      const double mean = mean_of(values);
      const double sd = std_of(values, mean);
      OutlierResult o;
      if (sd > 0.0) {
        for (std::size_t i = 0; i < n; ++i) {
          if (std::abs((values[i] - mean) / sd) > kOutlierZ) o.outlier_keys.push_back(res.groups[i].key);
        }
      }
      res.derived = std::move(o);
      break;
    }
  }
  return res;
}

nlohmann::json derived_to_json(const DerivedResult& d) {
  auto cells = [](const std::vector<Cell>& cs) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& c : cs) out.push_back(cell_to_json(c));
    return out;
  };
  return std::visit(
      [&](const auto& r) -> nlohmann::json {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, ValueResult>) {
          return {{"kind", "value"}, {"scalar", r.scalar}};
        } else if constexpr (std::is_same_v<T, DifferenceResult>) {
          return {{"kind", "difference"}, {"key_a", cell_to_json(r.key_a)}, {"key_b", cell_to_json(r.key_b)},
                  {"a", r.a}, {"b", r.b}, {"abs_diff", r.abs_diff}, {"rel_diff", r.rel_diff}};
        } else if constexpr (std::is_same_v<T, ProportionResult>) {
          return {{"kind", "proportion"}, {"focus_key", cell_to_json(r.focus_key)}, {"share", r.share},
                  {"shares", r.shares}};
        } else if constexpr (std::is_same_v<T, TrendResult>) {
          return {{"kind", "trend"}, {"slope", r.slope}, {"direction", std::string(to_string(r.direction))},
                  {"start", r.start}, {"end", r.end}, {"start_key", cell_to_json(r.start_key)},
                  {"end_key", cell_to_json(r.end_key)}};
        } else if constexpr (std::is_same_v<T, CategorizationResult>) {
          return {{"kind", "categorization"}, {"categories", cells(r.categories)}, {"counts", r.counts}};
        } else if constexpr (std::is_same_v<T, DistributionResult>) {
          return {{"kind", "distribution"}, {"mean", r.mean}, {"std", r.std}, {"min", r.min}, {"max", r.max}};
        } else if constexpr (std::is_same_v<T, RankResult>) {
          nlohmann::json j = {{"kind", "rank"}, {"ordering", cells(r.ordering)}, {"focus_position", nullptr}};
          if (r.focus_position) j["focus_position"] = *r.focus_position;
          return j;
        } else if constexpr (std::is_same_v<T, AssociationResult>) {
          return {{"kind", "association"}, {"pearson_r", r.pearson_r}, {"points", r.points}};
        } else if constexpr (std::is_same_v<T, ExtremeResult>) {
          return {{"kind", "extreme"}, {"extreme", r.kind == ExtremeKind::max ? "max" : "min"},
                  {"key", cell_to_json(r.key)}, {"value", r.value}};
        } else {
          return {{"kind", "outlier"}, {"outlier_keys", cells(r.outlier_keys)}};
        }
      },
      d);
}

nlohmann::json to_json(const FactResult& r) {
  nlohmann::json groups = nlohmann::json::array();
  for (const auto& g : r.groups) {
    groups.push_back({{"key", cell_to_json(g.key)}, {"values", g.values}, {"row_count", g.row_count}});
  }
  nlohmann::json focus = nlohmann::json::array();
  for (const auto& k : r.focus_keys) focus.push_back(cell_to_json(k));
  return {{"fact", to_json(r.fact)},
          {"breakdown", {{"field", r.breakdown_field}, {"kind", std::string(to_string(r.breakdown_kind))}}},
          {"groups", groups},
          {"derived", derived_to_json(r.derived)},
          {"focus_keys", focus}};
}

// --- charts -----------------------------------------------------------------

std::string_view to_string(ChartMark m) {
  switch (m) {
    case ChartMark::line: return "line";
    case ChartMark::bar: return "bar";
    case ChartMark::grouped_bar: return "grouped_bar";
    case ChartMark::pie: return "pie";
    case ChartMark::scatter: return "scatter";
    case ChartMark::big_number: return "big_number";
  }
  return "bar";
}

ChartMark mark_for(FactType t) {
  switch (t) {
    case FactType::value: return ChartMark::big_number;
    case FactType::trend: return ChartMark::line;
    case FactType::difference: return ChartMark::grouped_bar;
    case FactType::proportion: return ChartMark::pie;
    case FactType::association: return ChartMark::scatter;
    case FactType::outlier: return ChartMark::line;
    case FactType::rank:
    case FactType::extreme:
    case FactType::categorization:
    case FactType::distribution: return ChartMark::bar;
  }
  return ChartMark::bar;
}

namespace {

std::string humanize(std::string_view field) {
  std::string out;
  for (char c : field) out.push_back(c == '_' ? ' ' : c);
  if (!out.empty()) out[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(out[0])));
  return out;
}

std::string measure_title(const DataFact& f, const Measure& m) {
  std::string base = humanize(m.field);
  for (const auto& c : f.subspace) {
    if (text::iequals(c.field, "series") && std::holds_alternative<std::string>(c.value)) {
      base = std::get<std::string>(c.value);
    }
  }
  switch (m.aggregate) {
    case Aggregate::none: return base;
    case Aggregate::count: return "Count of " + base;
    case Aggregate::sum: return "Sum of " + base;
    case Aggregate::avg: return "Average of " + base;
    case Aggregate::min: return "Minimum of " + base;
    case Aggregate::max: return "Maximum of " + base;
  }
  return base;
}

void add_highlight(std::vector<std::string>& hs, const Cell& key) {
  std::string k = cell_text(key);
  if (std::find(hs.begin(), hs.end(), k) == hs.end()) hs.push_back(std::move(k));
}

}  // namespace

ChartSpec chart_spec(const FactResult& r, std::string_view provenance) {
  ChartSpec c;
  c.mark = mark_for(r.fact.type);
  const Measure& m0 = r.fact.measure.front();
  if (r.fact.type == FactType::association && r.fact.measure.size() >= 2) {
    const Measure& m1 = r.fact.measure[1];
    c.x = {m0.field, measure_title(r.fact, m0)};
    c.y = {m1.field, measure_title(r.fact, m1)};
    for (const auto& g : r.groups) c.data.push_back({g.values[0], g.values[1], cell_text(g.key)});
  } else {
    c.x = {r.breakdown_field, humanize(r.breakdown_field)};
    c.y = {m0.field, measure_title(r.fact, m0)};
    for (const auto& g : r.groups) c.data.push_back({cell_to_json(g.key), g.value(), cell_text(g.key)});
  }
  for (const auto& k : r.focus_keys) add_highlight(c.highlight, k);
  if (const auto* e = std::get_if<ExtremeResult>(&r.derived)) add_highlight(c.highlight, e->key);
  if (const auto* o = std::get_if<OutlierResult>(&r.derived)) {
    for (const auto& k : o->outlier_keys) add_highlight(c.highlight, k);
  }
  c.caption = text::trim(r.fact.description).empty() ? canonical_description(r) : r.fact.description;
  c.source = provenance.empty() ? std::string("Source: unknown") : std::string(provenance);
  return c;
}

nlohmann::json to_json(const ChartSpec& c) {
  nlohmann::json data = nlohmann::json::array();
  for (const auto& p : c.data) data.push_back({{"x", p.x}, {"y", p.y}, {"label", p.label}});
  return {{"mark", std::string(to_string(c.mark))},
          {"encoding",
           {{"x", {{"field", c.x.field}, {"title", c.x.title}}}, {"y", {{"field", c.y.field}, {"title", c.y.title}}}}},
          {"highlight", c.highlight},
          {"caption", c.caption},
          {"source", c.source},
          {"data", data}};
}

}  // namespace factscope
