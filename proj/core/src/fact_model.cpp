#include "factscope/fact_model.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "factscope/error.hpp"
#include "factscope/text_util.hpp"

namespace factscope {

std::string_view to_string(FactType t) {
  switch (t) {
    case FactType::value: return "value";
    case FactType::difference: return "difference";
    case FactType::proportion: return "proportion";
    case FactType::trend: return "trend";
    case FactType::categorization: return "categorization";
    case FactType::distribution: return "distribution";
    case FactType::rank: return "rank";
    case FactType::association: return "association";
    case FactType::extreme: return "extreme";
    case FactType::outlier: return "outlier";
  }
  return "value";
}

std::optional<FactType> fact_type_from_string(std::string_view s) {
  std::string key = text::to_lower(text::trim(s));
  for (FactType t : kAllFactTypes) {
    if (to_string(t) == key) return t;
  }
  return std::nullopt;
}

std::string_view to_string(Aggregate a) {
  switch (a) {
    case Aggregate::none: return "none";
    case Aggregate::count: return "count";
    case Aggregate::sum: return "sum";
    case Aggregate::avg: return "avg";
    case Aggregate::min: return "min";
    case Aggregate::max: return "max";
  }
  return "none";
}

std::optional<Aggregate> aggregate_from_string(std::string_view s) {
  static const std::map<std::string, Aggregate, std::less<>> names = {
      {"none", Aggregate::none},     {"count", Aggregate::count}, {"sum", Aggregate::sum},
      {"avg", Aggregate::avg},       {"average", Aggregate::avg}, {"mean", Aggregate::avg},
      {"min", Aggregate::min},       {"minimum", Aggregate::min}, {"max", Aggregate::max},
      {"maximum", Aggregate::max},
  };
  auto it = names.find(text::to_lower(text::trim(s)));
  if (it == names.end()) return std::nullopt;
  return it->second;
}

std::string_view to_string(FactRule r) {
  switch (r) {
    case FactRule::UNKNOWN_FIELD: return "UNKNOWN_FIELD";
    case FactRule::UNKNOWN_VALUE: return "UNKNOWN_VALUE";
    case FactRule::BREAKDOWN_CARDINALITY: return "BREAKDOWN_CARDINALITY";
    case FactRule::BREAKDOWN_NOT_GROUPABLE: return "BREAKDOWN_NOT_GROUPABLE";
    case FactRule::MEASURE_CARDINALITY: return "MEASURE_CARDINALITY";
    case FactRule::ASSOCIATION_NEEDS_TWO_MEASURES: return "ASSOCIATION_NEEDS_TWO_MEASURES";
    case FactRule::MEASURE_NOT_NUMERICAL: return "MEASURE_NOT_NUMERICAL";
    case FactRule::AGGREGATE_NONE_AMBIGUOUS: return "AGGREGATE_NONE_AMBIGUOUS";
    case FactRule::TREND_NEEDS_TEMPORAL: return "TREND_NEEDS_TEMPORAL";
    case FactRule::TREND_SUBSPACE_CARDINALITY: return "TREND_SUBSPACE_CARDINALITY";
    case FactRule::SUBSPACE_CARDINALITY: return "SUBSPACE_CARDINALITY";
    case FactRule::SUBSPACE_EMPTY: return "SUBSPACE_EMPTY";
    case FactRule::VALUE_NEEDS_SINGLE_GROUP: return "VALUE_NEEDS_SINGLE_GROUP";
    case FactRule::DIFFERENCE_NEEDS_TWO_FOCUS: return "DIFFERENCE_NEEDS_TWO_FOCUS";
    case FactRule::PROPORTION_NEEDS_ONE_FOCUS: return "PROPORTION_NEEDS_ONE_FOCUS";
    case FactRule::FOCUS_CARDINALITY: return "FOCUS_CARDINALITY";
    case FactRule::FOCUS_NOT_ON_BREAKDOWN: return "FOCUS_NOT_ON_BREAKDOWN";
    case FactRule::FOCUS_OUTSIDE_SUBSPACE: return "FOCUS_OUTSIDE_SUBSPACE";
    case FactRule::FOCUS_DUPLICATE: return "FOCUS_DUPLICATE";
    case FactRule::MISSING_DESCRIPTION: return "MISSING_DESCRIPTION";
    case FactRule::DESCRIPTION_TOO_LONG: return "DESCRIPTION_TOO_LONG";
  }
  return "UNKNOWN_FIELD";
}

bool FactValidationReport::has(FactRule rule) const {
  return std::any_of(violations.begin(), violations.end(), [&](const FactViolation& v) { return v.rule == rule; });
}

nlohmann::json FactValidationReport::to_json() const {
  nlohmann::json vs = nlohmann::json::array();
  for (const auto& v : violations) vs.push_back({{"rule", std::string(to_string(v.rule))}, {"message", v.message}});
  return {{"ok", ok}, {"violations", vs}};
}

// --- parsing ----------------------------------------------------------------

namespace {

[[noreturn]] void malformed(const std::string& why) { throw Error(ErrorCode::MALFORMED, "malformed fact: " + why); }

// Copy of `obj` with lowercased keys; rejects keys outside `allowed`.
nlohmann::json normalize_keys(const nlohmann::json& obj, const std::set<std::string>& allowed, const char* what) {
  if (!obj.is_object()) malformed(std::string(what) + " must be an object");
  nlohmann::json out = nlohmann::json::object();
  for (const auto& [k, v] : obj.items()) {
    std::string key = text::to_lower(text::trim(k));
    if (!allowed.count(key)) malformed(std::string("unknown key '") + k + "' in " + what);
    if (out.contains(key)) malformed(std::string("duplicate key '") + k + "' in " + what);
    out[key] = v;
  }
  return out;
}

std::vector<FilterClause> parse_filters(const nlohmann::json& j, const char* what) {
  std::vector<FilterClause> out;
  if (j.is_null()) return out;
  const nlohmann::json items = j.is_object() ? nlohmann::json::array({j}) : j;
  if (!items.is_array()) malformed(std::string(what) + " must be a list");
  for (const auto& item : items) {
    nlohmann::json c = normalize_keys(item, {"field", "value"}, what);
    if (!c.contains("field") || !c["field"].is_string()) malformed(std::string(what) + " clause needs a field name");
    if (!c.contains("value") || c["value"].is_null()) malformed(std::string(what) + " clause needs a value");
    if (!c["value"].is_string() && !c["value"].is_number()) malformed(std::string(what) + " value must be text or a number");
    out.push_back({c["field"].get<std::string>(), literal_from_json(c["value"])});
  }
  return out;
}

}  // namespace

DataFact parse_fact(const nlohmann::json& raw) {
  nlohmann::json obj =
      normalize_keys(raw, {"type", "subspace", "breakdown", "measure", "focus", "description"}, "fact");
  for (const char* key : {"type", "measure", "breakdown", "subspace", "focus"}) {
    if (!obj.contains(key)) malformed(std::string("missing '") + key + "'");
  }

  DataFact f;
  if (!obj["type"].is_string()) malformed("type must be a string");
  auto type = fact_type_from_string(obj["type"].get<std::string>());
  if (!type) {
    throw Error(ErrorCode::UNKNOWN_TYPE, "unknown fact type '" + obj["type"].get<std::string>() + "'",
                {{"type", obj["type"]}});
  }
  f.type = *type;

  nlohmann::json measures = obj["measure"].is_object() ? nlohmann::json::array({obj["measure"]}) : obj["measure"];
  if (!measures.is_array()) malformed("measure must be a list");
  for (const auto& item : measures) {
    nlohmann::json m = normalize_keys(item, {"field", "aggregate"}, "measure");
    if (!m.contains("field") || !m["field"].is_string()) malformed("measure needs a field name");
    Measure measure{m["field"].get<std::string>(), Aggregate::none};
    if (m.contains("aggregate") && !m["aggregate"].is_null()) {
      if (!m["aggregate"].is_string()) malformed("aggregate must be a string");
      auto agg = aggregate_from_string(m["aggregate"].get<std::string>());
      if (!agg) {
        throw Error(ErrorCode::UNKNOWN_AGGREGATE, "unknown aggregate '" + m["aggregate"].get<std::string>() + "'",
                    {{"aggregate", m["aggregate"]}});
      }
      measure.aggregate = *agg;
    }
    f.measure.push_back(std::move(measure));
  }

  const auto& bd = obj["breakdown"];
  if (bd.is_string()) {
    f.breakdown.push_back(bd.get<std::string>());
  } else if (bd.is_array()) {
    for (const auto& b : bd) {
      if (!b.is_string()) malformed("breakdown entries must be field names");
      f.breakdown.push_back(b.get<std::string>());
    }
  } else {
    malformed("breakdown must be a list of field names");
  }

  f.subspace = parse_filters(obj["subspace"], "subspace");
  f.focus = parse_filters(obj["focus"], "focus");

  if (obj.contains("description") && !obj["description"].is_null()) {
    if (!obj["description"].is_string()) malformed("description must be text");
    f.description = obj["description"].get<std::string>();
  }
  return f;
}

DataFact parse_fact(std::string_view raw) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(raw);
  } catch (const nlohmann::json::exception& e) {
    malformed(std::string("not JSON: ") + e.what());
  }
  return parse_fact(j);
}

nlohmann::json to_json(const DataFact& f) {
  auto filters = [](const std::vector<FilterClause>& cs) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& c : cs) out.push_back({{"field", c.field}, {"value", literal_to_json(c.value)}});
    return out;
  };
  nlohmann::json measures = nlohmann::json::array();
  for (const auto& m : f.measure) {
    measures.push_back({{"aggregate", std::string(to_string(m.aggregate))}, {"field", m.field}});
  }
  return {{"type", std::string(to_string(f.type))},
          {"measure", measures},
          {"breakdown", f.breakdown},
          {"subspace", filters(f.subspace)},
          {"focus", filters(f.focus)},
          {"description", f.description}};
}

// --- validation -------------------------------------------------------------

std::vector<std::size_t> rows_in_subspace(const DataFact& f, const SubTable& table) {
  std::vector<std::pair<std::size_t, const Literal*>> clauses;
  for (const auto& c : f.subspace) {
    auto idx = table.field_index(c.field);
    if (!idx) return {};
    clauses.emplace_back(*idx, &c.value);
  }
  std::vector<std::size_t> out;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    bool keep = std::all_of(clauses.begin(), clauses.end(),
                            [&](const auto& c) { return cell_matches(table.rows[r][c.first], *c.second); });
    if (keep) out.push_back(r);
  }
  return out;
}

namespace {

bool in_domain(const SubTable& t, std::size_t col, const Literal& v) {
  return std::any_of(t.rows.begin(), t.rows.end(), [&](const Row& r) { return cell_matches(r[col], v); });
}

std::size_t max_focus(FactType t) {
  switch (t) {
    case FactType::difference: return 2;
    case FactType::proportion: return 1;
    case FactType::rank:
    case FactType::extreme:
    case FactType::outlier: return 2;
    default: return 1;
  }
}

}  // namespace

FactValidationReport validate_fact(const DataFact& f, const SubTable& t) {
  FactValidationReport rep;
  bool resolvable = true;  // every referenced field exists

  // breakdown
  std::optional<std::size_t> bidx;
  if (f.breakdown.size() != 1) {
    rep.add(FactRule::BREAKDOWN_CARDINALITY,
            "exactly one breakdown field is required, got " + std::to_string(f.breakdown.size()));
  }
  if (!f.breakdown.empty()) {
    bidx = t.field_index(f.breakdown.front());
    if (!bidx) {
      rep.add(FactRule::UNKNOWN_FIELD, "breakdown field '" + f.breakdown.front() + "' does not exist");
      resolvable = false;
    } else if (t.fields[*bidx].kind == FieldKind::numerical) {
      rep.add(FactRule::BREAKDOWN_NOT_GROUPABLE,
              "breakdown '" + t.fields[*bidx].name + "' must be a temporal or categorical field");
    } else if (f.type == FactType::trend && t.fields[*bidx].kind != FieldKind::temporal) {
      rep.add(FactRule::TREND_NEEDS_TEMPORAL,
              "trend breakdown '" + t.fields[*bidx].name + "' must be a temporal field");
    }
  } else {
    resolvable = false;
  }

  // measures
  if (f.type == FactType::association) {
    if (f.measure.size() != 2) {
      rep.add(FactRule::ASSOCIATION_NEEDS_TWO_MEASURES,
              "association needs exactly two measures, got " + std::to_string(f.measure.size()));
    }
  } else if (f.measure.size() != 1) {
    rep.add(FactRule::MEASURE_CARDINALITY,
            std::string(to_string(f.type)) + " needs exactly one measure, got " + std::to_string(f.measure.size()));
  }
  std::vector<std::size_t> measure_cols;
  for (const auto& m : f.measure) {
    auto idx = t.field_index(m.field);
    if (!idx) {
      rep.add(FactRule::UNKNOWN_FIELD, "measure field '" + m.field + "' does not exist");
      resolvable = false;
      continue;
    }
    if (m.aggregate != Aggregate::count && t.fields[*idx].kind != FieldKind::numerical) {
      rep.add(FactRule::MEASURE_NOT_NUMERICAL, "measure field '" + m.field + "' is not numerical");
    }
    measure_cols.push_back(*idx);
  }

  // subspace
  if (f.type == FactType::trend) {
    if (f.subspace.size() != 1) {
      rep.add(FactRule::TREND_SUBSPACE_CARDINALITY,
              "trend needs exactly one subspace clause, got " + std::to_string(f.subspace.size()));
    }
  } else if (f.subspace.size() > kMaxSubspaceClauses) {
    rep.add(FactRule::SUBSPACE_CARDINALITY, "at most " + std::to_string(kMaxSubspaceClauses) +
                                                " subspace clauses are allowed, got " +
                                                std::to_string(f.subspace.size()));
  }
  for (const auto& c : f.subspace) {
    auto idx = t.field_index(c.field);
    if (!idx) {
      rep.add(FactRule::UNKNOWN_FIELD, "subspace field '" + c.field + "' does not exist");
      resolvable = false;
    } else if (!in_domain(t, *idx, c.value)) {
      rep.add(FactRule::UNKNOWN_VALUE,
              "subspace value '" + literal_text(c.value) + "' does not occur in field '" + c.field + "'");
    }
  }

  // focus
  switch (f.type) {
    case FactType::difference:
      if (f.focus.size() != 2) {
        rep.add(FactRule::DIFFERENCE_NEEDS_TWO_FOCUS,
                "difference needs exactly two focus groups, got " + std::to_string(f.focus.size()));
      }
      break;
    case FactType::proportion:
      if (f.focus.size() != 1) {
        rep.add(FactRule::PROPORTION_NEEDS_ONE_FOCUS,
                "proportion needs exactly one focus group, got " + std::to_string(f.focus.size()));
      }
      break;
    default:
      if (f.focus.size() > max_focus(f.type)) {
        rep.add(FactRule::FOCUS_CARDINALITY, std::string(to_string(f.type)) + " allows at most " +
                                                 std::to_string(max_focus(f.type)) + " focus groups, got " +
                                                 std::to_string(f.focus.size()));
      }
  }
  std::vector<const FilterClause*> focus_ok;
  for (std::size_t i = 0; i < f.focus.size(); ++i) {
    const auto& c = f.focus[i];
    auto idx = t.field_index(c.field);
    if (!idx) {
      rep.add(FactRule::UNKNOWN_FIELD, "focus field '" + c.field + "' does not exist");
      continue;
    }
    if (!bidx || *idx != *bidx) {
      rep.add(FactRule::FOCUS_NOT_ON_BREAKDOWN, "focus field '" + c.field + "' must be the breakdown field");
      continue;
    }
    if (!in_domain(t, *idx, c.value)) {
      rep.add(FactRule::UNKNOWN_VALUE,
              "focus value '" + literal_text(c.value) + "' does not occur in field '" + c.field + "'");
      continue;
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (t.field_index(f.focus[j].field) == idx) {
        // same field: duplicates are values matching the same cells
        bool same = std::any_of(t.rows.begin(), t.rows.end(), [&](const Row& r) {
          return cell_matches(r[*idx], c.value) && cell_matches(r[*idx], f.focus[j].value);
        });
        if (same) rep.add(FactRule::FOCUS_DUPLICATE, "focus value '" + literal_text(c.value) + "' repeated");
      }
    }
    focus_ok.push_back(&c);
  }

  // data-dependent rules
  if (resolvable && bidx) {
    std::vector<std::size_t> rows = rows_in_subspace(f, t);
    if (rows.empty()) {
      // An unknown subspace value already explains the empty selection.
      if (!rep.has(FactRule::UNKNOWN_VALUE)) rep.add(FactRule::SUBSPACE_EMPTY, "no rows satisfy the subspace");
    } else {
      std::vector<std::pair<Cell, std::size_t>> groups;  // key, row count
      for (std::size_t r : rows) {
        const Cell& key = t.rows[r][*bidx];
        if (is_null(key)) continue;
        auto it = std::find_if(groups.begin(), groups.end(),
                               [&](const auto& g) { return compare_cells(g.first, key) == 0; });
        if (it == groups.end()) groups.emplace_back(key, 1);
        else ++it->second;
      }
      for (const FilterClause* c : focus_ok) {
        bool inside = std::any_of(groups.begin(), groups.end(),
                                  [&](const auto& g) { return cell_matches(g.first, c->value); });
        if (!inside) {
          rep.add(FactRule::FOCUS_OUTSIDE_SUBSPACE,
                  "focus value '" + literal_text(c->value) + "' is not a group inside the subspace");
        }
      }
      if (f.type == FactType::value && groups.size() != 1) {
        rep.add(FactRule::VALUE_NEEDS_SINGLE_GROUP,
                "value fact subspace must isolate a single group, found " + std::to_string(groups.size()));
      }
      const bool uses_none = std::any_of(f.measure.begin(), f.measure.end(),
                                         [](const Measure& m) { return m.aggregate == Aggregate::none; });
      if (uses_none) {
        auto multi = std::find_if(groups.begin(), groups.end(), [](const auto& g) { return g.second > 1; });
        if (multi != groups.end()) {
          rep.add(FactRule::AGGREGATE_NONE_AMBIGUOUS,
                  "aggregate none needs one row per group, group '" + cell_text(multi->first) + "' has " +
                      std::to_string(multi->second));
        }
      }
    }
  }

  if (text::trim(f.description).empty()) {
    rep.add(FactRule::MISSING_DESCRIPTION, "description is empty");
  } else if (text::split_words(f.description).size() > kMaxDescriptionWords) {
    rep.add(FactRule::DESCRIPTION_TOO_LONG, "description exceeds " + std::to_string(kMaxDescriptionWords) + " words");
  }
  return rep;
}

}  // namespace factscope
