#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "factscope/dataset_store.hpp"

namespace factscope {

enum class FactType {
  value,
  difference,
  proportion,
  trend,
  categorization,
  distribution,
  rank,
  association,
  extreme,
  outlier,
};
inline constexpr FactType kAllFactTypes[] = {
    FactType::value,          FactType::difference,   FactType::proportion, FactType::trend,
    FactType::categorization, FactType::distribution, FactType::rank,       FactType::association,
    FactType::extreme,        FactType::outlier};

std::string_view to_string(FactType t);
std::optional<FactType> fact_type_from_string(std::string_view s);  // case-insensitive

enum class Aggregate { none, count, sum, avg, min, max };
std::string_view to_string(Aggregate a);
// Accepts the canonical names plus "average"/"mean", "minimum", "maximum".
std::optional<Aggregate> aggregate_from_string(std::string_view s);

struct Measure {
  std::string field;
  Aggregate aggregate = Aggregate::none;
  bool operator==(const Measure&) const = default;
};

struct FilterClause {
  std::string field;
  Literal value;
  bool operator==(const FilterClause&) const = default;
};

// {type, subspace, breakdown, measure, focus} plus the written description.
struct DataFact {
  FactType type = FactType::value;
  std::vector<FilterClause> subspace;
  std::vector<std::string> breakdown;
  std::vector<Measure> measure;
  std::vector<FilterClause> focus;
  std::string description;

  bool operator==(const DataFact&) const = default;
};

// Accepts the object printed after "Generated Data Fact:" in the extraction
// prompt. Throws Error with MALFORMED, UNKNOWN_TYPE or UNKNOWN_AGGREGATE.
DataFact parse_fact(const nlohmann::json& raw);
DataFact parse_fact(std::string_view raw);

// Canonical serialisation: lowercase keys, canonical aggregate names.
nlohmann::json to_json(const DataFact& f);

enum class FactRule {
  UNKNOWN_FIELD,
  UNKNOWN_VALUE,
  BREAKDOWN_CARDINALITY,
  BREAKDOWN_NOT_GROUPABLE,
  MEASURE_CARDINALITY,
  ASSOCIATION_NEEDS_TWO_MEASURES,
  MEASURE_NOT_NUMERICAL,
  AGGREGATE_NONE_AMBIGUOUS,
  TREND_NEEDS_TEMPORAL,
  TREND_SUBSPACE_CARDINALITY,
  SUBSPACE_CARDINALITY,
  SUBSPACE_EMPTY,
  VALUE_NEEDS_SINGLE_GROUP,
  DIFFERENCE_NEEDS_TWO_FOCUS,
  PROPORTION_NEEDS_ONE_FOCUS,
  FOCUS_CARDINALITY,
  FOCUS_NOT_ON_BREAKDOWN,
  FOCUS_OUTSIDE_SUBSPACE,
  FOCUS_DUPLICATE,
  MISSING_DESCRIPTION,
  DESCRIPTION_TOO_LONG,
};
std::string_view to_string(FactRule r);

struct FactViolation {
  FactRule rule;
  std::string message;
};

struct FactValidationReport {
  bool ok = true;
  std::vector<FactViolation> violations;

  void add(FactRule rule, std::string message) {
    violations.push_back({rule, std::move(message)});
    ok = false;
  }
  bool has(FactRule rule) const;
  nlohmann::json to_json() const;
};

inline constexpr std::size_t kMaxDescriptionWords = 30;
inline constexpr std::size_t kMaxSubspaceClauses = 3;

// Checks the structural rules of the fact type plus every data-dependent
// rule (field existence, value domains, focus inside the subspace, group
// cardinality for aggregate "none") against the sub-table it was drawn from.
FactValidationReport validate_fact(const DataFact& f, const SubTable& table);

// Rows of `table` that satisfy every subspace clause, by row index.
std::vector<std::size_t> rows_in_subspace(const DataFact& f, const SubTable& table);

}  // namespace factscope
