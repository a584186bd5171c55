#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "factscope/dataset_store.hpp"
#include "factscope/fact_model.hpp"

namespace factscope {

struct FactGroup {
  Cell key;
  std::vector<double> values;  // one aggregated value per measure
  std::size_t row_count = 0;

  double value() const { return values.front(); }
};

enum class Direction { increasing, decreasing, flat };
std::string_view to_string(Direction d);

struct ValueResult {
  double scalar;
};
struct DifferenceResult {
  Cell key_a, key_b;
  double a, b, abs_diff, rel_diff;
};
struct ProportionResult {
  Cell focus_key;
  double share;
  std::vector<double> shares;  // aligned with groups
};
struct TrendResult {
  double slope;
  Direction direction;
  double start, end;
  Cell start_key, end_key;
};
struct CategorizationResult {
  std::vector<Cell> categories;
  std::vector<std::size_t> counts;  // rows per category
};
struct DistributionResult {
  double mean, std, min, max;
};
struct RankResult {
  std::vector<Cell> ordering;                // keys by value, descending
  std::optional<std::size_t> focus_position;  // 1-based
};
struct AssociationResult {
  double pearson_r;
  std::size_t points;
};
enum class ExtremeKind { max, min };
struct ExtremeResult {
  ExtremeKind kind;
  Cell key;
  double value;
};
struct OutlierResult {
  std::vector<Cell> outlier_keys;
};

using DerivedResult = std::variant<ValueResult, DifferenceResult, ProportionResult, TrendResult, CategorizationResult,
                                   DistributionResult, RankResult, AssociationResult, ExtremeResult, OutlierResult>;

struct FactResult {
  DataFact fact;
  std::string breakdown_field;
  FieldKind breakdown_kind = FieldKind::categorical;
  std::vector<FactGroup> groups;
  DerivedResult derived;
  std::vector<Cell> focus_keys;
};

inline constexpr double kFlatTrendThreshold = 0.01;
inline constexpr double kOutlierZ = 2.5;
inline constexpr std::size_t kOutlierMinGroups = 4;
inline constexpr std::size_t kTrendMinPoints = 3;

// Numeric time axis: years as integers, ISO dates as days since 1970-01-01.
std::optional<double> time_ordinal(const Cell& key);

// Filters by the subspace, groups by the breakdown, aggregates each measure
// per group (nulls excluded) and derives the type-specific result.
// Throws EMPTY_SUBSPACE, DEGENERATE, or INVALID_FACT for references the
// sub-table cannot resolve.
FactResult compute_fact(const DataFact& f, const SubTable& t);

nlohmann::json to_json(const FactResult& r);
nlohmann::json derived_to_json(const DerivedResult& d);

enum class ChartMark { line, bar, grouped_bar, pie, scatter, big_number };
std::string_view to_string(ChartMark m);

struct AxisEncoding {
  std::string field;
  std::string title;
};

struct ChartPoint {
  nlohmann::json x;
  nlohmann::json y;
  std::string label;
};

struct ChartSpec {
  ChartMark mark;
  AxisEncoding x, y;
  std::vector<std::string> highlight;
  std::string caption;
  std::string source;
  std::vector<ChartPoint> data;
};

ChartMark mark_for(FactType t);
ChartSpec chart_spec(const FactResult& r, std::string_view provenance);
nlohmann::json to_json(const ChartSpec& c);

enum class MismatchKind { NUMBER_NOT_FOUND, YEAR_OUT_OF_RANGE, DIRECTION_CONFLICT };
std::string_view to_string(MismatchKind k);

struct Mismatch {
  MismatchKind kind;
  std::string detail;
};

struct ConsistencyReport {
  bool ok = true;
  std::vector<Mismatch> mismatches;

  void add(MismatchKind kind, std::string detail) {
    mismatches.push_back({kind, std::move(detail)});
    ok = false;
  }
  bool has(MismatchKind kind) const;
  nlohmann::json to_json() const;
};

inline constexpr double kCaptionRelativeTolerance = 0.005;

// Numbers cited in a caption, after magnitude words and percent signs.
struct CitedNumber {
  double value;
  bool percent;
  bool year;
  std::string text;
};
std::vector<CitedNumber> extract_numbers(std::string_view description);

// Cross-checks a caption against the computed result: every number must
// match a group or derived value within 0.5%, years must be ones the result
// refers to, and direction words must agree with the trend.
ConsistencyReport check_description(const FactResult& r, std::string_view description);

// Engine-written caption for a result; always passes check_description.
std::string canonical_description(const FactResult& r);

}  // namespace factscope
