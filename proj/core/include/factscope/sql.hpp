#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "factscope/dataset_store.hpp"

namespace factscope::sql {

// Supported subset:
//   SELECT (* | col [, col]...) FROM table
//   [WHERE predicate] [ORDER BY col [ASC|DESC] [, ...]] [LIMIT n] [;]
// predicate: comparisons (=, <>, !=, <, >, <=, >=) between a column and a
// literal, [NOT] IN (literal, ...), [NOT] LIKE 'pattern', IS [NOT] NULL,
// combined with AND / OR / NOT and parentheses.

enum class ErrorKind { NOT_SELECT, UNKNOWN_COLUMN, UNKNOWN_TABLE, LIMIT_EXCEEDED, SYNTAX, FORBIDDEN_CLAUSE };
std::string_view to_string(ErrorKind k);

struct ValidationError {
  ErrorKind code;
  std::string message;
  std::size_t location = 0;  // character offset into the query text
};

struct QueryValidationReport {
  bool ok = true;
  std::vector<ValidationError> errors;

  void add(ErrorKind code, std::string message, std::size_t location) {
    errors.push_back({code, std::move(message), location});
    ok = false;
  }
  bool has(ErrorKind code) const;
  std::string summary() const;  // one line per error, for repair prompts
  nlohmann::json to_json() const;
};

enum class CompareOp { eq, ne, lt, gt, le, ge };

struct ColumnRef {
  std::string name;
  std::size_t offset = 0;
};

struct Predicate;
using PredicatePtr = std::unique_ptr<Predicate>;

struct Comparison {
  ColumnRef column;
  CompareOp op;
  Literal value;
};
struct InList {
  ColumnRef column;
  std::vector<Literal> values;
  bool negated = false;
};
struct Like {
  ColumnRef column;
  std::string pattern;
  bool negated = false;
};
struct IsNull {
  ColumnRef column;
  bool negated = false;
};
struct Logical {
  enum class Op { conj, disj } op;
  PredicatePtr lhs, rhs;
};
struct Negation {
  PredicatePtr operand;
};

struct Predicate {
  std::variant<Comparison, InList, Like, IsNull, Logical, Negation> node;
};

struct OrderKey {
  ColumnRef column;
  bool descending = false;
};

struct SelectStatement {
  bool select_all = false;
  std::vector<ColumnRef> columns;
  std::string table;
  std::size_t table_offset = 0;
  PredicatePtr where;
  std::vector<OrderKey> order_by;
  std::optional<long long> limit;
  std::size_t limit_offset = 0;
};

struct ParseResult {
  std::optional<SelectStatement> statement;
  QueryValidationReport report;  // syntax-level problems only
};

// Grammar-level parse. Never throws on bad input; problems land in the report.
ParseResult parse(std::string_view query);

// Full validation against a dataset: grammar, table, columns, limits.
QueryValidationReport validate_query(std::string_view query, const Dataset& dataset);

// Executes a validated query. A missing LIMIT is treated as LIMIT 10.
// Throws EXECUTION_FAILURE when validation fails or a predicate compares a
// column with a literal of an incompatible type.
SubTable execute_query(std::string_view query, const Dataset& dataset);

// SQL LIKE with % and _ wildcards, ASCII case-insensitive.
bool like_match(std::string_view value, std::string_view pattern);

// Single-quoted SQL string literal.
std::string quote_literal(std::string_view s);

}  // namespace factscope::sql
