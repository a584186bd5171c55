#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

namespace factscope {

// A table cell: null, a finite number, or text.
using Cell = std::variant<std::monostate, double, std::string>;
// A literal appearing in a query or a fact filter.
using Literal = std::variant<double, std::string>;

inline bool is_null(const Cell& c) { return std::holds_alternative<std::monostate>(c); }
std::string cell_text(const Cell& c);  // "" for null
nlohmann::json cell_to_json(const Cell& c);
Cell cell_from_json(const nlohmann::json& j);
std::string literal_text(const Literal& l);
nlohmann::json literal_to_json(const Literal& l);
Literal literal_from_json(const nlohmann::json& j);

// Equality used by query predicates and fact filters: numbers compare
// numerically (text literals that parse as numbers included), text compares
// exactly. Null never matches.
bool cell_matches(const Cell& c, const Literal& l);

// Total order used for deterministic sorting: null < numbers < text.
int compare_cells(const Cell& a, const Cell& b);

enum class FieldKind { temporal, categorical, numerical };
std::string_view to_string(FieldKind k);
FieldKind field_kind_from_string(std::string_view s);

struct FieldDescriptor {
  std::string name;
  FieldKind kind = FieldKind::categorical;
  std::string dataset_id;
  std::vector<Cell> sample_values;  // up to 5 distinct non-null cells

  bool operator==(const FieldDescriptor&) const = default;
};

using Row = std::vector<Cell>;

struct Dataset {
  std::string id;
  std::string name;
  std::vector<FieldDescriptor> fields;
  std::vector<Row> rows;
  std::string provenance;

  // Case-insensitive field lookup.
  std::optional<std::size_t> field_index(std::string_view field) const;
};

struct SubTable {
  std::string source_dataset;
  std::vector<FieldDescriptor> fields;
  std::vector<Row> rows;
  std::string generating_query;
  std::vector<std::size_t> source_rows;  // dataset row index of every row

  static constexpr std::size_t kMaxRows = 10;
  static constexpr std::size_t kMaxFields = 50;

  std::optional<std::size_t> field_index(std::string_view field) const;
};

nlohmann::json to_json(const FieldDescriptor& f);
nlohmann::json to_json(const SubTable& t);
SubTable subtable_from_json(const nlohmann::json& j);

// Header/rows as read from a CSV file, before kind inference.
struct RawTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

struct IngestOptions {
  bool wide_wdi = false;  // force the wide-to-long pivot; auto-detected otherwise
};

// Applies the normalisation rules (wide WDI pivot, null markers, kind
// inference) without registering anything. Throws EMPTY_SOURCE, RAGGED_ROWS,
// DUPLICATE_FIELD.
Dataset normalize_dataset(const RawTable& source, std::string_view name, std::string_view provenance,
                          const IngestOptions& options = {});

// True when the header carries WDI year columns such as "2012 [YR2012]".
bool is_wide_wdi_header(const std::vector<std::string>& header);

// Lower snake_case identifier usable as an SQL table name.
std::string slugify(std::string_view name);

// Prompt-facing description of a dataset: name, columns, a few sample rows.
struct DatasetSummary {
  std::string table_name;
  std::vector<std::string> columns;
  std::vector<Row> sample_rows;
};
DatasetSummary summarize(const Dataset& d, std::size_t sample_rows = 5);

// Distinct values of a "series" column, when the dataset has one.
std::vector<std::string> series_names(const Dataset& d, std::size_t limit = 20);

// First line of "<stem>.source" next to the CSV when present, else the file name.
std::string csv_provenance(const std::filesystem::path& csv_path);

// Thread-safe collection of immutable datasets. Reads run concurrently;
// ingestion is serialised.
class DatasetStore {
 public:
  DatasetStore() = default;
  explicit DatasetStore(std::filesystem::path root);  // loads any persisted datasets

  std::shared_ptr<const Dataset> ingest(const RawTable& source, std::string_view name,
                                        std::string_view provenance, const IngestOptions& options = {});
  std::shared_ptr<const Dataset> ingest_csv_file(const std::filesystem::path& path,
                                                 std::optional<std::string> name = std::nullopt,
                                                 const IngestOptions& options = {});

  std::shared_ptr<const Dataset> get(std::string_view id) const;  // throws UNKNOWN_DATASET
  std::shared_ptr<const Dataset> find(std::string_view id) const;  // nullptr when absent
  std::vector<std::shared_ptr<const Dataset>> datasets() const;    // sorted by id

  // Sorted by (dataset id, field name).
  std::vector<FieldDescriptor> list_fields() const;

  const std::optional<std::filesystem::path>& root() const { return root_; }

  static void persist(const Dataset& d, const std::filesystem::path& dir);
  static Dataset load(const std::filesystem::path& dir);

 private:
  std::string unique_id(std::string_view name) const;

  mutable std::shared_mutex mutex_;
  std::map<std::string, std::shared_ptr<const Dataset>, std::less<>> datasets_;
  std::optional<std::filesystem::path> root_;
};

}  // namespace factscope
