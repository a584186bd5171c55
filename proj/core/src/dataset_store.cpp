#include "factscope/dataset_store.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <mutex>
#include <regex>
#include <set>
#include <sstream>

#include "factscope/csv.hpp"
#include "factscope/error.hpp"
#include "factscope/text_util.hpp"

namespace factscope {

namespace fs = std::filesystem;

std::string cell_text(const Cell& c) {
  if (const auto* d = std::get_if<double>(&c)) return text::format_number(*d);
  if (const auto* s = std::get_if<std::string>(&c)) return *s;
  return {};
}

nlohmann::json cell_to_json(const Cell& c) {
  if (const auto* d = std::get_if<double>(&c)) return *d;
  if (const auto* s = std::get_if<std::string>(&c)) return *s;
  return nullptr;
}

Cell cell_from_json(const nlohmann::json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) return j.get<std::string>();
  return std::monostate{};
}

std::string literal_text(const Literal& l) {
  if (const auto* d = std::get_if<double>(&l)) return text::format_number(*d);
  return std::get<std::string>(l);
}

nlohmann::json literal_to_json(const Literal& l) {
  if (const auto* d = std::get_if<double>(&l)) return *d;
  return std::get<std::string>(l);
}

Literal literal_from_json(const nlohmann::json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) return j.get<std::string>();
  if (j.is_boolean()) return std::string(j.get<bool>() ? "true" : "false");
  throw Error(ErrorCode::MALFORMED, "filter value must be a string or a number");
}

bool cell_matches(const Cell& c, const Literal& l) {
  if (is_null(c)) return false;
  if (const auto* num = std::get_if<double>(&c)) {
    if (const auto* ld = std::get_if<double>(&l)) return *num == *ld;
    auto parsed = text::parse_number(std::get<std::string>(l));
    return parsed && *parsed == *num;
  }
  const auto& s = std::get<std::string>(c);
  if (const auto* ls = std::get_if<std::string>(&l)) return s == *ls;
  auto parsed = text::parse_number(s);
  return parsed && *parsed == std::get<double>(l);
}

int compare_cells(const Cell& a, const Cell& b) {
  if (a.index() != b.index()) return a.index() < b.index() ? -1 : 1;
  if (const auto* x = std::get_if<double>(&a)) {
    double y = std::get<double>(b);
    return *x < y ? -1 : (*x > y ? 1 : 0);
  }
  if (const auto* x = std::get_if<std::string>(&a)) return x->compare(std::get<std::string>(b)) < 0 ? -1 : (*x == std::get<std::string>(b) ? 0 : 1);
  return 0;
}

std::string_view to_string(FieldKind k) {
  switch (k) {
    case FieldKind::temporal: return "temporal";
    case FieldKind::categorical: return "categorical";
    case FieldKind::numerical: return "numerical";
  }
  return "categorical";
}

FieldKind field_kind_from_string(std::string_view s) {
  if (s == "temporal") return FieldKind::temporal;
  if (s == "numerical") return FieldKind::numerical;
  if (s == "categorical") return FieldKind::categorical;
  throw Error(ErrorCode::MALFORMED, "unknown field kind '" + std::string(s) + "'");
}

namespace {

std::optional<std::size_t> find_field(const std::vector<FieldDescriptor>& fields, std::string_view name) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (text::iequals(fields[i].name, name)) return i;
  }
  return std::nullopt;
}

const std::regex& year_column_re() {
  static const std::regex re(R"(^\s*(\d{4})\s*\[YR(\d{4})\]\s*$)");
  return re;
}

bool is_null_marker(std::string_view s) { return s.empty() || s == ".."; }

bool is_year_text(std::string_view s) {
  if (s.size() != 4 || !std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); }))
    return false;
  int y = std::stoi(std::string(s));
  return y >= 1800 && y <= 2100;
}

bool is_iso_date(std::string_view s) {
  static const std::regex re(R"(^(\d{4})-(\d{2})-(\d{2})$)");
  std::cmatch m;
  if (!std::regex_match(s.begin(), s.end(), m, re)) return false;
  std::chrono::year_month_day ymd{std::chrono::year{std::stoi(m[1].str())},
                                  std::chrono::month{static_cast<unsigned>(std::stoi(m[2].str()))},
                                  std::chrono::day{static_cast<unsigned>(std::stoi(m[3].str()))}};
  return ymd.ok();
}

std::string wdi_column_name(const std::string& header) {
  static const std::map<std::string, std::string> known = {
      {"country name", "country"}, {"country code", "country_code"},
      {"series name", "series"},   {"series code", "series_code"},
      {"country", "country"},      {"series", "series"},
  };
  auto it = known.find(text::to_lower(text::trim(header)));
  return it != known.end() ? it->second : slugify(header);
}

bool is_footer_row(const std::vector<std::string>& row) {
  std::size_t nonempty = 0;
  for (const auto& c : row) nonempty += text::trim(c).empty() ? 0 : 1;
  return nonempty == 0 || row.size() == 1;
}

RawTable pivot_wide_wdi(const RawTable& src) {
  std::vector<std::size_t> id_cols;
  std::vector<std::pair<std::size_t, std::string>> year_cols;
  for (std::size_t i = 0; i < src.header.size(); ++i) {
    std::smatch m;
    const std::string& h = src.header[i];
    if (std::regex_match(h, m, year_column_re())) {
      year_cols.emplace_back(i, m[1].str());
    } else {
      id_cols.push_back(i);
    }
  }
  if (year_cols.empty()) throw Error(ErrorCode::EMPTY_SOURCE, "wide WDI table has no year columns");

  RawTable out;
  for (std::size_t i : id_cols) out.header.push_back(wdi_column_name(src.header[i]));
  out.header.push_back("year");
  out.header.push_back("value");

  for (std::size_t r = 0; r < src.rows.size(); ++r) {
    const auto& row = src.rows[r];
    if (is_footer_row(row)) continue;
    if (row.size() != src.header.size()) {
      throw Error(ErrorCode::RAGGED_ROWS, "row " + std::to_string(r + 2) + " has " + std::to_string(row.size()) +
                                              " cells, expected " + std::to_string(src.header.size()),
                  {{"row", r + 2}});
    }
    for (const auto& [col, year] : year_cols) {
      std::vector<std::string> long_row;
      for (std::size_t i : id_cols) long_row.push_back(row[i]);
      long_row.push_back(year);
      long_row.push_back(row[col]);
      out.rows.push_back(std::move(long_row));
    }
  }
  return out;
}

FieldKind infer_kind(const std::vector<std::vector<std::string>>& cells, std::size_t col) {
  std::size_t nonnull = 0, years = 0, dates = 0, numeric = 0;
  for (const auto& row : cells) {
    const std::string& v = row[col];
    if (is_null_marker(v)) continue;
    ++nonnull;
    if (is_year_text(v)) ++years;
    else if (is_iso_date(v)) ++dates;
    if (text::parse_number(v)) ++numeric;
  }
  if (nonnull == 0) return FieldKind::categorical;
  if (years + dates == nonnull) return FieldKind::temporal;
  // >= 90% numeric-parsable, integer arithmetic to avoid rounding at the edge
  if (numeric * 10 >= nonnull * 9) return FieldKind::numerical;
  return FieldKind::categorical;
}

Cell convert_cell(const std::string& v, FieldKind kind) {
  if (is_null_marker(v)) return std::monostate{};
  switch (kind) {
    case FieldKind::numerical: {
      auto n = text::parse_number(v);
      if (n) return *n;
      return std::monostate{};
    }
    case FieldKind::temporal:
      if (is_year_text(v)) return *text::parse_number(v);
      return v;
    case FieldKind::categorical:
      return v;
  }
  return v;
}

void fill_samples(Dataset& d) {
  for (std::size_t c = 0; c < d.fields.size(); ++c) {
    auto& samples = d.fields[c].sample_values;
    samples.clear();
    for (const auto& row : d.rows) {
      const Cell& cell = row[c];
      if (is_null(cell)) continue;
      bool seen = std::any_of(samples.begin(), samples.end(),
                              [&](const Cell& s) { return compare_cells(s, cell) == 0; });
      if (!seen) samples.push_back(cell);
      if (samples.size() == 5) break;
    }
  }
}

}  // namespace

std::optional<std::size_t> Dataset::field_index(std::string_view field) const { return find_field(fields, field); }
std::optional<std::size_t> SubTable::field_index(std::string_view field) const { return find_field(fields, field); }

nlohmann::json to_json(const FieldDescriptor& f) {
  nlohmann::json samples = nlohmann::json::array();
  for (const auto& s : f.sample_values) samples.push_back(cell_to_json(s));
  return {{"name", f.name}, {"kind", std::string(to_string(f.kind))}, {"dataset_id", f.dataset_id},
          {"sample_values", samples}};
}

namespace {
FieldDescriptor field_from_json(const nlohmann::json& j) {
  FieldDescriptor f;
  f.name = j.at("name").get<std::string>();
  f.kind = field_kind_from_string(j.at("kind").get<std::string>());
  f.dataset_id = j.value("dataset_id", "");
  if (j.contains("sample_values")) {
    for (const auto& s : j.at("sample_values")) f.sample_values.push_back(cell_from_json(s));
  }
  return f;
}
}  // namespace

nlohmann::json to_json(const SubTable& t) {
  nlohmann::json fields = nlohmann::json::array();
  for (const auto& f : t.fields) fields.push_back(to_json(f));
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : t.rows) {
    nlohmann::json row = nlohmann::json::array();
    for (const auto& c : r) row.push_back(cell_to_json(c));
    rows.push_back(std::move(row));
  }
  return {{"source_dataset", t.source_dataset}, {"fields", fields}, {"rows", rows},
          {"generating_query", t.generating_query}, {"source_rows", t.source_rows}};
}

SubTable subtable_from_json(const nlohmann::json& j) {
  SubTable t;
  t.source_dataset = j.at("source_dataset").get<std::string>();
  for (const auto& f : j.at("fields")) t.fields.push_back(field_from_json(f));
  for (const auto& r : j.at("rows")) {
    Row row;
    for (const auto& c : r) row.push_back(cell_from_json(c));
    if (row.size() != t.fields.size()) throw Error(ErrorCode::MALFORMED, "sub-table row width mismatch");
    t.rows.push_back(std::move(row));
  }
  t.generating_query = j.value("generating_query", "");
  if (j.contains("source_rows")) t.source_rows = j.at("source_rows").get<std::vector<std::size_t>>();
  return t;
}

bool is_wide_wdi_header(const std::vector<std::string>& header) {
  return std::any_of(header.begin(), header.end(),
                     [](const std::string& h) { return std::regex_match(h, year_column_re()); });
}

std::string slugify(std::string_view name) {
  std::string out;
  bool pending_sep = false;
  for (unsigned char c : name) {
    if (std::isalnum(c)) {
      if (pending_sep && !out.empty()) out.push_back('_');
      out.push_back(static_cast<char>(std::tolower(c)));
      pending_sep = false;
    } else {
      pending_sep = true;
    }
  }
  if (out.empty()) out = "dataset";
  if (std::isdigit(static_cast<unsigned char>(out.front()))) out.insert(0, "t_");
  return out;
}

Dataset normalize_dataset(const RawTable& source, std::string_view name, std::string_view provenance,
                          const IngestOptions& options) {
  if (source.header.empty()) throw Error(ErrorCode::EMPTY_SOURCE, "source has no header row");
  if (source.rows.empty()) throw Error(ErrorCode::EMPTY_SOURCE, "source has no data rows");

  const bool wide = options.wide_wdi || is_wide_wdi_header(source.header);
  RawTable table = wide ? pivot_wide_wdi(source) : source;
  if (table.rows.empty()) throw Error(ErrorCode::EMPTY_SOURCE, "source has no data rows");

  std::vector<std::string> header;
  for (std::size_t i = 0; i < table.header.size(); ++i) {
    std::string h = text::trim(table.header[i]);
    if (h.empty()) h = "column_" + std::to_string(i + 1);
    header.push_back(std::move(h));
  }
  std::set<std::string> seen;
  for (const auto& h : header) {
    if (!seen.insert(text::to_lower(h)).second) {
      throw Error(ErrorCode::DUPLICATE_FIELD, "duplicate field '" + h + "'", {{"field", h}});
    }
  }

  std::vector<std::vector<std::string>> cells;
  cells.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    if (row.size() != header.size()) {
      throw Error(ErrorCode::RAGGED_ROWS, "row " + std::to_string(r + 2) + " has " + std::to_string(row.size()) +
                                              " cells, expected " + std::to_string(header.size()),
                  {{"row", r + 2}});
    }
    std::vector<std::string> trimmed;
    trimmed.reserve(row.size());
    for (const auto& c : row) trimmed.push_back(text::trim(c));
    cells.push_back(std::move(trimmed));
  }

  Dataset d;
  d.name = std::string(name);
  d.id = slugify(name);
  d.provenance = std::string(provenance);
  for (std::size_t c = 0; c < header.size(); ++c) {
    FieldDescriptor f;
    f.name = header[c];
    f.kind = infer_kind(cells, c);
    f.dataset_id = d.id;
    d.fields.push_back(std::move(f));
  }
  if (std::none_of(d.fields.begin(), d.fields.end(),
                   [](const FieldDescriptor& f) { return f.kind != FieldKind::categorical; })) {
    throw Error(ErrorCode::INVALID_ARGUMENT, "dataset needs at least one numerical or temporal field");
  }
  d.rows.reserve(cells.size());
  for (const auto& row : cells) {
    Row out;
    out.reserve(row.size());
    for (std::size_t c = 0; c < row.size(); ++c) out.push_back(convert_cell(row[c], d.fields[c].kind));
    d.rows.push_back(std::move(out));
  }
  fill_samples(d);
  return d;
}

DatasetSummary summarize(const Dataset& d, std::size_t sample_rows) {
  DatasetSummary s;
  s.table_name = d.id;
  for (const auto& f : d.fields) s.columns.push_back(f.name);
  for (std::size_t i = 0; i < d.rows.size() && i < sample_rows; ++i) s.sample_rows.push_back(d.rows[i]);
  return s;
}

std::vector<std::string> series_names(const Dataset& d, std::size_t limit) {
  std::vector<std::string> out;
  auto idx = d.field_index("series");
  if (!idx) return out;
  for (const auto& row : d.rows) {
    std::string v = cell_text(row[*idx]);
    if (v.empty() || std::find(out.begin(), out.end(), v) != out.end()) continue;
    out.push_back(std::move(v));
    if (out.size() == limit) break;
  }
  return out;
}

// --- DatasetStore ---------------------------------------------------------

DatasetStore::DatasetStore(fs::path root) : root_(std::move(root)) {
  fs::create_directories(*root_);
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(*root_)) {
    if (entry.is_directory() && fs::exists(entry.path() / "meta.json")) dirs.push_back(entry.path());
  }
  std::sort(dirs.begin(), dirs.end());
  for (const auto& dir : dirs) {
    auto d = std::make_shared<Dataset>(load(dir));
    datasets_.emplace(d->id, std::move(d));
  }
}

std::string DatasetStore::unique_id(std::string_view name) const {
  std::string base = slugify(name);
  std::string id = base;
  for (int n = 2; datasets_.count(id); ++n) id = base + "_" + std::to_string(n);
  return id;
}

std::shared_ptr<const Dataset> DatasetStore::ingest(const RawTable& source, std::string_view name,
                                                    std::string_view provenance, const IngestOptions& options) {
  Dataset d = normalize_dataset(source, name, provenance, options);
  std::unique_lock lock(mutex_);
  d.id = unique_id(name);
  for (auto& f : d.fields) f.dataset_id = d.id;
  if (root_) persist(d, *root_ / d.id);
  auto ptr = std::make_shared<const Dataset>(std::move(d));
  datasets_.emplace(ptr->id, ptr);
  return ptr;
}

std::string csv_provenance(const fs::path& path) {
  fs::path sidecar = path;
  sidecar.replace_extension(".source");
  if (std::ifstream in(sidecar); in) {
    std::string line;
    if (std::getline(in, line) && !text::trim(line).empty()) return std::string(text::trim(line));
  }
  return path.filename().string();
}

std::shared_ptr<const Dataset> DatasetStore::ingest_csv_file(const fs::path& path, std::optional<std::string> name,
                                                             const IngestOptions& options) {
  auto records = csv::read_file(path.string());
  if (records.empty()) throw Error(ErrorCode::EMPTY_SOURCE, "empty file " + path.string());
  RawTable raw;
  raw.header = std::move(records.front());
  raw.rows.assign(std::make_move_iterator(records.begin() + 1), std::make_move_iterator(records.end()));
  return ingest(raw, name ? *name : path.stem().string(), csv_provenance(path), options);
}

std::shared_ptr<const Dataset> DatasetStore::find(std::string_view id) const {
  std::shared_lock lock(mutex_);
  auto it = datasets_.find(id);
  return it == datasets_.end() ? nullptr : it->second;
}

std::shared_ptr<const Dataset> DatasetStore::get(std::string_view id) const {
  auto d = find(id);
  if (!d) throw Error(ErrorCode::UNKNOWN_DATASET, "unknown dataset '" + std::string(id) + "'");
  return d;
}

std::vector<std::shared_ptr<const Dataset>> DatasetStore::datasets() const {
  std::shared_lock lock(mutex_);
  std::vector<std::shared_ptr<const Dataset>> out;
  for (const auto& [id, d] : datasets_) out.push_back(d);
  return out;
}

std::vector<FieldDescriptor> DatasetStore::list_fields() const {
  std::vector<FieldDescriptor> out;
  for (const auto& d : datasets()) out.insert(out.end(), d->fields.begin(), d->fields.end());
  std::sort(out.begin(), out.end(), [](const FieldDescriptor& a, const FieldDescriptor& b) {
    return std::tie(a.dataset_id, a.name) < std::tie(b.dataset_id, b.name);
  });
  return out;
}

void DatasetStore::persist(const Dataset& d, const fs::path& dir) {
  fs::create_directories(dir);
  nlohmann::json fields = nlohmann::json::array();
  for (const auto& f : d.fields) fields.push_back(to_json(f));
  nlohmann::json meta = {{"id", d.id}, {"name", d.name}, {"provenance", d.provenance}, {"fields", fields}};
  {
    std::ofstream out(dir / "meta.json", std::ios::binary);
    if (!out) throw Error(ErrorCode::IO_ERROR, "cannot write " + (dir / "meta.json").string());
    out << meta.dump(2) << '\n';
  }
  std::ofstream out(dir / "rows.csv", std::ios::binary);
  if (!out) throw Error(ErrorCode::IO_ERROR, "cannot write " + (dir / "rows.csv").string());
  std::vector<std::string> header;
  for (const auto& f : d.fields) header.push_back(f.name);
  csv::write_row(out, header);
  for (const auto& row : d.rows) {
    std::vector<std::string> cells;
    for (const auto& c : row) cells.push_back(cell_text(c));
    csv::write_row(out, cells);
  }
}

Dataset DatasetStore::load(const fs::path& dir) {
  std::ifstream in(dir / "meta.json", std::ios::binary);
  if (!in) throw Error(ErrorCode::IO_ERROR, "cannot read " + (dir / "meta.json").string());
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::IO_ERROR, "corrupt " + (dir / "meta.json").string() + ": " + e.what());
  }
  Dataset d;
  d.id = meta.at("id").get<std::string>();
  d.name = meta.at("name").get<std::string>();
  d.provenance = meta.value("provenance", "");
  for (const auto& f : meta.at("fields")) {
    FieldDescriptor fd = field_from_json(f);
    fd.dataset_id = d.id;
    d.fields.push_back(std::move(fd));
  }
  auto records = csv::read_file((dir / "rows.csv").string());
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != d.fields.size()) {
      throw Error(ErrorCode::RAGGED_ROWS, "persisted row " + std::to_string(r + 1) + " has wrong width");
    }
    Row row;
    for (std::size_t c = 0; c < d.fields.size(); ++c) row.push_back(convert_cell(records[r][c], d.fields[c].kind));
    d.rows.push_back(std::move(row));
  }
  fill_samples(d);
  return d;
}

}  // namespace factscope
