#include <cstdlib>

#include <gtest/gtest.h>

#include "factscope/csv.hpp"
#include "factscope/dataset_store.hpp"
#include "factscope/error.hpp"
#include "factscope/sql.hpp"
#include "fixtures.hpp"

using namespace factscope;

namespace {

RawTable raw(std::vector<std::string> header, std::vector<std::vector<std::string>> rows) {
  return RawTable{std::move(header), std::move(rows)};
}

std::vector<std::string> names(const Dataset& d) {
  std::vector<std::string> out;
  for (const auto& f : d.fields) out.push_back(f.name);
  return out;
}

const FieldDescriptor& field(const Dataset& d, const std::string& name) { return d.fields[*d.field_index(name)]; }

}  // namespace

TEST(Ingest, WideWdiIsPivotedToLong) {
  DatasetStore store;
  auto d = store.ingest(raw({"Country Name", "Series Name", "2012 [YR2012]", "2023 [YR2023]"},
                            {{"Japan", "Population ages 65 and above (%)", "24.64", "30.07"},
                             {"China", "Population ages 65 and above (%)", "9.4", ".."}}),
                        "aging", "test");
  EXPECT_EQ(names(*d), (std::vector<std::string>{"country", "series", "year", "value"}));
  EXPECT_EQ(field(*d, "country").kind, FieldKind::categorical);
  EXPECT_EQ(field(*d, "series").kind, FieldKind::categorical);
  EXPECT_EQ(field(*d, "year").kind, FieldKind::temporal);
  EXPECT_EQ(field(*d, "value").kind, FieldKind::numerical);
  ASSERT_EQ(d->rows.size(), 4u);
  // ".." is the WDI null marker
  bool saw_null = false;
  for (const auto& r : d->rows) saw_null = saw_null || is_null(r[3]);
  EXPECT_TRUE(saw_null);
}

TEST(Ingest, BundledWideFileIsDetected) {
  DatasetStore store;
  auto d = store.ingest_csv_file(fixtures::data_dir() / "sample" / "wdi_labor_force_wide.csv");
  EXPECT_EQ(names(*d),
            (std::vector<std::string>{"country", "country_code", "series", "series_code", "year", "value"}));
  EXPECT_EQ(d->rows.size(), 20u);
  EXPECT_EQ(d->provenance.rfind("World Bank", 0), 0u);
}

TEST(Ingest, MostlyTextColumnIsCategorical) {
  DatasetStore store;
  auto d = store.ingest(raw({"label", "score"}, {{"1.5", "1"}, {"2.0", "2"}, {"x", "3"}}), "t", "test");
  EXPECT_EQ(field(*d, "label").kind, FieldKind::categorical);
  EXPECT_EQ(field(*d, "score").kind, FieldKind::numerical);
}

TEST(Ingest, Errors) {
  DatasetStore store;
  auto code = [&](RawTable t) {
    try {
      store.ingest(t, "bad", "test");
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::INTERNAL;
  };
  EXPECT_EQ(code(raw({"a", "b"}, {})), ErrorCode::EMPTY_SOURCE);
  EXPECT_EQ(code(raw({"a", "b"}, {{"1", "2"}, {"3"}})), ErrorCode::RAGGED_ROWS);
  EXPECT_EQ(code(raw({"Value", "value"}, {{"1", "2"}})), ErrorCode::DUPLICATE_FIELD);
}

TEST(Ingest, GiniRoundTripIsIdentity) {
  const auto path = fixtures::data_dir() / "sample" / "gini_index.csv";
  const auto records = csv::read_file(path.string());
  DatasetStore store;
  auto d = store.ingest_csv_file(path);
  SubTable t = sql::execute_query("SELECT * FROM gini_index LIMIT 10", *d);
  ASSERT_EQ(t.rows.size(), 10u);
  ASSERT_EQ(records.size(), 11u);
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    for (std::size_t c = 0; c < t.fields.size(); ++c) {
      const std::string& cell = records[r + 1][c];
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (!cell.empty() && end == cell.c_str() + cell.size()) {
        EXPECT_EQ(std::get<double>(t.rows[r][c]), v) << "row " << r << " column " << t.fields[c].name;
      } else {
        EXPECT_EQ(std::get<std::string>(t.rows[r][c]), cell) << "row " << r << " column " << t.fields[c].name;
      }
    }
  }
}

TEST(Catalog, Ordering) {
  DatasetStore store;
  EXPECT_TRUE(store.list_fields().empty());
  store.ingest(raw({"zeta", "year", "alpha", "value"}, {{"x", "2020", "y", "1"}}), "beta", "test");
  auto fields = store.list_fields();
  ASSERT_EQ(fields.size(), 4u);
  EXPECT_EQ(fields[0].name, "alpha");
  EXPECT_EQ(fields[3].name, "zeta");
  store.ingest(raw({"year", "value"}, {{"2020", "1"}}), "alpha", "test");
  fields = store.list_fields();
  ASSERT_EQ(fields.size(), 6u);
  std::vector<std::string> year_owners;
  for (const auto& f : fields) {
    if (f.name == "year") year_owners.push_back(f.dataset_id);
  }
  EXPECT_EQ(year_owners, (std::vector<std::string>{"alpha", "beta"}));
}

TEST(Catalog, PersistsAcrossInstances) {
  auto dir = fixtures::temp_dir("store");
  {
    DatasetStore store(dir);
    store.ingest_csv_file(fixtures::data_dir() / "sample" / "japan_population_65.csv");
  }
  DatasetStore again(dir);
  auto d = again.get("japan_population_65");
  EXPECT_EQ(d->rows.size(), 12u);
  EXPECT_THROW(again.get("missing"), Error);
  std::filesystem::remove_all(dir);
}
