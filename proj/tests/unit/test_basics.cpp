#include <algorithm>
#include <random>

#include <gtest/gtest.h>

#include "factscope/config.hpp"
#include "factscope/csv.hpp"
#include "factscope/digest.hpp"
#include "factscope/error.hpp"
#include "factscope/numeric.hpp"
#include "factscope/text_util.hpp"
#include "fixtures.hpp"

using namespace factscope;

TEST(Numeric, ExactSumIgnoresOrder) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> mag(-1e16, 1e16);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> v;
    for (int i = 0; i < 12; ++i) v.push_back(mag(rng) / static_cast<double>(1 + rng() % 1000000));
    const double first = numeric::exact_sum(v);
    std::shuffle(v.begin(), v.end(), rng);
    EXPECT_EQ(numeric::exact_sum(v), first);
  }
}

TEST(Numeric, ExactSumHandlesCancellation) {
  std::vector<double> v = {1e100, 1.0, -1e100};
  EXPECT_EQ(numeric::exact_sum(v), 1.0);
  std::vector<double> tenths(10, 0.1);
  EXPECT_EQ(numeric::exact_sum(tenths), 1.0);
  EXPECT_EQ(numeric::exact_sum(std::vector<double>{}), 0.0);
}

TEST(Text, ParseAndFormatNumbers) {
  EXPECT_EQ(text::parse_number(" 24.64 "), 24.64);
  EXPECT_FALSE(text::parse_number("x"));
  EXPECT_FALSE(text::parse_number("12abc"));
  EXPECT_FALSE(text::parse_number("inf"));
  EXPECT_EQ(text::format_number(2012), "2012");
  EXPECT_EQ(text::format_number(24.64), "24.64");
  EXPECT_EQ(text::format_number(6037000), "6037000");
}

TEST(Text, Tokenize) {
  EXPECT_EQ(text::tokenize("GDP per-capita, 2021!"), (std::vector<std::string>{"gdp", "per", "capita", "2021"}));
  EXPECT_TRUE(text::tokenize("  ...  ").empty());
}

TEST(Csv, QuotedCellsAndNewlines) {
  auto rows = csv::parse("a,b\n\"x, y\",\"he said \"\"hi\"\"\"\n\"multi\nline\",2\r\n");
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[1][0], "x, y");
  EXPECT_EQ(rows[1][1], "he said \"hi\"");
  EXPECT_EQ(rows[2][0], "multi\nline");
  EXPECT_EQ(rows[2][1], "2");
  EXPECT_EQ(csv::quote("a,b"), "\"a,b\"");
}

TEST(Digest, Sha256KnownVector) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Error, JsonShape) {
  Error e(ErrorCode::NODE_BUSY, "busy", {{"node", "n1"}});
  auto j = e.to_json();
  EXPECT_EQ(j["code"], "NODE_BUSY");
  EXPECT_EQ(j["message"], "busy");
  EXPECT_EQ(j["detail"]["node"], "n1");
}

TEST(Config, RejectsUnknownKeys) {
  EXPECT_THROW(config_from_json({{"bogus", 1}}), Error);
  EXPECT_THROW(config_from_json({{"llm", {{"provider", "carrier-pigeon"}}}}), Error);
  Config c = config_from_json({{"agent", {{"top_k", 5}}}, {"tree", {{"relevance_threshold", 0.3}}}});
  EXPECT_EQ(c.agent.top_k, 5u);
  EXPECT_DOUBLE_EQ(c.relevance_threshold, 0.3);
}

TEST(Config, BundledConfigsLoad) {
  Config def = load_config(fixtures::data_dir() / "config" / "default.json");
  EXPECT_EQ(def.llm_provider, "chat");
  Config scripted = load_config(fixtures::data_dir() / "config" / "scripted.json");
  ASSERT_TRUE(scripted.script);
  EXPECT_TRUE(std::filesystem::exists(*scripted.script));
  // credentials and endpoints do not change the digest
  Config other = def;
  other.chat.base_url = "http://localhost:1";
  other.port = 1;
  EXPECT_EQ(config_digest(def), config_digest(other));
  other.agent.top_k = 4;
  EXPECT_NE(config_digest(def), config_digest(other));
}
