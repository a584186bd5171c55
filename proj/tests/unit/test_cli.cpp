#include <algorithm>
#include <cstdio>
#include <filesystem>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>
#include <sys/wait.h>

#include "fixtures.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
  int status;
  std::string out;
  std::string err;
};

std::string quote(const std::string& s) { return "'" + s + "'"; }

Run run(const std::string& args) {
  const fs::path err_path = fixtures::temp_dir("cli_err") / "stderr";
  const std::string cmd = quote(FACTSCOPE_CLI) + " " + args + " 2>" + quote(err_path.string());
  Run r{-1, "", ""};
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  const int raw = pclose(p);
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  r.err = fixtures::read_file(err_path);
  return r;
}

std::string scripted_args() {
  std::string s = "--config " + quote((fixtures::data_dir() / "config" / "scripted.json").string());
  for (const auto& csv : fixtures::sample_csvs()) s += " --data " + quote(csv.string());
  return s;
}

}  // namespace

TEST(Cli, IngestPrintsCatalog) {
  const auto csv = fixtures::data_dir() / "sample" / "gini_index.csv";
  auto r = run("ingest " + quote(csv.string()));
  ASSERT_EQ(r.status, 0) << r.err;
  auto j = json::parse(r.out);
  EXPECT_EQ(j["ingested"], "gini_index");
  std::vector<std::string> names;
  for (const auto& f : j["catalog"]) names.push_back(f["name"]);
  EXPECT_NE(std::find(names.begin(), names.end(), "country"), names.end());
  EXPECT_NE(std::find(names.begin(), names.end(), "value"), names.end());
}

TEST(Cli, RetrieveDepthZeroReplayAndFacts) {
  const auto dir = fixtures::temp_dir("cli_retrieve");
  const auto blob = dir / "tree.json";
  const auto transcript = dir / "t.jsonl";
  auto r = run("retrieve --statement " + quote(fixtures::kStatement) + " --depth 0 --out " + quote(blob.string()) +
               " --record " + quote(transcript.string()) + " " + scripted_args());
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_EQ(json::parse(r.out)["nodes"], 7);
  auto tree = json::parse(fixtures::read_file(blob));
  EXPECT_EQ(tree["body"]["nodes"].size(), 7u);

  r = run("replay " + quote(blob.string()) + " " + quote(transcript.string()) + " " + scripted_args());
  ASSERT_EQ(r.status, 0) << r.out << r.err;
  EXPECT_EQ(json::parse(r.out)["status"], "identical");

  std::string node;
  for (const auto& n : tree["body"]["nodes"]) {
    if (!n["facts"].empty()) {
      node = n["id"];
      break;
    }
  }
  ASSERT_FALSE(node.empty());
  const auto charts = dir / "charts";
  r = run("facts " + quote(blob.string()) + " --node " + node + " --emit-charts " + quote(charts.string()));
  ASSERT_EQ(r.status, 0) << r.err;
  ASSERT_TRUE(fs::exists(charts / (node + "_fact0.json")));
  auto chart = json::parse(fixtures::read_file(charts / (node + "_fact0.json")));
  EXPECT_TRUE(chart.contains("mark"));
  EXPECT_FALSE(chart["source"].get<std::string>().empty());
}

TEST(Cli, CommittedSessionReplaysIdentically) {
  auto r = run("replay " + quote(fixtures::session_path().string()) + " " + quote(fixtures::transcript_path().string()) +
               " " + scripted_args());
  ASSERT_EQ(r.status, 0) << r.out << r.err;
  EXPECT_EQ(json::parse(r.out)["status"], "identical");
}

TEST(Cli, ErrorsAreApiErrorJson) {
  auto r = run("ingest /nonexistent/file.csv");
  EXPECT_EQ(r.status, 1);
  auto j = json::parse(r.err);
  EXPECT_TRUE(j.contains("code"));
  EXPECT_TRUE(j.contains("message"));

  r = run("retrieve --statement x --stance sideways --out /tmp/x.json");
  EXPECT_EQ(r.status, 2);
  EXPECT_EQ(json::parse(r.err)["code"], "BAD_REQUEST");

  r = run("retrieve --statement x --replay a --record b --out /tmp/x.json");
  EXPECT_EQ(r.status, 2);
}
