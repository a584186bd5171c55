#include <thread>

#include <gtest/gtest.h>
#include <httplib.h>

#include "factscope/service.hpp"
#include "fixtures.hpp"

using namespace factscope;
using nlohmann::json;

namespace {

std::string first_node_with_facts(const json& tree) {
  for (const auto& n : tree["nodes"]) {
    if (n["fact_count"].get<int>() > 0 && !n["parent"].is_null()) return n["id"];
  }
  return "";
}

class ServiceTest : public ::testing::Test {
 protected:
  void SetUp() override {
    runtime = fixtures::scripted_runtime();
    service = std::make_unique<Service>(*runtime);
  }
  ApiResponse call(std::string_view method, std::string_view path, const json& body = nullptr) {
    return service->dispatch(method, path, body.is_null() ? "" : body.dump());
  }
  std::unique_ptr<Runtime> runtime;
  std::unique_ptr<Service> service;
};

}  // namespace

TEST(HttpStatus, Mapping) {
  EXPECT_EQ(http_status(ErrorCode::INVALID_FACT), 400);
  EXPECT_EQ(http_status(ErrorCode::BAD_REQUEST), 400);
  EXPECT_EQ(http_status(ErrorCode::UNKNOWN_NODE), 404);
  EXPECT_EQ(http_status(ErrorCode::UNKNOWN_SESSION), 404);
  EXPECT_EQ(http_status(ErrorCode::NODE_BUSY), 409);
  EXPECT_EQ(http_status(ErrorCode::LLM_UNAVAILABLE), 502);
  EXPECT_EQ(http_status(ErrorCode::PROVIDER_UNAVAILABLE), 502);
  EXPECT_EQ(http_status(ErrorCode::INTERNAL), 500);
}

TEST_F(ServiceTest, DatasetsListedAndUploaded) {
  auto r = call("GET", "/v1/datasets");
  ASSERT_EQ(r.status, 200);
  EXPECT_EQ(r.body["datasets"].size(), fixtures::sample_csvs().size());
  r = call("POST", "/v1/datasets", {{"name", "tiny"}, {"csv", "country,year,value\nA,2020,1\nA,2021,2\n"}});
  ASSERT_EQ(r.status, 201);
  EXPECT_EQ(r.body["id"], "tiny");
  EXPECT_EQ(r.body["rows"], 2);
  r = call("POST", "/v1/datasets", {{"name", "bad"}, {"csv", ""}});
  EXPECT_EQ(r.status, 400);
  EXPECT_EQ(r.body["code"], "EMPTY_SOURCE");
}

TEST_F(ServiceTest, SessionLifecycle) {
  auto r = call("POST", "/v1/sessions", {{"statement", fixtures::kStatement}});
  ASSERT_EQ(r.status, 201) << r.body.dump();
  const std::string sid = r.body["session_id"];
  r = call("GET", "/v1/sessions/" + sid + "/tree");
  ASSERT_EQ(r.status, 200);
  const json tree = r.body;
  ASSERT_EQ(tree["nodes"].size(), 7u);
  int support = 0;
  for (const auto& n : tree["nodes"]) {
    if (n["parent"] == "n0" && n["stance"] == "support") ++support;
  }
  EXPECT_EQ(support, 3);
  EXPECT_EQ(call("GET", "/v1/sessions/" + sid + "/tree").body, tree);  // side-effect free

  const std::string nid = first_node_with_facts(tree);
  ASSERT_FALSE(nid.empty());
  r = call("GET", "/v1/sessions/" + sid + "/nodes/" + nid + "/facts");
  ASSERT_EQ(r.status, 200);
  ASSERT_FALSE(r.body["facts"].empty());
  for (const auto& f : r.body["facts"]) {
    EXPECT_TRUE(f.contains("result"));
    EXPECT_TRUE(f.contains("evaluation"));
    EXPECT_TRUE(f.contains("subtable"));
    EXPECT_FALSE(f["chart"]["source"].get<std::string>().empty());
  }

  r = call("PUT", "/v1/sessions/" + sid + "/nodes/" + nid + "/facts/0",
           {{"fact", {{"type", "trend"}, {"breakdown", {"country"}}}}});
  EXPECT_EQ(r.status, 400);
  EXPECT_EQ(r.body["code"], "INVALID_FACT");
  EXPECT_NE(r.body["detail"].dump().find("TREND_NEEDS_TEMPORAL"), std::string::npos);

  r = call("POST", "/v1/sessions/" + sid + "/nodes/" + nid + "/expand", {{"stance", "oppose"}});
  ASSERT_EQ(r.status, 200) << r.body.dump();
  EXPECT_EQ(r.body["child_ids"].size(), 3u);

  r = call("POST", "/v1/sessions/" + sid + "/story", {{"refs", {{{"node_id", nid}, {"fact_index", 0}}}}});
  ASSERT_EQ(r.status, 200);
  EXPECT_EQ(call("GET", "/v1/sessions/" + sid + "/story").body, r.body);
  EXPECT_EQ(r.body["story"][0]["node_id"], nid);

  r = call("GET", "/v1/sessions/" + sid + "/reward");
  EXPECT_EQ(r.status, 200);
  r = call("GET", "/v1/sessions/" + sid + "/blob");
  EXPECT_EQ(r.body["format"], "factscope-session");
  EXPECT_EQ(call("GET", "/v1/sessions").body["sessions"], json::array({sid}));
}

TEST_F(ServiceTest, ReRetrieveThroughQueryEndpoint) {
  const std::string sid = call("POST", "/v1/sessions", {{"statement", fixtures::kStatement}}).body["session_id"];
  auto r = call("PUT", "/v1/sessions/" + sid + "/nodes/n1/query", {{"query", "Gini index by country"}});
  ASSERT_EQ(r.status, 200) << r.body.dump();
  EXPECT_EQ(r.body["id"], "n1");
  EXPECT_EQ(r.body["query"], "Gini index by country");
  auto facts = call("GET", "/v1/sessions/" + sid + "/nodes/n1/facts").body;
  EXPECT_EQ(facts["query"], "Gini index by country");
}

TEST_F(ServiceTest, ErrorsAreApiErrors) {
  auto check = [&](const ApiResponse& r, int status, const std::string& code) {
    EXPECT_EQ(r.status, status) << r.body.dump();
    EXPECT_EQ(r.body["code"], code);
    EXPECT_TRUE(r.body.contains("message"));
  };
  check(call("GET", "/v1/nowhere"), 404, "NOT_FOUND");
  check(call("GET", "/v1/sessions/s9/tree"), 404, "UNKNOWN_SESSION");
  check(service->dispatch("POST", "/v1/sessions", "{not json"), 400, "BAD_REQUEST");
  check(call("POST", "/v1/sessions", {{"statement", 3}}), 400, "BAD_REQUEST");
  check(call("POST", "/v1/sessions", {{"statement", " "}}), 400, "EMPTY_STATEMENT");
  const std::string sid = call("POST", "/v1/sessions", {{"statement", fixtures::kStatement}}).body["session_id"];
  check(call("GET", "/v1/sessions/" + sid + "/nodes/n77/facts"), 404, "UNKNOWN_NODE");
  check(call("POST", "/v1/sessions/" + sid + "/nodes/n1/expand", {{"stance", "neutral"}}), 400, "BAD_REQUEST");
}

TEST_F(ServiceTest, HttpRoundTrip) {
  ASSERT_TRUE(service->bind("127.0.0.1", 0));
  std::thread server([&] { service->serve(); });
  httplib::Client client("127.0.0.1", service->port());
  client.set_read_timeout(120, 0);
  for (int i = 0; i < 100 && !client.Get("/v1/health"); ++i) std::this_thread::sleep_for(std::chrono::milliseconds(20));

  auto res = client.Get("/v1/health");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(json::parse(res->body)["status"], "ok");

  res = client.Post("/v1/sessions", json{{"statement", fixtures::kStatement}}.dump(), "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 201);
  EXPECT_EQ(json::parse(res->body)["nodes"].size(), 7u);
  EXPECT_EQ(res->get_header_value("Content-Type"), "application/json");

  res = client.Get("/v1/sessions/s42/tree");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 404);
  EXPECT_EQ(json::parse(res->body)["code"], "UNKNOWN_SESSION");

  service->stop();
  server.join();
}
