#include <atomic>
#include <condition_variable>
#include <future>
#include <mutex>

#include <gtest/gtest.h>

#include "factscope/error.hpp"
#include "factscope/session.hpp"

using namespace factscope;

namespace {

const std::string kFact =
    R"(Generated Data Fact: {"type": "trend", "subspace": [{"field": "country", "value": "World"}], "breakdown": ["year"], "measure": [{"field": "value", "aggregate": "none"}], "focus": [], "description": "World GDP per capita rose."})";

// Small world with one dataset and a programmable model.
struct Harness {
  DatasetStore store;
  Embedder embedder{std::make_shared<MockEmbeddingProvider>()};
  std::function<std::string(PromptKind, const std::string&)> respond;
  LlmGateway gateway{std::make_shared<FunctionBackend>(
      [this](PromptKind k, const std::string& p) { return respond(k, p); })};
  Agent agent{store, embedder, gateway};
  std::atomic<int> sql_calls{0};
  double support = 0.7;

  Harness() {
    RawTable raw{{"country", "year", "value"}, {}};
    for (int y = 2012; y <= 2021; ++y) raw.rows.push_back({"World", std::to_string(y), std::to_string(10000 + 150 * (y - 2012))});
    store.ingest(raw, "gdp", "test data");
    respond = [this](PromptKind k, const std::string& p) { return standard(k, p); };
  }

  std::string standard(PromptKind k, const std::string& p) {
    switch (k) {
      case PromptKind::decompose:
        return R"({"queryList": ["world gdp per capita level", "broken world gdp per capita", "world gdp per capita growth"],
                  "directionList": ["GDP level", "Broken search", "GDP growth"]})";
      case PromptKind::text2sql:
        ++sql_calls;
        if (p.find("broken world gdp") != std::string::npos) return "SELECT ghost FROM gdp LIMIT 10";
        return "SELECT country, year, value FROM gdp WHERE country = 'World' ORDER BY year LIMIT 10";
      case PromptKind::extract: return kFact;
      case PromptKind::evaluate:
        return "[{\"index\": 0, \"support\": " + std::to_string(support) + ", \"oppose\": " + std::to_string(1 - support) +
               "}]";
      case PromptKind::plan: return R"({"Reasoning": "r", "Recommend Index": 2})";
    }
    return "";
  }
};

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::INTERNAL;
}

}  // namespace

TEST(Session, CreateBuildsRootAndSixChildren) {
  Harness h;
  auto s = Session::create("s1", "Global income inequality is widening", h.agent);
  auto t = s->snapshot();
  ASSERT_EQ(t.nodes.size(), 7u);
  EXPECT_FALSE(t.root().stance);
  ASSERT_EQ(t.root().children.size(), 6u);
  int support = 0, oppose = 0;
  for (const auto& id : t.root().children) {
    const auto& n = t.at(id);
    EXPECT_EQ(*n.parent, "n0");
    (*n.stance == Stance::support ? support : oppose)++;
  }
  EXPECT_EQ(support, 3);
  EXPECT_EQ(oppose, 3);
  EXPECT_TRUE(t.recommended_node);
  EXPECT_NO_THROW(check_tree(t));
}

TEST(Session, EmptyStatementRejected) {
  Harness h;
  EXPECT_EQ(code_of([&] { Session::create("s1", "   ", h.agent); }), ErrorCode::EMPTY_STATEMENT);
}

TEST(Session, FailingSqlLeavesChildEmptyButRetained) {
  Harness h;
  auto s = Session::create("s1", "Global income inequality is widening", h.agent);
  const int before = h.sql_calls.load();
  auto obs = s->expand("n1", Stance::support);
  ASSERT_EQ(obs.child_ids.size(), 3u);
  // the broken sub-query is tried once plus two repairs
  EXPECT_EQ(h.sql_calls.load() - before, 2 + 3);
  auto t = s->snapshot();
  EXPECT_EQ(t.at(obs.child_ids[0]).status, NodeStatus::fresh);
  EXPECT_EQ(t.at(obs.child_ids[1]).status, NodeStatus::empty);
  EXPECT_TRUE(t.at(obs.child_ids[1]).facts.empty());
  EXPECT_FALSE(t.at(obs.child_ids[1]).notes.empty());
  EXPECT_EQ(t.at(obs.child_ids[1]).node_relevance, 0.0);
  EXPECT_EQ(t.at(obs.child_ids[2]).facts.size(), 1u);
  EXPECT_EQ(t.at("n1").status, NodeStatus::expanded);
  EXPECT_EQ(*t.recommended_node, obs.child_ids[2]);
  for (const auto& id : obs.child_ids) EXPECT_EQ(*t.at(id).stance, Stance::support);
}

TEST(Session, ContraryFactsAreRetained) {
  Harness h;
  h.support = 0.1;
  auto s = Session::create("s1", "Global income inequality is widening", h.agent);
  auto t = s->snapshot();
  const auto& n = t.at("n1");
  ASSERT_EQ(n.facts.size(), 1u);
  EXPECT_EQ(n.facts[0].evaluation.predicted_label, Stance::oppose);
  EXPECT_EQ(*n.stance, Stance::support);
  EXPECT_EQ(s->reward(0.0), 2u);  // populated oppose children only
}

TEST(Session, DecomposeFailureLeavesTreeUnchanged) {
  Harness h;
  auto s = Session::create("s1", "Global income inequality is widening", h.agent);
  const std::string before = s->save();
  h.respond = [](PromptKind, const std::string&) -> std::string { throw Error(ErrorCode::LLM_UNAVAILABLE, "down"); };
  EXPECT_EQ(code_of([&] { s->expand("n1", Stance::oppose); }), ErrorCode::LLM_UNAVAILABLE);
  EXPECT_EQ(s->save(), before);
  EXPECT_EQ(code_of([&] { s->expand("n99", Stance::oppose); }), ErrorCode::UNKNOWN_NODE);
}

TEST(Session, ConcurrentExpandOnSameNodeIsBusy) {
  Harness h;
  auto s = Session::create("s1", "Global income inequality is widening", h.agent);
  std::mutex m;
  std::condition_variable cv;
  bool entered = false, release = false;
  h.respond = [&](PromptKind k, const std::string& p) {
    if (k == PromptKind::decompose) {
      std::unique_lock lock(m);
      entered = true;
      cv.notify_all();
      cv.wait(lock, [&] { return release; });
    }
    return h.standard(k, p);
  };
  auto first = std::async(std::launch::async, [&] { return s->expand("n2", Stance::support); });
  {
    std::unique_lock lock(m);
    cv.wait(lock, [&] { return entered; });
  }
  EXPECT_EQ(code_of([&] { s->expand("n2", Stance::support); }), ErrorCode::NODE_BUSY);
  EXPECT_EQ(code_of([&] { s->re_retrieve("n2", "world gdp"); }), ErrorCode::NODE_BUSY);
  {
    std::lock_guard lock(m);
    release = true;
  }
  cv.notify_all();
  EXPECT_EQ(first.get().child_ids.size(), 3u);
  EXPECT_EQ(s->snapshot().at("n2").children.size(), 3u);
}

TEST(Session, ReRetrieveReplacesFactsKeepsId) {
  Harness h;
  auto s = Session::create("s1", "Global income inequality is widening", h.agent);
  s->expand("n1", Stance::support);
  auto node = s->re_retrieve("n2", "broken world gdp per capita");
  EXPECT_EQ(node.id, "n2");
  EXPECT_EQ(node.query, "broken world gdp per capita");
  EXPECT_EQ(node.status, NodeStatus::empty);
  node = s->re_retrieve("n1", "world gdp per capita again");
  EXPECT_EQ(node.facts.size(), 1u);
  EXPECT_EQ(node.children.size(), 3u);
  EXPECT_EQ(node.status, NodeStatus::expanded);
  node = s->re_retrieve("n1", "zebra giraffe");
  EXPECT_EQ(node.status, NodeStatus::empty);
  EXPECT_EQ(code_of([&] { s->re_retrieve("n0", "x"); }), ErrorCode::INVALID_ARGUMENT);
}

TEST(Session, EditFactRevalidates) {
  Harness h;
  auto s = Session::create("s1", "Global income inequality is widening", h.agent);
  try {
    s->edit_fact("n1", 0, {{"breakdown", {"country"}}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::INVALID_FACT);
    EXPECT_NE(e.detail().dump().find("TREND_NEEDS_TEMPORAL"), std::string::npos);
  }
  auto j = s->edit_fact("n1", 0, {{"type", "extreme"}, {"description", "The peak came in 2021."}});
  EXPECT_EQ(j["fact"]["fact"]["type"], "extreme");
  auto facts = s->snapshot().at("n1").facts;
  ASSERT_EQ(facts.size(), 1u);
  EXPECT_EQ(facts[0].fact.type, FactType::extreme);
  EXPECT_EQ(code_of([&] { s->edit_fact("n1", 5, nlohmann::json::object()); }), ErrorCode::NOT_FOUND);
}

TEST(Session, StoryKeepsSnapshots) {
  Harness h;
  auto s = Session::create("s1", "Global income inequality is widening", h.agent);
  auto story = s->add_to_story({{"n1", 0}, {"n4", 0}});
  ASSERT_EQ(story.size(), 2u);
  EXPECT_EQ(story[0].snapshot["fact"]["description"], "World GDP per capita rose.");
  EXPECT_EQ(s->story(), story);
  EXPECT_EQ(code_of([&] { s->add_to_story({{"n1", 3}}); }), ErrorCode::NOT_FOUND);
  EXPECT_EQ(s->story().size(), 2u);
}

TEST(Session, ReplayRebuildsIdenticalTree) {
  Harness h;
  auto s = Session::create("s1", "Global income inequality is widening", h.agent);
  s->expand("n3", Stance::oppose);
  s->re_retrieve("n7", "world gdp per capita level again");
  s->add_to_story({{"n1", 0}});
  const auto original = s->snapshot();
  auto rebuilt = replay_session(original, h.agent);
  EXPECT_EQ(save_session(rebuilt), save_session(original));
}

TEST(Session, FollowRecommendations) {
  Harness h;
  auto s = Session::create("s1", "Global income inequality is widening", h.agent);
  EXPECT_EQ(follow_recommendations(*s, 2), 2);
  EXPECT_EQ(s->snapshot().nodes.size(), 13u);
}

TEST(SessionManager, Ids) {
  Harness h;
  SessionManager m(h.agent);
  auto& a = m.create("first statement about gdp");
  auto& b = m.create("second statement about gdp");
  EXPECT_EQ(a.id(), "s1");
  EXPECT_EQ(b.id(), "s2");
  EXPECT_EQ(&m.get("s2"), &b);
  EXPECT_EQ(code_of([&] { m.get("s9"); }), ErrorCode::UNKNOWN_SESSION);
}
