#include <algorithm>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "factscope/error.hpp"
#include "factscope/retrieval_tree.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace factscope;

namespace {

RankedFact ranked(double relevance, Stance label, double prob = 0.6) {
  RankedFact f;
  f.relevance = relevance;
  f.evaluation.predicted_label = label;
  f.evaluation.support_prob = label == Stance::support ? prob : 1 - prob;
  f.evaluation.oppose_prob = 1 - f.evaluation.support_prob;
  f.fact.description = "fact " + std::to_string(relevance);
  return f;
}

RetrievalTree root_only() {
  RetrievalTree t;
  t.session_id = "s1";
  t.statement = "statement";
  RetrievalNode root;
  root.id = "n0";
  root.query = t.statement;
  t.nodes.push_back(root);
  return t;
}

RetrievalNode& add_child(RetrievalTree& t, const std::string& parent, Stance s) {
  RetrievalNode n;
  n.id = t.next_node_id();
  n.parent = parent;
  n.stance = s;
  n.query = "q" + n.id;
  t.at(parent).children.push_back(n.id);
  t.nodes.push_back(n);
  return t.nodes.back();
}

RetrievalTree random_tree(std::mt19937_64& rng) {
  RetrievalTree t = root_only();
  const std::size_t n = 1 + rng() % 12;
  for (std::size_t i = 0; i < n; ++i) {
    const std::string parent = t.nodes[rng() % t.nodes.size()].id;
    auto& c = add_child(t, parent, rng() % 2 ? Stance::support : Stance::oppose);
    const std::size_t k = rng() % 7;
    for (std::size_t j = 0; j < k; ++j) {
      c.facts.push_back(ranked(static_cast<double>(rng() % 21) / 20.0, rng() % 2 ? Stance::support : Stance::oppose));
    }
  }
  return t;
}

}  // namespace

TEST(RankOrder, Example) {
  std::vector<RankItem> items = {{0.4, Stance::support}, {0.9, Stance::oppose}, {0.7, Stance::support}};
  EXPECT_EQ(rank_order(items, Stance::support), (std::vector<std::size_t>{2, 0, 1}));
  EXPECT_EQ(rank_order(items, Stance::oppose), (std::vector<std::size_t>{1, 2, 0}));
}

TEST(RankOrder, AllMatchingIsRelevanceSort) {
  std::vector<RankItem> items = {{0.1, Stance::oppose}, {0.5, Stance::oppose}, {0.5, Stance::oppose}, {0.3, Stance::oppose}};
  EXPECT_EQ(rank_order(items, Stance::oppose), (std::vector<std::size_t>{1, 2, 3, 0}));
}

TEST(RankOrder, RandomInputsObeyLaws) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<RankItem> items(rng() % 10);
    for (auto& it : items) it = {static_cast<double>(rng() % 11) / 10.0, rng() % 2 ? Stance::support : Stance::oppose};
    const Stance input = rng() % 2 ? Stance::support : Stance::oppose;
    auto order = rank_order(items, input);
    // independent re-sort
    std::vector<std::size_t> expect(items.size());
    std::iota(expect.begin(), expect.end(), 0);
    std::stable_sort(expect.begin(), expect.end(), [&](std::size_t a, std::size_t b) {
      const bool ma = items[a].label == input, mb = items[b].label == input;
      if (ma != mb) return ma;
      return items[a].relevance > items[b].relevance;
    });
    EXPECT_EQ(order, expect);
  }
}

TEST(RankFacts, ReordersFacts) {
  std::vector<RankedFact> facts = {ranked(0.4, Stance::support), ranked(0.9, Stance::oppose),
                                   ranked(0.7, Stance::support)};
  rank_facts(facts, Stance::support);
  EXPECT_EQ(facts[0].relevance, 0.7);
  EXPECT_EQ(facts[1].relevance, 0.4);
  EXPECT_EQ(facts[2].relevance, 0.9);
}

TEST(NodeScore, TopRankedFact) {
  RetrievalNode n;
  EXPECT_EQ(node_score(n).relevance, 0.0);
  EXPECT_FALSE(node_score(n).stance_label);
  EXPECT_EQ(node_score(n).stance_prob, 0.0);
  n.stance = Stance::support;
  n.facts = {ranked(0.82, Stance::support, 0.76), ranked(0.9, Stance::oppose)};
  auto s = node_score(n);
  EXPECT_EQ(s.relevance, 0.82);
  EXPECT_EQ(s.stance_label, Stance::support);
  EXPECT_DOUBLE_EQ(s.stance_prob, 0.76);
  refresh_score(n);
  EXPECT_EQ(n.node_relevance, 0.82);
}

TEST(NodeScore, MaxOfMatchingGroupAfterRanking) {
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 300; ++trial) {
    RetrievalNode n;
    n.stance = rng() % 2 ? Stance::support : Stance::oppose;
    const std::size_t k = 1 + rng() % 6;
    for (std::size_t i = 0; i < k; ++i) {
      n.facts.push_back(ranked(static_cast<double>(rng() % 100) / 100.0, rng() % 2 ? Stance::support : Stance::oppose));
    }
    double best = -1;
    for (const auto& f : n.facts) {
      if (f.evaluation.predicted_label == *n.stance) best = std::max(best, f.relevance);
    }
    rank_facts(n.facts, *n.stance);
    if (best >= 0) EXPECT_EQ(node_score(n).relevance, best);
  }
}

TEST(Reward, Examples) {
  auto t = root_only();
  EXPECT_EQ(session_reward(t), 0u);
  auto& c = add_child(t, "n0", Stance::support);
  c.facts = {ranked(0.8, Stance::support), ranked(0.3, Stance::support), ranked(0.9, Stance::oppose)};
  EXPECT_EQ(session_reward(t, 0.5), 1u);
  EXPECT_EQ(session_reward(t, 0.8), 1u);
  EXPECT_EQ(session_reward(t, 0.3), 2u);
}

TEST(Reward, MatchesFlatScanAndIsMonotone) {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 200; ++trial) {
    auto t = random_tree(rng);
    std::size_t prev = 0;
    for (double thr = 1.0; thr >= -1e-9; thr -= 0.05) {
      const auto r = session_reward(t, thr);
      EXPECT_EQ(r, oracle::reward(t, thr));
      EXPECT_GE(r, prev);
      prev = r;
    }
  }
}

TEST(CheckTree, Violations) {
  auto t = root_only();
  add_child(t, "n0", Stance::support);
  EXPECT_NO_THROW(check_tree(t));

  auto dup = t;
  dup.nodes[1].id = "n0";
  EXPECT_THROW(check_tree(dup), Error);

  auto orphan = t;
  orphan.nodes[0].children.clear();
  EXPECT_THROW(check_tree(orphan), Error);

  auto cyc = t;
  cyc.nodes[1].children.push_back("n0");
  EXPECT_THROW(check_tree(cyc), Error);

  try {
    t.at("n9");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UNKNOWN_NODE);
  }
}

TEST(SessionBlob, FixtureRoundTrip) {
  const std::string blob = fixtures::read_file(fixtures::session_path());
  auto t = load_session(blob);
  EXPECT_GE(t.nodes.size(), 10u);
  EXPECT_EQ(save_session(t), blob);
  EXPECT_EQ(to_json(load_session(save_session(t))), to_json(t));
}

TEST(SessionBlob, CorruptBlobsRejected) {
  const std::string blob = fixtures::read_file(fixtures::session_path());
  auto code = [](std::string_view b) {
    try {
      load_session(b);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::INTERNAL;
  };
  EXPECT_EQ(code(blob.substr(0, blob.size() / 2)), ErrorCode::CORRUPT_BLOB);
  EXPECT_EQ(code("[]"), ErrorCode::CORRUPT_BLOB);

  auto j = nlohmann::json::parse(blob);
  j["version"] = 2;
  EXPECT_EQ(code(j.dump()), ErrorCode::CORRUPT_BLOB);

  j = nlohmann::json::parse(blob);
  j["body"]["statement"] = "tampered";
  EXPECT_EQ(code(j.dump()), ErrorCode::CORRUPT_BLOB);
}
