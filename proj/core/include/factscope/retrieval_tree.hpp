#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "factscope/dataset_store.hpp"
#include "factscope/fact_engine.hpp"
#include "factscope/fact_model.hpp"
#include "factscope/llm_gateway.hpp"

namespace factscope {

enum class NodeStatus { fresh, expanded, empty };
std::string_view to_string(NodeStatus s);

struct RankedFact {
  DataFact fact;
  FactResult result;
  FactEvaluation evaluation;
  double relevance = 0.0;
  std::size_t source = 0;  // index into RetrievalNode::sources
  ConsistencyReport consistency;
};

struct RetrievalNode {
  std::string id;
  std::optional<std::string> parent;
  std::optional<Stance> stance;  // none for the root
  std::string query;
  std::string direction;
  std::vector<RankedFact> facts;
  std::vector<SubTable> sources;
  std::vector<std::string> source_provenance;  // aligned with sources
  std::vector<std::string> notes;  // why candidates were dropped, provider failures
  std::vector<std::string> children;
  double node_relevance = 0.0;
  double node_stance_prob = 0.0;
  bool recommended = false;
  NodeStatus status = NodeStatus::fresh;
};

struct NodeScore {
  double relevance = 0.0;
  std::optional<Stance> stance_label;
  double stance_prob = 0.0;
};

struct ExpansionAction {
  std::string node_id;
  Stance stance = Stance::support;
  std::uint64_t timestamp = 0;  // logical step
};

struct ExpansionObservation {
  std::vector<std::string> child_ids;
  Stance stance = Stance::support;
  std::string statement;
};
nlohmann::json to_json(const ExpansionObservation& o);

struct Event {
  std::uint64_t step = 0;
  std::string type;  // create, expand, observe, plan, re_retrieve, edit_fact, story
  nlohmann::json payload;
};

struct StoryRef {
  std::string node_id;
  std::size_t fact_index = 0;
  nlohmann::json snapshot;  // the fact as it was when selected

  bool operator==(const StoryRef&) const = default;
};

inline constexpr std::string_view kPlanningGoal =
    "Recommend the new child node most likely to yield further relevant facts with the desired stance.";

struct RetrievalTree {
  std::string session_id;
  std::string statement;
  std::vector<RetrievalNode> nodes;  // creation order; nodes[0] is the root
  std::optional<std::string> recommended_node;
  std::vector<Event> event_log;
  std::vector<StoryRef> story;
  std::string transcript_ref;
  std::string config_digest;
  std::uint64_t next_step = 0;

  const RetrievalNode& root() const { return nodes.front(); }
  RetrievalNode* find(std::string_view id);
  const RetrievalNode* find(std::string_view id) const;
  const RetrievalNode& at(std::string_view id) const;  // throws UNKNOWN_NODE
  RetrievalNode& at(std::string_view id);
  std::string next_node_id() const { return "n" + std::to_string(nodes.size()); }
  void log(std::string type, nlohmann::json payload);
};

struct RankItem {
  double relevance = 0.0;
  Stance label = Stance::support;
};

// Indices of `items`: those labelled `input_stance` first, then the rest; each
// group by relevance descending, ties by index.
std::vector<std::size_t> rank_order(const std::vector<RankItem>& items, Stance input_stance);
void rank_facts(std::vector<RankedFact>& facts, Stance input_stance);

NodeScore node_score(const RetrievalNode& node);
// Copies node_score into node_relevance/node_stance_prob.
void refresh_score(RetrievalNode& node);

// Facts with relevance >= threshold whose predicted label equals their node's stance.
std::size_t session_reward(const RetrievalTree& tree, double relevance_threshold = 0.5);

// Single root, unique ids, parent/child links consistent, everything reachable.
// Throws CORRUPT_BLOB describing the first violation.
void check_tree(const RetrievalTree& tree);

// Fact with its result, chart, evaluation and source sub-table.
nlohmann::json to_json(const RankedFact& f, const RetrievalNode& owner);
nlohmann::json to_json(const RetrievalNode& n);
// Node without facts and sources, plus its score; used by the tree view.
nlohmann::json node_summary_json(const RetrievalNode& n);
nlohmann::json to_json(const RetrievalTree& t);

inline constexpr int kSessionBlobVersion = 1;

// Versioned JSON with a sha256 digest over the canonical body.
std::string save_session(const RetrievalTree& t);
// Recomputes every fact result from its stored sub-table. Throws CORRUPT_BLOB.
RetrievalTree load_session(std::string_view blob);

}  // namespace factscope
