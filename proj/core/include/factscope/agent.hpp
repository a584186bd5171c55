#pragma once

#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "factscope/dataset_store.hpp"
#include "factscope/embedding.hpp"
#include "factscope/llm_gateway.hpp"
#include "factscope/retrieval_tree.hpp"

namespace factscope {

struct AgentOptions {
  std::size_t top_k = 3;
  double similarity_floor = 0.1;
  int sql_repair_rounds = 2;
  std::size_t sample_rows = 5;
  std::size_t series_hint_limit = 20;
};

// One expansion step of the agent: decompose, search, extract, evaluate,
// rank, plan. Holds no session state.
class Agent {
 public:
  Agent(const DatasetStore& store, Embedder& embedder, LlmGateway& gateway, AgentOptions options = {});

  // Children for expanding a node whose query is `query`; ids, parents and
  // recommendation are left to the caller. Throws when decomposition fails.
  std::vector<RetrievalNode> build_children(std::string_view statement, std::string_view query, Stance stance);

  // Re-runs search and extraction for node.query with node.stance, replacing
  // facts, sources and notes. Degrades to an empty node instead of throwing,
  // except for REPLAY_MISS.
  void populate(RetrievalNode& node, std::string_view statement);

  PlanRecommendation plan(const std::vector<const RetrievalNode*>& children, std::string_view statement,
                          Stance stance);

  const AgentOptions& options() const { return options_; }
  Embedder& embedder() { return embedder_; }

 private:
  std::shared_ptr<const FieldIndex> field_index();
  void search(RetrievalNode& node);
  void extract(RetrievalNode& node, std::string_view statement, std::vector<RankedFact>& out);

  const DatasetStore& store_;
  Embedder& embedder_;
  LlmGateway& gateway_;
  AgentOptions options_;
  std::mutex index_mutex_;
  std::shared_ptr<const FieldIndex> index_;
  std::vector<std::string> indexed_ids_;
};

}  // namespace factscope
