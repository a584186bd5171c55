#pragma once

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "factscope/dataset_store.hpp"
#include "factscope/fact_model.hpp"
#include "factscope/llm_backend.hpp"
#include "factscope/prompts.hpp"

namespace factscope {

// First balanced JSON object ('{') or array ('[') in `text`, skipping braces
// inside strings. `open` = 0 accepts whichever comes first.
std::optional<std::string_view> first_json(std::string_view text, char open = 0);

// Removes markdown code fences, surrounding blanks and a trailing semicolon.
std::string strip_sql(std::string_view response);

struct SubQuery {
  std::string text;
  std::string direction;  // at most 3 words
  Stance stance = Stance::support;
};
nlohmann::json to_json(const SubQuery& q);
SubQuery subquery_from_json(const nlohmann::json& j);

struct ExtractedFacts {
  std::vector<DataFact> facts;        // at most 3
  std::vector<std::string> dropped;   // one reason per rejected candidate
};

struct FactEvaluation {
  std::size_t fact_index = 0;
  double support_prob = 0.5;
  double oppose_prob = 0.5;
  Stance predicted_label = Stance::support;
  std::string explanation;
  bool tie = false;        // equal probabilities, label defaulted to support
  bool defaulted = false;  // no usable verdict in the response

  bool operator==(const FactEvaluation&) const = default;
};
nlohmann::json to_json(const FactEvaluation& e);
FactEvaluation evaluation_from_json(const nlohmann::json& j);

// Normalises a raw (support, oppose) pair. Returns nullopt when both are zero
// or either is negative or non-finite.
std::optional<FactEvaluation> make_evaluation(std::size_t index, double support, double oppose,
                                              std::string explanation);
FactEvaluation default_evaluation(std::size_t index, std::string reason);

struct PlanFact {
  std::string description;
  Stance stance = Stance::support;
  double relevance = 0.0;
};

struct PlanCandidate {
  std::size_t index = 0;
  std::string query;
  std::vector<PlanFact> facts;
  double node_relevance = 0.0;  // score used by the fallback
};

struct PlanRecommendation {
  std::string reasoning;
  std::size_t recommend_index = 0;
  bool fallback = false;
  std::string fallback_reason;
};
nlohmann::json to_json(const PlanRecommendation& p);
PlanRecommendation plan_from_json(const nlohmann::json& j);

// Highest node_relevance, earliest candidate on ties.
std::size_t fallback_index(const std::vector<PlanCandidate>& candidates);

inline constexpr int kRepairBudget = 2;
inline constexpr std::size_t kFactsPerTable = 3;
inline constexpr std::size_t kSubQueriesPerExpansion = 3;

class LlmGateway {
 public:
  explicit LlmGateway(std::shared_ptr<LlmBackend> backend, int repair_budget = kRepairBudget);

  // Exactly three sub-queries tagged with `stance`. Throws LLM_UNAVAILABLE, or
  // MALFORMED_RESPONSE once the repair budget is spent.
  std::vector<SubQuery> decompose_query(std::string_view statement, std::string_view query, Stance stance);

  // SQL text with fences stripped. `feedback` carries the previous attempt and
  // its validator errors when the orchestrator asks for a repair.
  // Throws LLM_UNAVAILABLE or EMPTY_RESPONSE.
  std::string generate_sql(std::string_view subquery, const DatasetSummary& table,
                           const std::vector<std::string>& relevant_series,
                           std::optional<std::string> feedback = std::nullopt);

  // Up to three parse-valid facts; bad candidates are dropped, not fatal.
  // Throws LLM_UNAVAILABLE only.
  ExtractedFacts extract_facts(const SubTable& table, std::string_view statement, std::string_view query,
                               Stance stance);

  // One evaluation per fact, in input order.
  std::vector<FactEvaluation> evaluate_facts(const std::vector<DataFact>& facts, std::string_view statement);

  // Never throws for provider or format failures; falls back instead.
  PlanRecommendation plan(const std::vector<PlanCandidate>& candidates, std::string_view statement, Stance stance);

  LlmBackend& backend() { return *backend_; }

 private:
  template <typename Parse>
  auto call_with_repair(PromptKind kind, const std::string& prompt, Parse parse);

  std::shared_ptr<LlmBackend> backend_;
  int repair_budget_;
};

// Prompt-facing renderings, exposed for golden tests.
std::string render_table_columns(const DatasetSummary& table);
std::string render_table_values(const DatasetSummary& table);
std::string render_subtable(const SubTable& table);
std::string render_facts_for_evaluation(const std::vector<DataFact>& facts);
std::string render_plan_candidates(const std::vector<PlanCandidate>& candidates);

}  // namespace factscope
