#include "factscope/agent.hpp"

#include "factscope/error.hpp"
#include "factscope/sql.hpp"

namespace factscope {

Agent::Agent(const DatasetStore& store, Embedder& embedder, LlmGateway& gateway, AgentOptions options)
    : store_(store), embedder_(embedder), gateway_(gateway), options_(options) {}

std::shared_ptr<const FieldIndex> Agent::field_index() {
  std::vector<std::string> ids;
  for (const auto& d : store_.datasets()) ids.push_back(d->id);
  std::lock_guard lock(index_mutex_);
  if (!index_ || ids != indexed_ids_) {
    index_ = std::make_shared<const FieldIndex>(embedder_, store_);
    indexed_ids_ = std::move(ids);
  }
  return index_;
}

namespace {

bool is_hard(const Error& e) { return e.code() == ErrorCode::REPLAY_MISS; }

std::string describe(const Error& e) { return std::string(to_string(e.code())) + ": " + e.what(); }

}  // namespace

std::vector<RetrievalNode> Agent::build_children(std::string_view statement, std::string_view query, Stance stance) {
  const auto subqueries = gateway_.decompose_query(statement, query, stance);
  std::vector<RetrievalNode> children;
  for (const auto& sq : subqueries) {
    RetrievalNode child;
    child.stance = stance;
    child.query = sq.text;
    child.direction = sq.direction;
    populate(child, statement);
    children.push_back(std::move(child));
  }
  return children;
}

void Agent::search(RetrievalNode& node) {
  std::vector<FieldMatch> matches;
  try {
    matches = field_index()->top_k(node.query, options_.top_k, options_.similarity_floor);
  } catch (const Error& e) {
    if (is_hard(e)) throw;
    node.notes.push_back("field search failed: " + describe(e));
    return;
  }
  if (matches.empty()) {
    node.notes.push_back("no data field reaches the similarity floor");
    return;
  }
  for (const auto& dataset_id : candidate_datasets(matches)) {
    auto dataset = store_.find(dataset_id);
    if (!dataset) continue;
    const DatasetSummary summary = summarize(*dataset, options_.sample_rows);
    const auto series = series_names(*dataset, options_.series_hint_limit);
    std::optional<std::string> feedback;
    std::optional<SubTable> table;
    std::string last_problem;
    for (int round = 0; round <= options_.sql_repair_rounds && !table; ++round) {
      std::string query_text;
      try {
        query_text = gateway_.generate_sql(node.query, summary, series, feedback);
      } catch (const Error& e) {
        if (is_hard(e)) throw;
        last_problem = describe(e);
        break;
      }
      const auto report = sql::validate_query(query_text, *dataset);
      if (report.ok) {
        try {
          table = sql::execute_query(query_text, *dataset);
          break;
        } catch (const Error& e) {
          last_problem = describe(e);
        }
      } else {
        last_problem = report.summary();
      }
      feedback = "The previous SQL query was:\n" + query_text + "\nIt was rejected with these errors:\n" +
                 last_problem + "\nReturn a corrected SQL query.";
    }
    if (!table) {
      node.notes.push_back("dataset " + dataset_id + ": no usable SQL (" + last_problem + ")");
      continue;
    }
    if (table->rows.empty()) {
      node.notes.push_back("dataset " + dataset_id + ": query returned no rows");
      continue;
    }
    node.sources.push_back(std::move(*table));
    node.source_provenance.push_back(dataset->provenance);
  }
}

void Agent::extract(RetrievalNode& node, std::string_view statement, std::vector<RankedFact>& out) {
  for (std::size_t s = 0; s < node.sources.size(); ++s) {
    const SubTable& table = node.sources[s];
    ExtractedFacts extracted;
    try {
      extracted = gateway_.extract_facts(table, statement, node.query, *node.stance);
    } catch (const Error& e) {
      if (is_hard(e)) throw;
      node.notes.push_back("sub-table " + std::to_string(s) + ": extraction failed: " + describe(e));
      continue;
    }
    for (const auto& d : extracted.dropped) node.notes.push_back("sub-table " + std::to_string(s) + ": " + d);
    for (const auto& fact : extracted.facts) {
      const auto report = validate_fact(fact, table);
      if (!report.ok) {
        std::string why;
        for (const auto& v : report.violations) why += (why.empty() ? "" : "; ") + std::string(to_string(v.rule));
        node.notes.push_back("sub-table " + std::to_string(s) + ": fact rejected (" + why + ")");
        continue;
      }
      RankedFact rf;
      rf.fact = fact;
      rf.source = s;
      try {
        rf.result = compute_fact(fact, table);
      } catch (const Error& e) {
        node.notes.push_back("sub-table " + std::to_string(s) + ": fact not computable (" + describe(e) + ")");
        continue;
      }
      rf.consistency = check_description(rf.result, fact.description);
      rf.relevance = relevance(embedder_, fact.description, statement, node.query);
      out.push_back(std::move(rf));
    }
  }
}

void Agent::populate(RetrievalNode& node, std::string_view statement) {
  if (!node.stance) throw Error(ErrorCode::INVALID_ARGUMENT, "the root holds no facts");
  node.facts.clear();
  node.sources.clear();
  node.source_provenance.clear();
  node.notes.clear();

  search(node);
  std::vector<RankedFact> facts;
  extract(node, statement, facts);

  if (!facts.empty()) {
    std::vector<DataFact> plain;
    for (const auto& f : facts) plain.push_back(f.fact);
    std::vector<FactEvaluation> evals;
    try {
      evals = gateway_.evaluate_facts(plain, statement);
    } catch (const Error& e) {
      if (is_hard(e)) throw;
      node.notes.push_back("evaluation failed: " + describe(e));
      for (std::size_t i = 0; i < facts.size(); ++i) evals.push_back(default_evaluation(i, "evaluation unavailable"));
    }
    for (std::size_t i = 0; i < facts.size(); ++i) facts[i].evaluation = evals[i];
    rank_facts(facts, *node.stance);
  }
  node.facts = std::move(facts);
  refresh_score(node);
  if (node.facts.empty()) node.status = NodeStatus::empty;
  else if (node.status == NodeStatus::empty) node.status = node.children.empty() ? NodeStatus::fresh : NodeStatus::expanded;
}

PlanRecommendation Agent::plan(const std::vector<const RetrievalNode*>& children, std::string_view statement,
                               Stance stance) {
  std::vector<PlanCandidate> candidates;
  for (std::size_t i = 0; i < children.size(); ++i) {
    PlanCandidate c;
    c.index = i;
    c.query = children[i]->query;
    c.node_relevance = children[i]->node_relevance;
    for (const auto& f : children[i]->facts) {
      c.facts.push_back({f.fact.description, f.evaluation.predicted_label, f.relevance});
    }
    candidates.push_back(std::move(c));
  }
  return gateway_.plan(candidates, statement, stance);
}

}  // namespace factscope
