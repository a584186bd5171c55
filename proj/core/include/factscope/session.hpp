#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "factscope/agent.hpp"
#include "factscope/retrieval_tree.hpp"

namespace factscope {

struct SessionOptions {
  // Stance used to plan the root's six children; nullopt plans over all six
  // with the support stance, otherwise over that stance's three.
  std::optional<Stance> root_plan_stance;
  std::string transcript_ref;
  std::string config_digest;
};

// One retrieval tree plus its locking. Mutations are serialised; readers see
// either the state before or after a whole expansion.
class Session {
 public:
  // Builds the root and runs the initial expansion for both stances.
  // Throws EMPTY_STATEMENT, or the decomposition error when one occurs.
  static std::unique_ptr<Session> create(std::string session_id, std::string_view statement, Agent& agent,
                                         SessionOptions options = {});
  Session(RetrievalTree tree, Agent& agent);

  // Throws NODE_BUSY while the node is being expanded or re-retrieved,
  // UNKNOWN_NODE, or the decomposition error (tree left unchanged).
  ExpansionObservation expand(const std::string& node_id, Stance stance);

  // Replaces a non-root node's query and re-runs its search. Children stay.
  RetrievalNode re_retrieve(const std::string& node_id, const std::string& query);

  // Applies field edits to fact k of a node, then revalidates, recomputes and
  // re-ranks. Throws INVALID_FACT with the violations as detail.
  nlohmann::json edit_fact(const std::string& node_id, std::size_t k, const nlohmann::json& edits);

  std::vector<StoryRef> add_to_story(const std::vector<std::pair<std::string, std::size_t>>& refs);
  std::vector<StoryRef> story() const;

  RetrievalTree snapshot() const;
  nlohmann::json tree_json() const;
  nlohmann::json node_json(const std::string& node_id) const;
  nlohmann::json facts_json(const std::string& node_id) const;
  std::string save() const;
  std::size_t reward(double threshold) const;
  std::string id() const;

 private:
  struct BusyGuard;
  void recommend(RetrievalTree& tree, const std::vector<std::string>& child_ids, const PlanRecommendation& plan);
  PlanRecommendation plan_children(const std::vector<RetrievalNode>& children, Stance stance);

  RetrievalTree tree_;
  Agent& agent_;
  mutable std::shared_mutex state_mutex_;
  std::mutex mutation_mutex_;
  std::mutex busy_mutex_;
  std::set<std::string> busy_;
};

// Re-executes the actions recorded in `original.event_log` against `agent`
// and returns the rebuilt tree (same session id and metadata).
RetrievalTree replay_session(const RetrievalTree& original, Agent& agent);

// Expands the recommended node `depth` times with that node's own stance.
// Stops early when nothing is recommended. Returns the number of expansions.
int follow_recommendations(Session& session, int depth);

class SessionManager {
 public:
  explicit SessionManager(Agent& agent, SessionOptions defaults = {}) : agent_(agent), defaults_(std::move(defaults)) {}

  Session& create(std::string_view statement);
  Session& get(std::string_view id);  // throws UNKNOWN_SESSION
  Session& adopt(RetrievalTree tree);
  std::vector<std::string> ids() const;

 private:
  Agent& agent_;
  SessionOptions defaults_;
  mutable std::shared_mutex mutex_;
  std::map<std::string, std::unique_ptr<Session>, std::less<>> sessions_;
  std::size_t counter_ = 0;
};

}  // namespace factscope
