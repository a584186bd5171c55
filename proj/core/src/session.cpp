#include "factscope/session.hpp"

#include <algorithm>

#include "factscope/error.hpp"
#include "factscope/text_util.hpp"

namespace factscope {

struct Session::BusyGuard {
  Session& s;
  std::string id;
  BusyGuard(Session& session, std::string node_id) : s(session), id(std::move(node_id)) {
    std::lock_guard lock(s.busy_mutex_);
    if (!s.busy_.insert(id).second) {
      throw Error(ErrorCode::NODE_BUSY, "node " + id + " is already being expanded", {{"node_id", id}});
    }
  }
  ~BusyGuard() {
    std::lock_guard lock(s.busy_mutex_);
    s.busy_.erase(id);
  }
  BusyGuard(const BusyGuard&) = delete;
  BusyGuard& operator=(const BusyGuard&) = delete;
};

namespace {

std::vector<std::string> attach(RetrievalTree& tree, const std::string& parent_id, std::vector<RetrievalNode> children) {
  std::vector<std::string> ids;
  for (auto& c : children) {
    c.id = tree.next_node_id();
    c.parent = parent_id;
    ids.push_back(c.id);
    tree.nodes.push_back(std::move(c));
  }
  RetrievalNode& parent = tree.at(parent_id);
  parent.children.insert(parent.children.end(), ids.begin(), ids.end());
  if (!parent.parent || !parent.facts.empty()) parent.status = NodeStatus::expanded;
  return ids;
}

nlohmann::json stance_json(const std::optional<Stance>& s) {
  return s ? nlohmann::json(std::string(to_string(*s))) : nlohmann::json(nullptr);
}

Stance parse_stance(const nlohmann::json& j) {
  auto s = stance_from_string(j.get<std::string>());
  if (!s) throw Error(ErrorCode::CORRUPT_BLOB, "bad stance in event log: " + j.dump());
  return *s;
}

}  // namespace

Session::Session(RetrievalTree tree, Agent& agent) : tree_(std::move(tree)), agent_(agent) {}

PlanRecommendation Session::plan_children(const std::vector<RetrievalNode>& children, Stance stance) {
  std::vector<const RetrievalNode*> ptrs;
  for (const auto& c : children) ptrs.push_back(&c);
  return agent_.plan(ptrs, tree_.statement, stance);
}

void Session::recommend(RetrievalTree& tree, const std::vector<std::string>& child_ids,
                        const PlanRecommendation& plan) {
  for (auto& n : tree.nodes) n.recommended = false;
  const std::string& chosen = child_ids.at(plan.recommend_index);
  tree.at(chosen).recommended = true;
  tree.recommended_node = chosen;
  tree.log("plan", {{"candidates", child_ids},
                    {"recommended", chosen},
                    {"reasoning", plan.reasoning},
                    {"fallback", plan.fallback},
                    {"fallback_reason", plan.fallback_reason}});
}

std::unique_ptr<Session> Session::create(std::string session_id, std::string_view statement, Agent& agent,
                                         SessionOptions options) {
  const std::string text = text::trim(statement);
  if (text.empty()) throw Error(ErrorCode::EMPTY_STATEMENT, "the statement is empty");

  RetrievalTree tree;
  tree.session_id = std::move(session_id);
  tree.statement = text;
  tree.transcript_ref = options.transcript_ref;
  tree.config_digest = options.config_digest;
  RetrievalNode root;
  root.id = tree.next_node_id();
  root.query = text;
  root.status = NodeStatus::expanded;
  tree.nodes.push_back(std::move(root));
  tree.log("create", {{"statement", text}, {"root_plan_stance", stance_json(options.root_plan_stance)}});

  std::unique_ptr<Session> s(new Session(std::move(tree), agent));
  RetrievalTree& t = s->tree_;
  const std::string root_id = t.root().id;
  std::map<Stance, std::vector<std::string>> by_stance;
  std::vector<RetrievalNode> all;
  for (Stance stance : {Stance::support, Stance::oppose}) {
    auto children = agent.build_children(t.statement, t.statement, stance);
    const auto ids = attach(t, root_id, children);
    by_stance[stance] = ids;
    t.log("initial_expand", {{"node_id", root_id}, {"stance", std::string(to_string(stance))}});
    t.log("observe", to_json(ExpansionObservation{ids, stance, t.statement}));
  }
  std::vector<std::string> candidates;
  Stance plan_stance = options.root_plan_stance.value_or(Stance::support);
  if (options.root_plan_stance) {
    candidates = by_stance[*options.root_plan_stance];
  } else {
    candidates = by_stance[Stance::support];
    candidates.insert(candidates.end(), by_stance[Stance::oppose].begin(), by_stance[Stance::oppose].end());
  }
  std::vector<RetrievalNode> nodes;
  for (const auto& id : candidates) nodes.push_back(t.at(id));
  s->recommend(t, candidates, s->plan_children(nodes, plan_stance));
  check_tree(t);
  return s;
}

ExpansionObservation Session::expand(const std::string& node_id, Stance stance) {
  BusyGuard guard(*this, node_id);
  std::lock_guard mutation(mutation_mutex_);
  std::string query;
  {
    std::shared_lock lock(state_mutex_);
    query = tree_.at(node_id).query;
  }
  auto children = agent_.build_children(tree_.statement, query, stance);
  const PlanRecommendation plan = plan_children(children, stance);

  std::unique_lock lock(state_mutex_);
  const std::uint64_t step = tree_.next_step;
  tree_.log("expand", {{"node_id", node_id}, {"stance", std::string(to_string(stance))}, {"timestamp", step}});
  ExpansionObservation obs{attach(tree_, node_id, std::move(children)), stance, tree_.statement};
  tree_.log("observe", to_json(obs));
  recommend(tree_, obs.child_ids, plan);
  return obs;
}

RetrievalNode Session::re_retrieve(const std::string& node_id, const std::string& query) {
  const std::string text = text::trim(query);
  if (text.empty()) throw Error(ErrorCode::INVALID_ARGUMENT, "the edited query is empty");
  BusyGuard guard(*this, node_id);
  std::lock_guard mutation(mutation_mutex_);
  RetrievalNode copy;
  {
    std::shared_lock lock(state_mutex_);
    copy = tree_.at(node_id);
  }
  if (!copy.parent) throw Error(ErrorCode::INVALID_ARGUMENT, "the root query is the statement and cannot be edited");
  copy.query = text;
  agent_.populate(copy, tree_.statement);

  std::unique_lock lock(state_mutex_);
  tree_.at(node_id) = copy;
  tree_.log("re_retrieve", {{"node_id", node_id}, {"query", text}});
  return copy;
}

nlohmann::json Session::edit_fact(const std::string& node_id, std::size_t k, const nlohmann::json& edits) {
  if (!edits.is_object()) throw Error(ErrorCode::MALFORMED, "fact edits must be a JSON object");
  std::lock_guard mutation(mutation_mutex_);
  RetrievalNode copy;
  {
    std::shared_lock lock(state_mutex_);
    copy = tree_.at(node_id);
  }
  if (k >= copy.facts.size()) {
    throw Error(ErrorCode::NOT_FOUND, "node " + node_id + " has no fact " + std::to_string(k));
  }
  nlohmann::json merged = to_json(copy.facts[k].fact);
  for (auto it = edits.begin(); it != edits.end(); ++it) merged[text::to_lower(it.key())] = it.value();
  DataFact fact = parse_fact(merged);
  const SubTable& table = copy.sources.at(copy.facts[k].source);
  const auto report = validate_fact(fact, table);
  if (!report.ok) {
    throw Error(ErrorCode::INVALID_FACT, "the edited fact breaks " + std::to_string(report.violations.size()) +
                                             " rule(s): " + std::string(to_string(report.violations.front().rule)),
                report.to_json());
  }
  RankedFact& rf = copy.facts[k];
  rf.result = compute_fact(fact, table);
  rf.consistency = check_description(rf.result, fact.description);
  rf.relevance = relevance(agent_.embedder(), fact.description, tree_.statement, copy.query);
  rf.fact = std::move(fact);

  std::vector<RankItem> items;
  for (const auto& f : copy.facts) items.push_back({f.relevance, f.evaluation.predicted_label});
  const auto order = rank_order(items, *copy.stance);
  const std::size_t new_index = static_cast<std::size_t>(std::find(order.begin(), order.end(), k) - order.begin());
  rank_facts(copy.facts, *copy.stance);
  refresh_score(copy);

  std::unique_lock lock(state_mutex_);
  tree_.at(node_id) = copy;
  tree_.log("edit_fact", {{"node_id", node_id}, {"index", k}, {"edits", edits}});
  return {{"index", new_index}, {"fact", to_json(copy.facts[new_index], copy)}};
}

std::vector<StoryRef> Session::add_to_story(const std::vector<std::pair<std::string, std::size_t>>& refs) {
  std::lock_guard mutation(mutation_mutex_);
  std::unique_lock lock(state_mutex_);
  std::vector<StoryRef> added;
  nlohmann::json logged = nlohmann::json::array();
  for (const auto& [node_id, k] : refs) {
    const RetrievalNode& n = tree_.at(node_id);
    if (k >= n.facts.size()) throw Error(ErrorCode::NOT_FOUND, "node " + node_id + " has no fact " + std::to_string(k));
    added.push_back({node_id, k, to_json(n.facts[k], n)});
    logged.push_back({{"node_id", node_id}, {"fact_index", k}});
  }
  tree_.story.insert(tree_.story.end(), added.begin(), added.end());
  tree_.log("story", {{"refs", logged}});
  return tree_.story;
}

std::vector<StoryRef> Session::story() const {
  std::shared_lock lock(state_mutex_);
  return tree_.story;
}

RetrievalTree Session::snapshot() const {
  std::shared_lock lock(state_mutex_);
  return tree_;
}

nlohmann::json Session::tree_json() const {
  std::shared_lock lock(state_mutex_);
  nlohmann::json j = to_json(tree_);
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& n : tree_.nodes) nodes.push_back(node_summary_json(n));
  j["nodes"] = nodes;
  return j;
}

nlohmann::json Session::node_json(const std::string& node_id) const {
  std::shared_lock lock(state_mutex_);
  return to_json(tree_.at(node_id));
}

nlohmann::json Session::facts_json(const std::string& node_id) const {
  std::shared_lock lock(state_mutex_);
  const RetrievalNode& n = tree_.at(node_id);
  nlohmann::json facts = nlohmann::json::array();
  for (const auto& f : n.facts) facts.push_back(to_json(f, n));
  return {{"node_id", n.id}, {"query", n.query}, {"status", std::string(to_string(n.status))}, {"facts", facts},
          {"notes", n.notes}};
}

std::string Session::save() const {
  std::shared_lock lock(state_mutex_);
  return save_session(tree_);
}

std::size_t Session::reward(double threshold) const {
  std::shared_lock lock(state_mutex_);
  return session_reward(tree_, threshold);
}

std::string Session::id() const {
  std::shared_lock lock(state_mutex_);
  return tree_.session_id;
}

RetrievalTree replay_session(const RetrievalTree& original, Agent& agent) {
  auto create = std::find_if(original.event_log.begin(), original.event_log.end(),
                             [](const Event& e) { return e.type == "create"; });
  if (create == original.event_log.end()) throw Error(ErrorCode::CORRUPT_BLOB, "event log has no create event");
  SessionOptions options;
  options.transcript_ref = original.transcript_ref;
  options.config_digest = original.config_digest;
  if (!create->payload.at("root_plan_stance").is_null()) {
    options.root_plan_stance = parse_stance(create->payload.at("root_plan_stance"));
  }
  auto session = Session::create(original.session_id, create->payload.at("statement").get<std::string>(), agent,
                                 options);
  for (const auto& e : original.event_log) {
    const auto& p = e.payload;
    if (e.type == "expand") {
      session->expand(p.at("node_id").get<std::string>(), parse_stance(p.at("stance")));
    } else if (e.type == "re_retrieve") {
      session->re_retrieve(p.at("node_id").get<std::string>(), p.at("query").get<std::string>());
    } else if (e.type == "edit_fact") {
      session->edit_fact(p.at("node_id").get<std::string>(), p.at("index").get<std::size_t>(), p.at("edits"));
    } else if (e.type == "story") {
      std::vector<std::pair<std::string, std::size_t>> refs;
      for (const auto& r : p.at("refs")) refs.emplace_back(r.at("node_id"), r.at("fact_index"));
      session->add_to_story(refs);
    }
  }
  return session->snapshot();
}

Session& SessionManager::create(std::string_view statement) {
  std::string id;
  {
    std::unique_lock lock(mutex_);
    do {
      id = "s" + std::to_string(++counter_);
    } while (sessions_.count(id));
  }
  auto session = Session::create(id, statement, agent_, defaults_);
  std::unique_lock lock(mutex_);
  auto [it, inserted] = sessions_.emplace(id, std::move(session));
  return *it->second;
}

Session& SessionManager::get(std::string_view id) {
  std::shared_lock lock(mutex_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw Error(ErrorCode::UNKNOWN_SESSION, "no session '" + std::string(id) + "'");
  return *it->second;
}

Session& SessionManager::adopt(RetrievalTree tree) {
  std::unique_lock lock(mutex_);
  const std::string id = tree.session_id;
  if (sessions_.count(id)) throw Error(ErrorCode::INVALID_ARGUMENT, "session '" + id + "' already exists");
  auto [it, inserted] = sessions_.emplace(id, std::make_unique<Session>(std::move(tree), agent_));
  return *it->second;
}

std::vector<std::string> SessionManager::ids() const {
  std::shared_lock lock(mutex_);
  std::vector<std::string> out;
  for (const auto& [id, s] : sessions_) out.push_back(id);
  return out;
}

int follow_recommendations(Session& session, int depth) {
  int done = 0;
  for (; done < depth; ++done) {
    const RetrievalTree t = session.snapshot();
    if (!t.recommended_node) break;
    const RetrievalNode& target = t.at(*t.recommended_node);
    session.expand(target.id, target.stance.value_or(Stance::support));
  }
  return done;
}

}  // namespace factscope
