#include "factscope/retrieval_tree.hpp"

#include <algorithm>
#include <set>

#include "factscope/digest.hpp"
#include "factscope/error.hpp"

namespace factscope {

std::string_view to_string(NodeStatus s) {
  switch (s) {
    case NodeStatus::fresh: return "fresh";
    case NodeStatus::expanded: return "expanded";
    case NodeStatus::empty: return "empty";
  }
  return "fresh";
}

namespace {

NodeStatus status_from_string(std::string_view s) {
  if (s == "expanded") return NodeStatus::expanded;
  if (s == "empty") return NodeStatus::empty;
  if (s == "fresh") return NodeStatus::fresh;
  throw Error(ErrorCode::CORRUPT_BLOB, "unknown node status '" + std::string(s) + "'");
}

}  // namespace

nlohmann::json to_json(const ExpansionObservation& o) {
  return {{"child_ids", o.child_ids}, {"stance", std::string(to_string(o.stance))}, {"statement", o.statement}};
}

RetrievalNode* RetrievalTree::find(std::string_view id) {
  auto it = std::find_if(nodes.begin(), nodes.end(), [&](const RetrievalNode& n) { return n.id == id; });
  return it == nodes.end() ? nullptr : &*it;
}

const RetrievalNode* RetrievalTree::find(std::string_view id) const {
  return const_cast<RetrievalTree*>(this)->find(id);
}

RetrievalNode& RetrievalTree::at(std::string_view id) {
  if (auto* n = find(id)) return *n;
  throw Error(ErrorCode::UNKNOWN_NODE, "no node '" + std::string(id) + "' in session " + session_id);
}

const RetrievalNode& RetrievalTree::at(std::string_view id) const { return const_cast<RetrievalTree*>(this)->at(id); }

void RetrievalTree::log(std::string type, nlohmann::json payload) {
  event_log.push_back({next_step++, std::move(type), std::move(payload)});
}

std::vector<std::size_t> rank_order(const std::vector<RankItem>& items, Stance input_stance) {
  std::vector<std::size_t> order(items.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const bool ma = items[a].label == input_stance, mb = items[b].label == input_stance;
    if (ma != mb) return ma;
    if (items[a].relevance != items[b].relevance) return items[a].relevance > items[b].relevance;
    return a < b;
  });
  return order;
}

void rank_facts(std::vector<RankedFact>& facts, Stance input_stance) {
  std::vector<RankItem> items;
  for (const auto& f : facts) items.push_back({f.relevance, f.evaluation.predicted_label});
  std::vector<RankedFact> out;
  out.reserve(facts.size());
  for (std::size_t i : rank_order(items, input_stance)) out.push_back(std::move(facts[i]));
  facts = std::move(out);
}

NodeScore node_score(const RetrievalNode& node) {
  if (node.facts.empty()) return {};
  const RankedFact& top = node.facts.front();
  const auto& e = top.evaluation;
  return {top.relevance, e.predicted_label,
          e.predicted_label == Stance::support ? e.support_prob : e.oppose_prob};
}

void refresh_score(RetrievalNode& node) {
  const NodeScore s = node_score(node);
  node.node_relevance = s.relevance;
  node.node_stance_prob = s.stance_prob;
}

std::size_t session_reward(const RetrievalTree& tree, double relevance_threshold) {
  std::size_t n = 0;
  for (const auto& node : tree.nodes) {
    if (!node.stance) continue;
    for (const auto& f : node.facts) {
      if (f.relevance >= relevance_threshold && f.evaluation.predicted_label == *node.stance) ++n;
    }
  }
  return n;
}

void check_tree(const RetrievalTree& tree) {
  auto fail = [](const std::string& why) { throw Error(ErrorCode::CORRUPT_BLOB, "invalid tree: " + why); };
  if (tree.nodes.empty()) fail("no root");
  if (tree.nodes.front().parent) fail("root has a parent");
  std::map<std::string, const RetrievalNode*> by_id;
  for (const auto& n : tree.nodes) {
    if (!by_id.emplace(n.id, &n).second) fail("duplicate node id " + n.id);
  }
  for (std::size_t i = 1; i < tree.nodes.size(); ++i) {
    const auto& n = tree.nodes[i];
    if (!n.parent) fail("second root " + n.id);
    if (!n.stance) fail("non-root node " + n.id + " has no stance");
    auto p = by_id.find(*n.parent);
    if (p == by_id.end()) fail("node " + n.id + " has unknown parent " + *n.parent);
    const auto& siblings = p->second->children;
    if (std::count(siblings.begin(), siblings.end(), n.id) != 1) fail("parent of " + n.id + " does not list it");
  }
  std::set<std::string> seen;
  std::vector<const RetrievalNode*> stack{&tree.nodes.front()};
  while (!stack.empty()) {
    const RetrievalNode* n = stack.back();
    stack.pop_back();
    if (!seen.insert(n->id).second) fail("cycle through " + n->id);
    for (const auto& c : n->children) {
      auto it = by_id.find(c);
      if (it == by_id.end()) fail("unknown child " + c);
      if (it->second->parent != n->id) fail("child " + c + " names another parent");
      stack.push_back(it->second);
    }
  }
  if (seen.size() != tree.nodes.size()) fail("unreachable nodes");
  std::size_t recommended = 0;
  for (const auto& n : tree.nodes) recommended += n.recommended ? 1 : 0;
  if (recommended > 1) fail("more than one recommended node");
  if (tree.recommended_node && !tree.at(*tree.recommended_node).recommended) fail("recommended flag mismatch");
}

// --- JSON ---------------------------------------------------------------------

namespace {

nlohmann::json optional_stance(const std::optional<Stance>& s) {
  return s ? nlohmann::json(std::string(to_string(*s))) : nlohmann::json(nullptr);
}

nlohmann::json score_json(const RetrievalNode& n) {
  const NodeScore s = node_score(n);
  return {{"relevance", s.relevance}, {"stance_label", optional_stance(s.stance_label)}, {"stance_prob", s.stance_prob}};
}

}  // namespace

nlohmann::json to_json(const RankedFact& f, const RetrievalNode& owner) {
  const SubTable& src = owner.sources.at(f.source);
  const std::string& provenance = owner.source_provenance.at(f.source);
  return {{"fact", to_json(f.fact)},
          {"result", to_json(f.result)},
          {"chart", to_json(chart_spec(f.result, provenance))},
          {"evaluation", to_json(f.evaluation)},
          {"relevance", f.relevance},
          {"consistency", f.consistency.to_json()},
          {"source", f.source},
          {"subtable", to_json(src)}};
}

nlohmann::json node_summary_json(const RetrievalNode& n) {
  return {{"id", n.id},
          {"parent", n.parent ? nlohmann::json(*n.parent) : nlohmann::json(nullptr)},
          {"stance", optional_stance(n.stance)},
          {"query", n.query},
          {"direction", n.direction},
          {"children", n.children},
          {"status", std::string(to_string(n.status))},
          {"recommended", n.recommended},
          {"node_relevance", n.node_relevance},
          {"node_stance_prob", n.node_stance_prob},
          {"score", score_json(n)},
          {"fact_count", n.facts.size()}};
}

nlohmann::json to_json(const RetrievalNode& n) {
  nlohmann::json j = node_summary_json(n);
  nlohmann::json facts = nlohmann::json::array();
  for (const auto& f : n.facts) facts.push_back(to_json(f, n));
  nlohmann::json sources = nlohmann::json::array();
  for (std::size_t i = 0; i < n.sources.size(); ++i) {
    nlohmann::json s = to_json(n.sources[i]);
    s["provenance"] = n.source_provenance.at(i);
    sources.push_back(s);
  }
  j["facts"] = facts;
  j["sources"] = sources;
  j["notes"] = n.notes;
  return j;
}

namespace {

nlohmann::json events_json(const std::vector<Event>& log) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& e : log) out.push_back({{"step", e.step}, {"type", e.type}, {"payload", e.payload}});
  return out;
}

nlohmann::json story_json(const std::vector<StoryRef>& story) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& s : story) {
    out.push_back({{"node_id", s.node_id}, {"fact_index", s.fact_index}, {"snapshot", s.snapshot}});
  }
  return out;
}

}  // namespace

nlohmann::json to_json(const RetrievalTree& t) {
  nlohmann::json nodes = nlohmann::json::array();
  nlohmann::json edges = nlohmann::json::object();
  for (const auto& n : t.nodes) {
    nodes.push_back(to_json(n));
    edges[n.id] = n.children;
  }
  return {{"session_id", t.session_id},
          {"statement", t.statement},
          {"root", t.nodes.empty() ? nlohmann::json(nullptr) : nlohmann::json(t.root().id)},
          {"nodes", nodes},
          {"edges", edges},
          {"recommended_node", t.recommended_node ? nlohmann::json(*t.recommended_node) : nlohmann::json(nullptr)},
          {"planning_goal", std::string(kPlanningGoal)},
          {"event_log", events_json(t.event_log)},
          {"story", story_json(t.story)},
          {"transcript_ref", t.transcript_ref},
          {"config_digest", t.config_digest},
          {"next_step", t.next_step},
          {"reward", session_reward(t)}};
}

std::string save_session(const RetrievalTree& t) {
  const nlohmann::json body = to_json(t);
  const nlohmann::json blob = {{"format", "factscope-session"},
                               {"version", kSessionBlobVersion},
                               {"digest", sha256_hex(body.dump())},
                               {"body", body}};
  return blob.dump() + "\n";
}

namespace {

RetrievalNode node_from_json(const nlohmann::json& j) {
  RetrievalNode n;
  n.id = j.at("id").get<std::string>();
  if (!j.at("parent").is_null()) n.parent = j.at("parent").get<std::string>();
  if (!j.at("stance").is_null()) {
    n.stance = stance_from_string(j.at("stance").get<std::string>());
    if (!n.stance) throw Error(ErrorCode::CORRUPT_BLOB, "bad stance on node " + n.id);
  }
  n.query = j.at("query").get<std::string>();
  n.direction = j.at("direction").get<std::string>();
  n.children = j.at("children").get<std::vector<std::string>>();
  n.status = status_from_string(j.at("status").get<std::string>());
  n.recommended = j.at("recommended").get<bool>();
  n.node_relevance = j.at("node_relevance").get<double>();
  n.node_stance_prob = j.at("node_stance_prob").get<double>();
  n.notes = j.at("notes").get<std::vector<std::string>>();
  for (const auto& s : j.at("sources")) {
    n.sources.push_back(subtable_from_json(s));
    n.source_provenance.push_back(s.at("provenance").get<std::string>());
  }
  for (const auto& f : j.at("facts")) {
    RankedFact rf;
    rf.fact = parse_fact(f.at("fact"));
    rf.evaluation = evaluation_from_json(f.at("evaluation"));
    rf.relevance = f.at("relevance").get<double>();
    rf.source = f.at("source").get<std::size_t>();
    if (rf.source >= n.sources.size()) throw Error(ErrorCode::CORRUPT_BLOB, "fact source out of range on " + n.id);
    rf.result = compute_fact(rf.fact, n.sources[rf.source]);
    rf.consistency = check_description(rf.result, rf.fact.description);
    n.facts.push_back(std::move(rf));
  }
  return n;
}

}  // namespace

RetrievalTree load_session(std::string_view blob) {
  nlohmann::json j = nlohmann::json::parse(blob, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw Error(ErrorCode::CORRUPT_BLOB, "session blob is not valid JSON");
  if (j.value("format", "") != "factscope-session") throw Error(ErrorCode::CORRUPT_BLOB, "not a session blob");
  if (j.value("version", -1) != kSessionBlobVersion) {
    throw Error(ErrorCode::CORRUPT_BLOB, "unsupported session blob version " + j.value("version", nlohmann::json()).dump());
  }
  if (!j.contains("body") || j.value("digest", "") != sha256_hex(j["body"].dump())) {
    throw Error(ErrorCode::CORRUPT_BLOB, "session blob digest mismatch");
  }
  const auto& b = j["body"];
  RetrievalTree t;
  try {
    t.session_id = b.at("session_id").get<std::string>();
    t.statement = b.at("statement").get<std::string>();
    for (const auto& n : b.at("nodes")) t.nodes.push_back(node_from_json(n));
    if (!b.at("recommended_node").is_null()) t.recommended_node = b.at("recommended_node").get<std::string>();
    for (const auto& e : b.at("event_log")) {
      t.event_log.push_back({e.at("step").get<std::uint64_t>(), e.at("type").get<std::string>(), e.at("payload")});
    }
    for (const auto& s : b.at("story")) {
      t.story.push_back({s.at("node_id").get<std::string>(), s.at("fact_index").get<std::size_t>(),
                         s.value("snapshot", nlohmann::json())});
    }
    t.transcript_ref = b.at("transcript_ref").get<std::string>();
    t.config_digest = b.at("config_digest").get<std::string>();
    t.next_step = b.at("next_step").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::CORRUPT_BLOB, std::string("session blob is missing data: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::CORRUPT_BLOB) throw;
    throw Error(ErrorCode::CORRUPT_BLOB, std::string("session blob holds an invalid fact: ") + e.what());
  }
  check_tree(t);
  return t;
}

}  // namespace factscope
