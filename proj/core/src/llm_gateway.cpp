#include "factscope/llm_gateway.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "factscope/error.hpp"
#include "factscope/sql.hpp"
#include "factscope/text_util.hpp"

namespace factscope {

std::optional<std::string_view> first_json(std::string_view text, char open) {
  for (std::size_t start = 0; start < text.size(); ++start) {
    const char c = text[start];
    if (!(open == 0 ? (c == '{' || c == '[') : c == open)) continue;
    std::vector<char> stack;
    bool in_string = false, escaped = false;
    for (std::size_t i = start; i < text.size(); ++i) {
      const char ch = text[i];
      if (in_string) {
        if (escaped) escaped = false;
        else if (ch == '\\') escaped = true;
        else if (ch == '"') in_string = false;
        continue;
      }
      if (ch == '"') {
        in_string = true;
      } else if (ch == '{' || ch == '[') {
        stack.push_back(ch == '{' ? '}' : ']');
      } else if (ch == '}' || ch == ']') {
        if (stack.empty() || stack.back() != ch) break;
        stack.pop_back();
        if (stack.empty()) return text.substr(start, i - start + 1);
      }
    }
  }
  return std::nullopt;
}

std::string strip_sql(std::string_view response) {
  std::string s(response);
  if (auto fence = s.find("```"); fence != std::string::npos) {
    auto body = s.find('\n', fence);
    auto close = body == std::string::npos ? std::string::npos : s.find("```", body);
    if (body != std::string::npos) s = s.substr(body + 1, close == std::string::npos ? std::string::npos : close - body - 1);
  }
  s = text::trim(s);
  while (!s.empty() && s.back() == ';') s = text::trim(s.substr(0, s.size() - 1));
  return s;
}

nlohmann::json to_json(const SubQuery& q) {
  return {{"text", q.text}, {"direction", q.direction}, {"stance", std::string(to_string(q.stance))}};
}

SubQuery subquery_from_json(const nlohmann::json& j) {
  return {j.at("text").get<std::string>(), j.value("direction", ""),
          stance_from_string(j.value("stance", "support")).value_or(Stance::support)};
}

nlohmann::json to_json(const FactEvaluation& e) {
  return {{"fact_index", e.fact_index},
          {"support_prob", e.support_prob},
          {"oppose_prob", e.oppose_prob},
          {"predicted_label", std::string(to_string(e.predicted_label))},
          {"explanation", e.explanation},
          {"tie", e.tie},
          {"defaulted", e.defaulted}};
}

FactEvaluation evaluation_from_json(const nlohmann::json& j) {
  FactEvaluation e;
  e.fact_index = j.at("fact_index").get<std::size_t>();
  e.support_prob = j.at("support_prob").get<double>();
  e.oppose_prob = j.at("oppose_prob").get<double>();
  e.predicted_label = stance_from_string(j.at("predicted_label").get<std::string>()).value_or(Stance::support);
  e.explanation = j.value("explanation", "");
  e.tie = j.value("tie", false);
  e.defaulted = j.value("defaulted", false);
  return e;
}

std::optional<FactEvaluation> make_evaluation(std::size_t index, double support, double oppose,
                                              std::string explanation) {
  if (!std::isfinite(support) || !std::isfinite(oppose) || support < 0 || oppose < 0) return std::nullopt;
  const double total = support + oppose;
  if (total <= 0) return std::nullopt;
  FactEvaluation e;
  e.fact_index = index;
  e.support_prob = support / total;
  e.oppose_prob = oppose / total;
  e.tie = e.support_prob == e.oppose_prob;
  e.predicted_label = e.oppose_prob > e.support_prob ? Stance::oppose : Stance::support;
  e.explanation = std::move(explanation);
  return e;
}

FactEvaluation default_evaluation(std::size_t index, std::string reason) {
  FactEvaluation e;
  e.fact_index = index;
  e.tie = true;
  e.defaulted = true;
  e.explanation = std::move(reason);
  return e;
}

nlohmann::json to_json(const PlanRecommendation& p) {
  return {{"reasoning", p.reasoning},
          {"recommend_index", p.recommend_index},
          {"fallback", p.fallback},
          {"fallback_reason", p.fallback_reason}};
}

PlanRecommendation plan_from_json(const nlohmann::json& j) {
  return {j.value("reasoning", ""), j.at("recommend_index").get<std::size_t>(), j.value("fallback", false),
          j.value("fallback_reason", "")};
}

std::size_t fallback_index(const std::vector<PlanCandidate>& candidates) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    if (candidates[i].node_relevance > candidates[best].node_relevance) best = i;
  }
  return best;
}

// --- renderings --------------------------------------------------------------

std::string render_table_columns(const DatasetSummary& table) {
  std::string s;
  for (std::size_t i = 0; i < table.columns.size(); ++i) {
    if (i) s += ", ";
    s += table.columns[i];
  }
  return s;
}

std::string render_table_values(const DatasetSummary& table) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (std::size_t c = 0; c < table.columns.size(); ++c) {
    nlohmann::json col = nlohmann::json::array();
    for (const auto& row : table.sample_rows) col.push_back(cell_to_json(row[c]));
    j[table.columns[c]] = col;
  }
  return j.dump();
}

std::string render_subtable(const SubTable& table) {
  nlohmann::json cols = nlohmann::json::array();
  for (const auto& f : table.fields) cols.push_back(f.name);
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : table.rows) {
    nlohmann::json row = nlohmann::json::array();
    for (const auto& c : r) row.push_back(cell_to_json(c));
    rows.push_back(row);
  }
  return nlohmann::ordered_json{{"columns", cols}, {"rows", rows}}.dump();
}

std::string render_facts_for_evaluation(const std::vector<DataFact>& facts) {
  nlohmann::json arr = nlohmann::json::array();
  for (std::size_t i = 0; i < facts.size(); ++i) {
    nlohmann::json f = to_json(facts[i]);
    f["index"] = i;
    arr.push_back(f);
  }
  return arr.dump();
}

std::string render_plan_candidates(const std::vector<PlanCandidate>& candidates) {
  std::string s;
  for (const auto& c : candidates) {
    s += "Index: " + std::to_string(c.index) + "\n";
    s += "Sub-query: " + c.query + "\n";
    s += "Data facts:\n";
    if (c.facts.empty()) s += "    (none)\n";
    for (const auto& f : c.facts) {
      s += "    - Fact: " + f.description + "\n";
      s += "      Stance: " + std::string(to_string(f.stance)) + "\n";
      s += "      Relevance: " + text::format_number(std::round(f.relevance * 1000.0) / 1000.0) + "\n";
    }
    s += "\n";
  }
  return s;
}

// --- gateway ------------------------------------------------------------------

namespace {

[[noreturn]] void malformed(const std::string& why) { throw Error(ErrorCode::MALFORMED_RESPONSE, why); }

nlohmann::json parse_json_in(std::string_view response, char open) {
  auto raw = first_json(response, open);
  if (!raw) malformed(open == '[' ? "no JSON array in the response" : "no JSON object in the response");
  auto j = nlohmann::json::parse(*raw, nullptr, false, true);
  if (j.is_discarded()) malformed("the JSON in the response does not parse");
  return j;
}

std::string squash_key(std::string_view k) {
  std::string out;
  for (unsigned char c : k) {
    if (std::isalnum(c)) out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

const nlohmann::json* find_key(const nlohmann::json& obj, std::string_view squashed) {
  if (!obj.is_object()) return nullptr;
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (squash_key(it.key()) == squashed) return &it.value();
  }
  return nullptr;
}

std::optional<double> number_in(const nlohmann::json* v) {
  if (!v) return std::nullopt;
  if (v->is_array() && v->size() == 1) v = &(*v)[0];
  if (v->is_number()) return v->get<double>();
  if (v->is_string()) return text::parse_number(v->get<std::string>());
  return std::nullopt;
}

std::string text_in(const nlohmann::json* v) {
  if (!v || v->is_null()) return "";
  if (v->is_array() && v->size() == 1) v = &(*v)[0];
  return v->is_string() ? v->get<std::string>() : v->dump();
}

std::string first_words(std::string_view s, std::size_t n) {
  auto words = text::split_words(s);
  if (words.size() > n) words.resize(n);
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) out += (i ? " " : "") + words[i];
  return out;
}

std::vector<std::string> string_list(const nlohmann::json* v, std::string_view name) {
  if (!v || !v->is_array()) malformed(std::string(name) + " must be a list");
  std::vector<std::string> out;
  for (const auto& item : *v) {
    if (!item.is_string() || text::trim(item.get<std::string>()).empty()) {
      malformed(std::string(name) + " must contain non-empty strings");
    }
    out.push_back(text::trim(item.get<std::string>()));
  }
  if (out.size() != kSubQueriesPerExpansion) {
    malformed(std::string(name) + " has " + std::to_string(out.size()) + " items, expected " +
              std::to_string(kSubQueriesPerExpansion));
  }
  return out;
}

}  // namespace

LlmGateway::LlmGateway(std::shared_ptr<LlmBackend> backend, int repair_budget)
    : backend_(std::move(backend)), repair_budget_(repair_budget) {
  if (!backend_) throw Error(ErrorCode::INVALID_ARGUMENT, "gateway needs a backend");
}

template <typename Parse>
auto LlmGateway::call_with_repair(PromptKind kind, const std::string& prompt, Parse parse) {
  std::string current = prompt;
  std::string last_error;
  for (int attempt = 0; attempt <= repair_budget_; ++attempt) {
    const std::string response = backend_->complete(kind, current);
    try {
      return parse(response);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::MALFORMED_RESPONSE) throw;
      last_error = e.what();
    }
    current = prompt + "\n\nYour previous response could not be used: " + last_error +
              "\nReply again using exactly the required output format.";
  }
  throw Error(ErrorCode::MALFORMED_RESPONSE,
              std::string(to_string(kind)) + " response still malformed after " + std::to_string(repair_budget_) +
                  " repair attempts: " + last_error);
}

std::vector<SubQuery> LlmGateway::decompose_query(std::string_view, std::string_view query, Stance stance) {
  const std::string prompt = render_decompose(stance, query);
  return call_with_repair(PromptKind::decompose, prompt, [&](const std::string& response) {
    const nlohmann::json j = parse_json_in(response, '{');
    const auto queries = string_list(find_key(j, "querylist"), "queryList");
    const auto directions = string_list(find_key(j, "directionlist"), "directionList");
    std::vector<SubQuery> out;
    for (std::size_t i = 0; i < queries.size(); ++i) out.push_back({queries[i], first_words(directions[i], 3), stance});
    return out;
  });
}

std::string LlmGateway::generate_sql(std::string_view subquery, const DatasetSummary& table,
                                     const std::vector<std::string>& relevant_series,
                                     std::optional<std::string> feedback) {
  std::string series;
  for (std::size_t i = 0; i < relevant_series.size(); ++i) {
    series += (i ? ", " : "") + sql::quote_literal(relevant_series[i]);
  }
  if (series.empty()) series = "(none)";
  std::string prompt = render_text2sql(table.table_name, render_table_columns(table), render_table_values(table),
                                       subquery, series);
  if (feedback) prompt += "\n\n" + *feedback;
  std::string sql = strip_sql(backend_->complete(PromptKind::text2sql, prompt));
  if (sql.empty()) throw Error(ErrorCode::EMPTY_RESPONSE, "the SQL response is empty");
  return sql;
}

ExtractedFacts LlmGateway::extract_facts(const SubTable& table, std::string_view statement, std::string_view query,
                                         Stance stance) {
  const std::string prompt = render_extract(stance, render_subtable(table), statement, query);
  const std::string response = backend_->complete(PromptKind::extract, prompt);

  std::vector<std::string_view> candidates;
  const std::string lower = text::to_lower(response);
  const std::string marker = "generated data fact:";
  std::string_view view(response);
  for (auto pos = lower.find(marker); pos != std::string::npos; pos = lower.find(marker, pos + marker.size())) {
    auto next = lower.find(marker, pos + marker.size());
    auto span = view.substr(pos + marker.size(), next == std::string::npos ? std::string_view::npos
                                                                           : next - pos - marker.size());
    if (auto obj = first_json(span, '{')) candidates.push_back(*obj);
    else candidates.push_back(span);
  }
  if (candidates.empty()) {
    // Without markers, accept bare objects in sequence.
    std::string_view rest = view;
    while (auto obj = first_json(rest, '{')) {
      candidates.push_back(*obj);
      rest = rest.substr(static_cast<std::size_t>(obj->data() - rest.data()) + obj->size());
    }
  }

  ExtractedFacts out;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const std::string label = "candidate " + std::to_string(i + 1) + ": ";
    if (out.facts.size() == kFactsPerTable) {
      out.dropped.push_back(label + "more than " + std::to_string(kFactsPerTable) + " facts for one table");
      continue;
    }
    auto j = nlohmann::json::parse(candidates[i], nullptr, false, true);
    if (j.is_discarded()) {
      out.dropped.push_back(label + "not valid JSON");
      continue;
    }
    try {
      out.facts.push_back(parse_fact(j));
    } catch (const Error& e) {
      out.dropped.push_back(label + std::string(to_string(e.code())) + ": " + e.what());
    }
  }
  return out;
}

std::vector<FactEvaluation> LlmGateway::evaluate_facts(const std::vector<DataFact>& facts,
                                                       std::string_view statement) {
  if (facts.empty()) return {};
  const std::string prompt = render_evaluate(render_facts_for_evaluation(facts), statement);
  return call_with_repair(PromptKind::evaluate, prompt, [&](const std::string& response) {
    const nlohmann::json j = parse_json_in(response, '[');
    std::vector<std::optional<FactEvaluation>> slots(facts.size());
    for (std::size_t pos = 0; pos < j.size(); ++pos) {
      const auto& item = j[pos];
      if (!item.is_object()) continue;
      auto idx = number_in(find_key(item, "index"));
      std::size_t index = pos;
      if (idx) {
        if (*idx < 0 || *idx != std::floor(*idx) || *idx >= static_cast<double>(facts.size())) continue;
        index = static_cast<std::size_t>(*idx);
      }
      if (index >= facts.size() || slots[index]) continue;
      auto s = number_in(find_key(item, "support"));
      auto o = number_in(find_key(item, "oppose"));
      if (!s || !o) continue;
      slots[index] = make_evaluation(index, *s, *o, text_in(find_key(item, "explanation")));
    }
    if (std::none_of(slots.begin(), slots.end(), [](const auto& s) { return s.has_value(); })) {
      malformed("no usable evaluation in the response");
    }
    std::vector<FactEvaluation> out;
    for (std::size_t i = 0; i < slots.size(); ++i) {
      out.push_back(slots[i] ? *slots[i] : default_evaluation(i, "missing, defaulted"));
    }
    return out;
  });
}

PlanRecommendation LlmGateway::plan(const std::vector<PlanCandidate>& candidates, std::string_view statement,
                                    Stance stance) {
  if (candidates.empty()) throw Error(ErrorCode::INVALID_ARGUMENT, "plan needs at least one candidate");
  auto fallback = [&](std::string reason) {
    return PlanRecommendation{"", fallback_index(candidates), true, std::move(reason)};
  };
  const std::string prompt = render_plan(stance, statement, render_plan_candidates(candidates));
  try {
    auto [reasoning, index] = call_with_repair(PromptKind::plan, prompt, [&](const std::string& response) {
      const nlohmann::json j = parse_json_in(response, '{');
      auto idx = number_in(find_key(j, "recommendindex"));
      if (!idx || *idx != std::floor(*idx)) malformed("\"Recommend Index\" must be an integer");
      return std::make_pair(text_in(find_key(j, "reasoning")), *idx);
    });
    if (index < 0 || index >= static_cast<double>(candidates.size())) {
      auto p = fallback("recommended index " + text::format_number(index) + " is out of range");
      p.reasoning = reasoning;
      return p;
    }
    return {reasoning, static_cast<std::size_t>(index), false, ""};
  } catch (const Error& e) {
    if (e.code() == ErrorCode::LLM_UNAVAILABLE || e.code() == ErrorCode::MALFORMED_RESPONSE) {
      return fallback(std::string(to_string(e.code())) + ": " + e.what());
    }
    throw;
  }
}

}  // namespace factscope
