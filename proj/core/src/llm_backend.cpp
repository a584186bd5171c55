#include "factscope/llm_backend.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>

#include "factscope/digest.hpp"
#include "factscope/http_client.hpp"
#include "factscope/llm_gateway.hpp"

namespace factscope {

ChatCompletionBackend::ChatCompletionBackend(ChatOptions options)
    : options_(std::move(options)), slots_(std::clamp(options_.max_concurrency, 1, 64)) {}

std::string ChatCompletionBackend::complete(PromptKind, const std::string& prompt) {
  const char* key = std::getenv(options_.api_key_env.c_str());
  if (!key || !*key) {
    throw Error(ErrorCode::LLM_UNAVAILABLE, "environment variable " + options_.api_key_env + " is not set");
  }
  nlohmann::json body = {{"model", options_.model},
                         {"temperature", options_.temperature},
                         {"messages", {{{"role", "user"}, {"content", prompt}}}}};
  slots_.acquire();
  nlohmann::json res;
  try {
    res = http::post_json(options_.base_url, "/chat/completions", body, key, options_.timeout,
                          options_.max_retries, ErrorCode::LLM_UNAVAILABLE);
  } catch (...) {
    slots_.release();
    throw;
  }
  slots_.release();
  try {
    return res.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::LLM_UNAVAILABLE, std::string("unexpected chat response: ") + e.what());
  }
}

// --- scripted ---------------------------------------------------------------

ScriptedBackend::ScriptedBackend(nlohmann::json script) {
  if (!script.is_object() || !script.contains("rules") || !script["rules"].is_array()) {
    throw Error(ErrorCode::INVALID_ARGUMENT, "script must be an object with a \"rules\" array");
  }
  rules_ = std::move(script["rules"]);
}

ScriptedBackend ScriptedBackend::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IO_ERROR, "cannot open script " + path.string());
  try {
    return ScriptedBackend(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::INVALID_ARGUMENT, "script " + path.string() + " is not valid JSON: " + e.what());
  }
}

namespace {

bool contains_all(std::string_view haystack, const nlohmann::json& needles) {
  if (!needles.is_array()) return true;
  for (const auto& n : needles) {
    if (haystack.find(n.get<std::string>()) == std::string_view::npos) return false;
  }
  return true;
}

std::string answer_evaluate(const nlohmann::json& rule, const std::string& prompt) {
  const auto marker = prompt.find("\"Data facts\":");
  nlohmann::json facts = nlohmann::json::array();
  if (marker != std::string::npos) {
    if (auto raw = first_json(std::string_view(prompt).substr(marker + 13), '[')) {
      facts = nlohmann::json::parse(*raw, nullptr, false);
      if (facts.is_discarded()) facts = nlohmann::json::array();
    }
  }
  const nlohmann::json fallback = rule.value("default_fact", nlohmann::json{{"support", 0.5}, {"oppose", 0.5},
                                                                            {"explanation", "no scripted verdict"}});
  nlohmann::json out = nlohmann::json::array();
  for (std::size_t i = 0; i < facts.size(); ++i) {
    const std::string dumped = facts[i].dump();
    nlohmann::json verdict = fallback;
    for (const auto& pf : rule.value("per_fact", nlohmann::json::array())) {
      if (contains_all(dumped, pf.value("contains", nlohmann::json::array()))) {
        verdict = pf;
        break;
      }
    }
    out.push_back({{"index", facts[i].value("index", i)},
                   {"support", verdict.value("support", 0.5)},
                   {"oppose", verdict.value("oppose", 0.5)},
                   {"explanation", verdict.value("explanation", "")}});
  }
  return out.dump(2);
}

}  // namespace

std::string ScriptedBackend::complete(PromptKind kind, const std::string& prompt) {
  for (const auto& rule : rules_) {
    if (rule.value("kind", "") != to_string(kind)) continue;
    if (!contains_all(prompt, rule.value("contains", nlohmann::json::array()))) continue;
    if (rule.value("fail", false)) {
      throw Error(ErrorCode::LLM_UNAVAILABLE, "scripted provider failure");
    }
    if (kind == PromptKind::evaluate && rule.contains("per_fact")) return answer_evaluate(rule, prompt);
    return rule.value("response", "");
  }
  throw Error(ErrorCode::LLM_UNAVAILABLE, "no scripted response for this " + std::string(to_string(kind)) + " prompt",
              {{"prompt_hash", sha256_hex(prompt)}});
}

// --- transcript -------------------------------------------------------------

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

nlohmann::json to_json(const TranscriptEntry& e) {
  nlohmann::json j = {{"kind", std::string(to_string(e.kind))}, {"input_hash", e.input_hash}, {"response", e.response}};
  if (e.error) j["error"] = *e.error;
  j["timestamp"] = e.timestamp;
  return j;
}

TranscriptEntry transcript_entry_from_json(const nlohmann::json& j) {
  TranscriptEntry e;
  auto kind = prompt_kind_from_string(j.at("kind").get<std::string>());
  if (!kind) throw Error(ErrorCode::INVALID_ARGUMENT, "unknown transcript kind " + j.at("kind").dump());
  e.kind = *kind;
  e.input_hash = j.at("input_hash").get<std::string>();
  e.response = j.value("response", "");
  if (j.contains("error") && !j["error"].is_null()) e.error = j["error"];
  e.timestamp = j.value("timestamp", "");
  return e;
}

std::vector<TranscriptEntry> read_transcript(const std::filesystem::path& path) {
  std::vector<TranscriptEntry> out;
  std::ifstream in(path);
  if (!in) return out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(transcript_entry_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::INVALID_ARGUMENT,
                  path.string() + ":" + std::to_string(lineno) + ": bad transcript entry: " + e.what());
    }
  }
  return out;
}

TranscriptBackend::TranscriptBackend(std::filesystem::path path, TranscriptMode mode,
                                     std::shared_ptr<LlmBackend> inner, Clock clock)
    : path_(std::move(path)), mode_(mode), inner_(std::move(inner)), clock_(std::move(clock)) {
  if (!clock_) clock_ = utc_timestamp;
  if (mode_ == TranscriptMode::replay && !std::filesystem::exists(path_)) {
    throw Error(ErrorCode::IO_ERROR, "transcript " + path_.string() + " does not exist");
  }
  if (mode_ == TranscriptMode::record && !inner_) {
    throw Error(ErrorCode::INVALID_ARGUMENT, "recording needs a live backend");
  }
  for (auto& e : read_transcript(path_)) {
    auto key = std::make_pair(e.kind, e.input_hash);
    entries_.try_emplace(std::move(key), std::move(e));
  }
}

std::string TranscriptBackend::id() const {
  return std::string(mode_ == TranscriptMode::replay ? "replay:" : "record:") + path_.filename().string();
}

namespace {

[[noreturn]] void rethrow_recorded(const nlohmann::json& err) {
  ErrorCode code = ErrorCode::LLM_UNAVAILABLE;
  const std::string name = err.value("code", "");
  for (int c = 0; c <= static_cast<int>(ErrorCode::INTERNAL); ++c) {
    if (to_string(static_cast<ErrorCode>(c)) == name) code = static_cast<ErrorCode>(c);
  }
  throw Error(code, err.value("message", "recorded failure"), err.value("detail", nlohmann::json()));
}

}  // namespace

std::string TranscriptBackend::complete(PromptKind kind, const std::string& prompt) {
  const std::string hash = sha256_hex(prompt);
  {
    std::lock_guard lock(mutex_);
    if (auto it = entries_.find({kind, hash}); it != entries_.end()) {
      ++hits_;
      if (it->second.error) rethrow_recorded(*it->second.error);
      return it->second.response;
    }
    ++misses_;
    if (mode_ == TranscriptMode::replay) {
      throw Error(ErrorCode::REPLAY_MISS,
                  "no recorded " + std::string(to_string(kind)) + " response for prompt " + hash.substr(0, 12),
                  {{"kind", std::string(to_string(kind))}, {"input_hash", hash}});
    }
  }
  TranscriptEntry entry{kind, hash, "", std::nullopt, clock_()};
  std::optional<Error> failure;
  try {
    entry.response = inner_->complete(kind, prompt);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::LLM_UNAVAILABLE) throw;
    entry.error = e.to_json();
    failure = e;
  }
  std::lock_guard lock(mutex_);
  auto [it, inserted] = entries_.try_emplace({kind, hash}, entry);
  if (inserted) {
    std::ofstream out(path_, std::ios::app);
    if (!out) throw Error(ErrorCode::IO_ERROR, "cannot append to transcript " + path_.string());
    out << to_json(entry).dump() << '\n';
    out.flush();
  }
  if (failure) throw *failure;
  return entry.response;
}

std::size_t TranscriptBackend::hits() const {
  std::lock_guard lock(mutex_);
  return hits_;
}

std::size_t TranscriptBackend::misses() const {
  std::lock_guard lock(mutex_);
  return misses_;
}

}  // namespace factscope
