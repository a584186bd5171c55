#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "factscope/error.hpp"
#include "factscope/prompts.hpp"

namespace factscope {

class LlmBackend {
 public:
  virtual ~LlmBackend() = default;
  virtual std::string id() const = 0;
  // Raw completion text. Throws LLM_UNAVAILABLE on transport failure.
  virtual std::string complete(PromptKind kind, const std::string& prompt) = 0;
};

struct ChatOptions {
  std::string base_url = "https://api.openai.com/v1";
  std::string model = "gpt-4o";
  std::string api_key_env = "FACTSCOPE_LLM_API_KEY";
  double temperature = 0.0;
  std::chrono::milliseconds timeout{60000};
  int max_retries = 2;
  int max_concurrency = 4;
};

// OpenAI-compatible POST {base_url}/chat/completions client.
class ChatCompletionBackend : public LlmBackend {
 public:
  explicit ChatCompletionBackend(ChatOptions options);
  std::string id() const override { return "chat:" + options_.model; }
  std::string complete(PromptKind kind, const std::string& prompt) override;

 private:
  ChatOptions options_;
  std::counting_semaphore<64> slots_;
};

class FunctionBackend : public LlmBackend {
 public:
  using Fn = std::function<std::string(PromptKind, const std::string&)>;
  explicit FunctionBackend(Fn fn, std::string id = "function") : fn_(std::move(fn)), id_(std::move(id)) {}
  std::string id() const override { return id_; }
  std::string complete(PromptKind kind, const std::string& prompt) override { return fn_(kind, prompt); }

 private:
  Fn fn_;
  std::string id_;
};

// Canned responses selected by substring rules, in file order:
//   {"rules": [{"kind": "decompose", "contains": ["..."], "response": "..."},
//              {"kind": "plan", "contains": [...], "fail": true},
//              {"kind": "evaluate", "contains": [...], "per_fact": [
//                  {"contains": ["..."], "support": 0.8, "oppose": 0.2, "explanation": "..."}],
//               "default_fact": {"support": 0.5, "oppose": 0.5, "explanation": "..."}}]}
// An evaluate rule answers for each fact listed in the prompt using the first
// per_fact entry whose strings all occur in that fact's JSON.
class ScriptedBackend : public LlmBackend {
 public:
  explicit ScriptedBackend(nlohmann::json script);
  static ScriptedBackend from_file(const std::filesystem::path& path);

  std::string id() const override { return "scripted"; }
  std::string complete(PromptKind kind, const std::string& prompt) override;

 private:
  nlohmann::json rules_;
};

struct TranscriptEntry {
  PromptKind kind;
  std::string input_hash;
  std::string response;
  std::optional<nlohmann::json> error;  // ApiError-shaped when the call failed
  std::string timestamp;
};
nlohmann::json to_json(const TranscriptEntry& e);
TranscriptEntry transcript_entry_from_json(const nlohmann::json& j);
std::vector<TranscriptEntry> read_transcript(const std::filesystem::path& path);

enum class TranscriptMode { record, replay };

// Record: answers known (kind, sha256(prompt)) pairs from the file, forwards
// the rest to the inner backend and appends the outcome before returning it.
// Replay: answers only from the file; a miss throws REPLAY_MISS.
class TranscriptBackend : public LlmBackend {
 public:
  using Clock = std::function<std::string()>;

  TranscriptBackend(std::filesystem::path path, TranscriptMode mode, std::shared_ptr<LlmBackend> inner = nullptr,
                    Clock clock = {});

  std::string id() const override;
  std::string complete(PromptKind kind, const std::string& prompt) override;

  const std::filesystem::path& path() const { return path_; }
  TranscriptMode mode() const { return mode_; }
  std::size_t hits() const;
  std::size_t misses() const;

 private:
  std::filesystem::path path_;
  TranscriptMode mode_;
  std::shared_ptr<LlmBackend> inner_;
  Clock clock_;
  mutable std::mutex mutex_;
  std::map<std::pair<PromptKind, std::string>, TranscriptEntry> entries_;
  std::size_t hits_ = 0;
  std::size_t misses_ = 0;
};

std::string utc_timestamp();

}  // namespace factscope
