#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "factscope/agent.hpp"
#include "factscope/dataset_store.hpp"
#include "factscope/embedding.hpp"
#include "factscope/llm_backend.hpp"
#include "factscope/llm_gateway.hpp"

namespace factscope {

struct Config {
  std::optional<std::filesystem::path> store_dir;

  std::string embedding_provider = "mock";  // mock | remote
  std::size_t mock_dim = MockEmbeddingProvider::kDefaultDim;
  std::uint64_t mock_seed = MockEmbeddingProvider::kDefaultSeed;
  RemoteEmbeddingOptions remote_embedding;

  std::string llm_provider = "chat";  // chat | scripted
  std::optional<std::filesystem::path> script;
  ChatOptions chat;
  int repair_budget = kRepairBudget;

  AgentOptions agent;
  double relevance_threshold = 0.5;

  std::string host = "127.0.0.1";
  int port = 8080;
  int server_threads = 8;
};

// Missing keys keep their defaults; unknown keys are rejected.
Config config_from_json(const nlohmann::json& j);
Config load_config(const std::filesystem::path& path);
nlohmann::json to_json(const Config& c);

// Digest of the settings that shape retrieval results (embedding, agent,
// thresholds). Paths, ports and credentials are excluded.
std::string config_digest(const Config& c);

struct TranscriptChoice {
  std::filesystem::path path;
  TranscriptMode mode = TranscriptMode::replay;
};

// The wired object graph behind the CLI and the HTTP service.
struct Runtime {
  Config config;
  std::unique_ptr<DatasetStore> store;
  std::shared_ptr<LlmBackend> backend;
  std::shared_ptr<TranscriptBackend> transcript;  // set when recording or replaying
  std::unique_ptr<Embedder> embedder;
  std::unique_ptr<LlmGateway> gateway;
  std::unique_ptr<Agent> agent;

  static std::unique_ptr<Runtime> build(Config config, std::optional<TranscriptChoice> transcript = std::nullopt);
};

}  // namespace factscope
