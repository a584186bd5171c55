#include "factscope/config.hpp"

#include <fstream>
#include <set>

#include "factscope/digest.hpp"
#include "factscope/error.hpp"

namespace factscope {

namespace {

void reject_unknown(const nlohmann::json& j, std::string_view section, std::set<std::string> known) {
  if (!j.is_object()) throw Error(ErrorCode::INVALID_ARGUMENT, "config section '" + std::string(section) + "' must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!known.count(it.key())) {
      throw Error(ErrorCode::INVALID_ARGUMENT,
                  "unknown config key '" + std::string(section) + (section.empty() ? "" : ".") + it.key() + "'");
    }
  }
}

template <typename T>
void take(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

Config config_from_json(const nlohmann::json& j) {
  Config c;
  try {
    reject_unknown(j, "", {"store", "embedding", "llm", "agent", "tree", "server"});
    if (j.contains("store") && !j["store"].is_null()) c.store_dir = j["store"].get<std::string>();
    if (j.contains("embedding")) {
      const auto& e = j["embedding"];
      reject_unknown(e, "embedding", {"provider", "dim", "seed", "remote"});
      take(e, "provider", c.embedding_provider);
      take(e, "dim", c.mock_dim);
      take(e, "seed", c.mock_seed);
      if (e.contains("remote")) {
        const auto& r = e["remote"];
        reject_unknown(r, "embedding.remote",
                       {"base_url", "model", "api_key_env", "dim", "timeout_ms", "max_retries", "max_concurrency",
                        "cache_dir"});
        auto& o = c.remote_embedding;
        take(r, "base_url", o.base_url);
        take(r, "model", o.model);
        take(r, "api_key_env", o.api_key_env);
        take(r, "dim", o.dim);
        if (r.contains("timeout_ms")) o.timeout = std::chrono::milliseconds(r["timeout_ms"].get<long>());
        take(r, "max_retries", o.max_retries);
        take(r, "max_concurrency", o.max_concurrency);
        if (r.contains("cache_dir") && !r["cache_dir"].is_null()) o.cache_dir = r["cache_dir"].get<std::string>();
      }
    }
    if (j.contains("llm")) {
      const auto& l = j["llm"];
      reject_unknown(l, "llm", {"provider", "script", "base_url", "model", "api_key_env", "temperature", "timeout_ms",
                                "max_retries", "max_concurrency", "repair_budget"});
      take(l, "provider", c.llm_provider);
      if (l.contains("script") && !l["script"].is_null()) c.script = l["script"].get<std::string>();
      take(l, "base_url", c.chat.base_url);
      take(l, "model", c.chat.model);
      take(l, "api_key_env", c.chat.api_key_env);
      take(l, "temperature", c.chat.temperature);
      if (l.contains("timeout_ms")) c.chat.timeout = std::chrono::milliseconds(l["timeout_ms"].get<long>());
      take(l, "max_retries", c.chat.max_retries);
      take(l, "max_concurrency", c.chat.max_concurrency);
      take(l, "repair_budget", c.repair_budget);
    }
    if (j.contains("agent")) {
      const auto& a = j["agent"];
      reject_unknown(a, "agent", {"top_k", "similarity_floor", "sql_repair_rounds", "sample_rows", "series_hint_limit"});
      take(a, "top_k", c.agent.top_k);
      take(a, "similarity_floor", c.agent.similarity_floor);
      take(a, "sql_repair_rounds", c.agent.sql_repair_rounds);
      take(a, "sample_rows", c.agent.sample_rows);
      take(a, "series_hint_limit", c.agent.series_hint_limit);
    }
    if (j.contains("tree")) {
      reject_unknown(j["tree"], "tree", {"relevance_threshold"});
      take(j["tree"], "relevance_threshold", c.relevance_threshold);
    }
    if (j.contains("server")) {
      reject_unknown(j["server"], "server", {"host", "port", "threads"});
      take(j["server"], "host", c.host);
      take(j["server"], "port", c.port);
      take(j["server"], "threads", c.server_threads);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::INVALID_ARGUMENT, std::string("bad config value: ") + e.what());
  }
  if (c.embedding_provider != "mock" && c.embedding_provider != "remote") {
    throw Error(ErrorCode::INVALID_ARGUMENT, "embedding.provider must be mock or remote");
  }
  if (c.llm_provider != "chat" && c.llm_provider != "scripted") {
    throw Error(ErrorCode::INVALID_ARGUMENT, "llm.provider must be chat or scripted");
  }
  return c;
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IO_ERROR, "cannot open config " + path.string());
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::INVALID_ARGUMENT, "config " + path.string() + " is not valid JSON");
  Config c = config_from_json(j);
  // Relative paths in the file are relative to the file.
  const auto base = path.parent_path();
  auto rebase = [&](std::optional<std::filesystem::path>& p) {
    if (p && p->is_relative()) p = base / *p;
  };
  rebase(c.store_dir);
  rebase(c.script);
  rebase(c.remote_embedding.cache_dir);
  return c;
}

nlohmann::json to_json(const Config& c) {
  auto path = [](const std::optional<std::filesystem::path>& p) {
    return p ? nlohmann::json(p->string()) : nlohmann::json(nullptr);
  };
  const auto& r = c.remote_embedding;
  return {{"store", path(c.store_dir)},
          {"embedding",
           {{"provider", c.embedding_provider},
            {"dim", c.mock_dim},
            {"seed", c.mock_seed},
            {"remote",
             {{"base_url", r.base_url},
              {"model", r.model},
              {"api_key_env", r.api_key_env},
              {"dim", r.dim},
              {"timeout_ms", r.timeout.count()},
              {"max_retries", r.max_retries},
              {"max_concurrency", r.max_concurrency},
              {"cache_dir", path(r.cache_dir)}}}}},
          {"llm",
           {{"provider", c.llm_provider},
            {"script", path(c.script)},
            {"base_url", c.chat.base_url},
            {"model", c.chat.model},
            {"api_key_env", c.chat.api_key_env},
            {"temperature", c.chat.temperature},
            {"timeout_ms", c.chat.timeout.count()},
            {"max_retries", c.chat.max_retries},
            {"max_concurrency", c.chat.max_concurrency},
            {"repair_budget", c.repair_budget}}},
          {"agent",
           {{"top_k", c.agent.top_k},
            {"similarity_floor", c.agent.similarity_floor},
            {"sql_repair_rounds", c.agent.sql_repair_rounds},
            {"sample_rows", c.agent.sample_rows},
            {"series_hint_limit", c.agent.series_hint_limit}}},
          {"tree", {{"relevance_threshold", c.relevance_threshold}}},
          {"server", {{"host", c.host}, {"port", c.port}, {"threads", c.server_threads}}}};
}

std::string config_digest(const Config& c) {
  nlohmann::json j = to_json(c);
  nlohmann::json e = j["embedding"];
  if (c.embedding_provider == "mock") {
    e.erase("remote");
  } else {
    e["remote"].erase("cache_dir");
    e["remote"].erase("api_key_env");
  }
  const nlohmann::json material = {{"embedding", e}, {"agent", j["agent"]}, {"tree", j["tree"]},
                                   {"repair_budget", c.repair_budget}};
  return sha256_hex(material.dump());
}

std::unique_ptr<Runtime> Runtime::build(Config config, std::optional<TranscriptChoice> transcript) {
  auto rt = std::make_unique<Runtime>();
  rt->config = std::move(config);
  const Config& c = rt->config;
  rt->store = c.store_dir ? std::make_unique<DatasetStore>(*c.store_dir) : std::make_unique<DatasetStore>();

  std::shared_ptr<EmbeddingProvider> provider;
  if (c.embedding_provider == "mock") provider = std::make_shared<MockEmbeddingProvider>(c.mock_dim, c.mock_seed);
  else provider = std::make_shared<RemoteEmbeddingProvider>(c.remote_embedding);
  rt->embedder = std::make_unique<Embedder>(provider);

  auto live = [&]() -> std::shared_ptr<LlmBackend> {
    if (c.llm_provider == "scripted") {
      if (!c.script) throw Error(ErrorCode::INVALID_ARGUMENT, "llm.provider scripted needs llm.script");
      return std::make_shared<ScriptedBackend>(ScriptedBackend::from_file(*c.script));
    }
    return std::make_shared<ChatCompletionBackend>(c.chat);
  };
  if (transcript && transcript->mode == TranscriptMode::replay) {
    rt->transcript = std::make_shared<TranscriptBackend>(transcript->path, TranscriptMode::replay);
    rt->backend = rt->transcript;
  } else if (transcript) {
    rt->transcript = std::make_shared<TranscriptBackend>(transcript->path, TranscriptMode::record, live());
    rt->backend = rt->transcript;
  } else {
    rt->backend = live();
  }
  rt->gateway = std::make_unique<LlmGateway>(rt->backend, c.repair_budget);
  rt->agent = std::make_unique<Agent>(*rt->store, *rt->embedder, *rt->gateway, c.agent);
  return rt;
}

}  // namespace factscope
