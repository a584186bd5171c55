#include <cstdlib>
#include <fstream>
#include <thread>

#include <httplib.h>

#include "factscope/digest.hpp"
#include "factscope/embedding.hpp"
#include "factscope/error.hpp"
#include "factscope/http_client.hpp"
#include "factscope/text_util.hpp"

namespace factscope {

namespace http {

Endpoint parse_base_url(const std::string& base_url) {
  const auto scheme_end = base_url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorCode::INVALID_ARGUMENT, "base URL '" + base_url + "' has no scheme");
  }
  const auto path_start = base_url.find('/', scheme_end + 3);
  Endpoint e;
  e.scheme_host_port = base_url.substr(0, path_start);
  if (path_start != std::string::npos) e.path_prefix = base_url.substr(path_start);
  while (!e.path_prefix.empty() && e.path_prefix.back() == '/') e.path_prefix.pop_back();
  return e;
}

nlohmann::json post_json(const std::string& base_url, const std::string& path, const nlohmann::json& body,
                         const std::string& bearer_token, std::chrono::milliseconds timeout, int max_retries,
                         ErrorCode code) {
  const Endpoint ep = parse_base_url(base_url);
  httplib::Client client(ep.scheme_host_port);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
  httplib::Headers headers;
  if (!bearer_token.empty()) headers.emplace("Authorization", "Bearer " + bearer_token);
  const std::string payload = body.dump();
  std::string last_error;
  for (int attempt = 0; attempt <= max_retries; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(std::chrono::milliseconds(200 << attempt));
    auto res = client.Post(ep.path_prefix + path, headers, payload, "application/json");
    if (!res) {
      last_error = httplib::to_string(res.error());
      continue;
    }
    if (res->status == 429 || res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) {
      throw Error(code, "HTTP " + std::to_string(res->status) + " from " + base_url + path,
                  {{"status", res->status}, {"body", res->body.substr(0, 500)}});
    }
    try {
      return nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::exception& e) {
      throw Error(code, std::string("unparseable response body: ") + e.what());
    }
  }
  throw Error(code, "request to " + base_url + path + " failed after " + std::to_string(max_retries + 1) +
                        " attempts: " + last_error);
}

}  // namespace http

RemoteEmbeddingProvider::RemoteEmbeddingProvider(RemoteEmbeddingOptions options)
    : options_(std::move(options)), slots_(std::clamp(options_.max_concurrency, 1, 64)) {
  if (options_.cache_dir) std::filesystem::create_directories(*options_.cache_dir);
}

std::string RemoteEmbeddingProvider::id() const { return "remote:" + options_.model; }

EmbeddingVector RemoteEmbeddingProvider::embed(std::string_view text) {
  const std::string trimmed = text::trim(text);
  if (trimmed.empty()) throw Error(ErrorCode::EMPTY_TEXT, "cannot embed empty text");
  std::optional<std::filesystem::path> cached;
  if (options_.cache_dir) {
    cached = *options_.cache_dir / (sha256_hex(options_.model + "\n" + std::string(text)) + ".json");
    std::ifstream in(*cached);
    if (in) {
      try {
        auto v = nlohmann::json::parse(in).get<EmbeddingVector>();
        if (v.size() == options_.dim) return v;
      } catch (const nlohmann::json::exception&) {
      }
    }
  }
  EmbeddingVector v = fetch(std::string(text));
  if (cached) {
    std::ofstream out(*cached);
    out << nlohmann::json(v).dump();
  }
  return v;
}

EmbeddingVector RemoteEmbeddingProvider::fetch(const std::string& text) {
  const char* key = std::getenv(options_.api_key_env.c_str());
  slots_.acquire();
  nlohmann::json res;
  try {
    res = http::post_json(options_.base_url, "/embeddings", {{"model", options_.model}, {"input", text}},
                          key ? key : "", options_.timeout, options_.max_retries,
                          ErrorCode::PROVIDER_UNAVAILABLE);
  } catch (...) {
    slots_.release();
    throw;
  }
  slots_.release();
  EmbeddingVector v;
  try {
    v = res.at("data").at(0).at("embedding").get<EmbeddingVector>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::PROVIDER_UNAVAILABLE, std::string("unexpected embedding response: ") + e.what());
  }
  if (v.size() != options_.dim) {
    throw Error(ErrorCode::DIMENSION_MISMATCH,
                "provider returned " + std::to_string(v.size()) + " dims, configured " + std::to_string(options_.dim));
  }
  return v;
}

}  // namespace factscope
