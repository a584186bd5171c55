#pragma once

#include <chrono>
#include <string>

#include <nlohmann/json.hpp>

#include "factscope/error.hpp"

namespace factscope::http {

struct Endpoint {
  std::string scheme_host_port;  // "https://api.example.com:443"
  std::string path_prefix;       // "/v1"
};

// Splits "https://host[:port]/prefix" into its origin and path.
Endpoint parse_base_url(const std::string& base_url);

// POSTs JSON and returns the parsed body. Retries transport errors and 5xx/429
// responses up to `max_retries` times; throws Error(failure_code) afterwards.
nlohmann::json post_json(const std::string& base_url, const std::string& path, const nlohmann::json& body,
                         const std::string& bearer_token, std::chrono::milliseconds timeout, int max_retries,
                         ErrorCode failure_code);

}  // namespace factscope::http
