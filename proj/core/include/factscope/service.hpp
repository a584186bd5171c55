#pragma once

#include <atomic>
#include <memory>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "factscope/config.hpp"
#include "factscope/error.hpp"
#include "factscope/session.hpp"

namespace factscope {

int http_status(ErrorCode code);

struct ApiResponse {
  int status = 200;
  nlohmann::json body;
};

// The /v1 JSON API. `dispatch` is transport-free so it can be driven
// directly; `listen` serves it over HTTP.
class Service {
 public:
  explicit Service(Runtime& runtime);
  ~Service();

  ApiResponse dispatch(std::string_view method, std::string_view path, std::string_view body);

  // Blocks until stop(). Port 0 picks a free port, readable via port().
  void listen(const std::string& host, int port);
  bool bind(const std::string& host, int port);  // bind only; then serve()
  void serve();
  void stop();
  int port() const { return port_.load(); }

  SessionManager& sessions() { return sessions_; }

 private:
  struct Server;
  ApiResponse route(std::string_view method, std::string_view path, const nlohmann::json& body);

  Runtime& runtime_;
  SessionManager sessions_;
  std::unique_ptr<Server> server_;
  std::atomic<int> port_{0};
};

}  // namespace factscope
