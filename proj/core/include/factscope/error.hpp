#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace factscope {

// Error codes shared by every module. The HTTP layer maps them onto status
// codes; the CLI prints them as ApiError-shaped JSON.
enum class ErrorCode {
  // dataset_store
  EMPTY_SOURCE,
  RAGGED_ROWS,
  DUPLICATE_FIELD,
  UNKNOWN_DATASET,
  EXECUTION_FAILURE,
  IO_ERROR,
  // fact_model
  MALFORMED,
  UNKNOWN_TYPE,
  UNKNOWN_AGGREGATE,
  INVALID_FACT,
  // fact_engine
  EMPTY_SUBSPACE,
  DEGENERATE,
  // embedding_relevance
  EMPTY_TEXT,
  EMPTY_CATALOG,
  PROVIDER_UNAVAILABLE,
  DIMENSION_MISMATCH,
  // llm_gateway
  LLM_UNAVAILABLE,
  MALFORMED_RESPONSE,
  EMPTY_RESPONSE,
  REPLAY_MISS,
  // retrieval_tree
  EMPTY_STATEMENT,
  UNKNOWN_NODE,
  UNKNOWN_SESSION,
  NODE_BUSY,
  CORRUPT_BLOB,
  INVALID_ARGUMENT,
  // service
  BAD_REQUEST,
  NOT_FOUND,
  INTERNAL,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, nlohmann::json detail = nullptr)
      : std::runtime_error(message), code_(code), detail_(std::move(detail)) {}

  ErrorCode code() const noexcept { return code_; }
  const nlohmann::json& detail() const noexcept { return detail_; }

  // {"code": ..., "message": ..., "detail": ...}
  nlohmann::json to_json() const;

 private:
  ErrorCode code_;
  nlohmann::json detail_;
};

}  // namespace factscope
