#include "factscope/error.hpp"

namespace factscope {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::EMPTY_SOURCE: return "EMPTY_SOURCE";
    case ErrorCode::RAGGED_ROWS: return "RAGGED_ROWS";
    case ErrorCode::DUPLICATE_FIELD: return "DUPLICATE_FIELD";
    case ErrorCode::UNKNOWN_DATASET: return "UNKNOWN_DATASET";
    case ErrorCode::EXECUTION_FAILURE: return "EXECUTION_FAILURE";
    case ErrorCode::IO_ERROR: return "IO_ERROR";
    case ErrorCode::MALFORMED: return "MALFORMED";
    case ErrorCode::UNKNOWN_TYPE: return "UNKNOWN_TYPE";
    case ErrorCode::UNKNOWN_AGGREGATE: return "UNKNOWN_AGGREGATE";
    case ErrorCode::INVALID_FACT: return "INVALID_FACT";
    case ErrorCode::EMPTY_SUBSPACE: return "EMPTY_SUBSPACE";
    case ErrorCode::DEGENERATE: return "DEGENERATE";
    case ErrorCode::EMPTY_TEXT: return "EMPTY_TEXT";
    case ErrorCode::EMPTY_CATALOG: return "EMPTY_CATALOG";
    case ErrorCode::PROVIDER_UNAVAILABLE: return "PROVIDER_UNAVAILABLE";
    case ErrorCode::DIMENSION_MISMATCH: return "DIMENSION_MISMATCH";
    case ErrorCode::LLM_UNAVAILABLE: return "LLM_UNAVAILABLE";
    case ErrorCode::MALFORMED_RESPONSE: return "MALFORMED_RESPONSE";
    case ErrorCode::EMPTY_RESPONSE: return "EMPTY_RESPONSE";
    case ErrorCode::REPLAY_MISS: return "REPLAY_MISS";
    case ErrorCode::EMPTY_STATEMENT: return "EMPTY_STATEMENT";
    case ErrorCode::UNKNOWN_NODE: return "UNKNOWN_NODE";
    case ErrorCode::UNKNOWN_SESSION: return "UNKNOWN_SESSION";
    case ErrorCode::NODE_BUSY: return "NODE_BUSY";
    case ErrorCode::CORRUPT_BLOB: return "CORRUPT_BLOB";
    case ErrorCode::INVALID_ARGUMENT: return "INVALID_ARGUMENT";
    case ErrorCode::BAD_REQUEST: return "BAD_REQUEST";
    case ErrorCode::NOT_FOUND: return "NOT_FOUND";
    case ErrorCode::INTERNAL: return "INTERNAL";
  }
  return "INTERNAL";
}

nlohmann::json Error::to_json() const {
  nlohmann::json j = {{"code", std::string(to_string(code_))}, {"message", what()}};
  if (!detail_.is_null()) j["detail"] = detail_;
  return j;
}

}  // namespace factscope
