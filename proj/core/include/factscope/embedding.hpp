#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <semaphore>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include "factscope/dataset_store.hpp"

namespace factscope {

using EmbeddingVector = std::vector<double>;

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::string id() const = 0;
  virtual std::size_t dim() const = 0;
  // Throws EMPTY_TEXT for blank input, PROVIDER_UNAVAILABLE on transport failure.
  virtual EmbeddingVector embed(std::string_view text) = 0;
};

// Bag of hashed tokens: each lowercase alphanumeric token adds 1 to bucket
// fnv1a64(seed, token) % dim, then the vector is L2-normalised. Text without
// tokens hashes as a single token.
class MockEmbeddingProvider : public EmbeddingProvider {
 public:
  static constexpr std::size_t kDefaultDim = 256;
  static constexpr std::uint64_t kDefaultSeed = 0x5eed;

  explicit MockEmbeddingProvider(std::size_t dim = kDefaultDim, std::uint64_t seed = kDefaultSeed);

  std::string id() const override;
  std::size_t dim() const override { return dim_; }
  EmbeddingVector embed(std::string_view text) override;

  static std::uint64_t hash(std::uint64_t seed, std::string_view token);

 private:
  std::size_t dim_;
  std::uint64_t seed_;
};

struct RemoteEmbeddingOptions {
  std::string base_url = "https://api.openai.com/v1";
  std::string model = "text-embedding-3-small";
  std::string api_key_env = "FACTSCOPE_EMBEDDING_API_KEY";
  std::size_t dim = 1536;
  std::chrono::milliseconds timeout{10000};
  int max_retries = 2;
  int max_concurrency = 4;
  std::optional<std::filesystem::path> cache_dir;  // responses cached by content hash
};

// OpenAI-compatible POST {base_url}/embeddings client.
class RemoteEmbeddingProvider : public EmbeddingProvider {
 public:
  explicit RemoteEmbeddingProvider(RemoteEmbeddingOptions options);

  std::string id() const override;
  std::size_t dim() const override { return options_.dim; }
  EmbeddingVector embed(std::string_view text) override;

 private:
  EmbeddingVector fetch(const std::string& text);

  RemoteEmbeddingOptions options_;
  std::counting_semaphore<64> slots_;
};

// Read-through cache in front of a provider; safe for concurrent use.
class Embedder {
 public:
  explicit Embedder(std::shared_ptr<EmbeddingProvider> provider);

  const EmbeddingVector& embed(std::string_view text);
  std::size_t dim() const { return provider_->dim(); }
  std::string provider_id() const { return provider_->id(); }
  std::size_t cache_size() const;

 private:
  std::shared_ptr<EmbeddingProvider> provider_;
  mutable std::shared_mutex mutex_;
  std::map<std::string, std::unique_ptr<EmbeddingVector>, std::less<>> cache_;
};

// Throws DIMENSION_MISMATCH; 0 when either vector has zero norm.
double cosine(const EmbeddingVector& a, const EmbeddingVector& b);

struct FieldMatch {
  FieldDescriptor field;
  double similarity = 0.0;
};

// Text embedded for a field: "<dataset name>: <field name> (<samples>)".
std::string field_embedding_text(const FieldDescriptor& f, std::string_view dataset_name);

// Precomputed field embeddings for a catalog snapshot.
class FieldIndex {
 public:
  FieldIndex(Embedder& embedder, const DatasetStore& store);
  FieldIndex(Embedder& embedder, std::vector<FieldDescriptor> fields,
             const std::map<std::string, std::string, std::less<>>& dataset_names);

  // Best k fields by cosine similarity, descending; ties by (dataset id,
  // field name). Matches below `floor` are dropped. Throws EMPTY_CATALOG.
  std::vector<FieldMatch> top_k(std::string_view query, std::size_t k = 3,
                                double floor = -1.0) const;

  std::size_t size() const { return fields_.size(); }
  const std::vector<FieldDescriptor>& fields() const { return fields_; }
  const std::vector<std::string>& texts() const { return texts_; }

 private:
  Embedder& embedder_;
  std::vector<FieldDescriptor> fields_;
  std::vector<std::string> texts_;
  std::vector<EmbeddingVector> vectors_;
};

// Distinct dataset ids of the matches, in match order.
std::vector<std::string> candidate_datasets(const std::vector<FieldMatch>& matches);

// (clamp(cos(d, s)) + clamp(cos(d, q))) / 2 with cosines clamped to [0, 1].
double relevance(Embedder& embedder, std::string_view description, std::string_view statement,
                 std::string_view query);

}  // namespace factscope
