#include "factscope/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>

#include "factscope/error.hpp"
#include "factscope/text_util.hpp"

namespace factscope {

MockEmbeddingProvider::MockEmbeddingProvider(std::size_t dim, std::uint64_t seed) : dim_(dim), seed_(seed) {
  if (dim_ == 0) throw Error(ErrorCode::INVALID_ARGUMENT, "embedding dimension must be positive");
}

std::string MockEmbeddingProvider::id() const {
  return "mock-hash-" + std::to_string(dim_) + "-" + std::to_string(seed_);
}

std::uint64_t MockEmbeddingProvider::hash(std::uint64_t seed, std::string_view token) {
  std::uint64_t h = 0xcbf29ce484222325ULL ^ seed;
  for (unsigned char c : token) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

EmbeddingVector MockEmbeddingProvider::embed(std::string_view text) {
  const std::string trimmed = text::trim(text);
  if (trimmed.empty()) throw Error(ErrorCode::EMPTY_TEXT, "cannot embed empty text");
  auto tokens = text::tokenize(trimmed);
  if (tokens.empty()) tokens.push_back(trimmed);
  EmbeddingVector v(dim_, 0.0);
  for (const auto& t : tokens) v[hash(seed_, t) % dim_] += 1.0;
  double norm = 0.0;
  for (double x : v) norm += x * x;
  norm = std::sqrt(norm);
  for (double& x : v) x /= norm;
  return v;
}

Embedder::Embedder(std::shared_ptr<EmbeddingProvider> provider) : provider_(std::move(provider)) {}

const EmbeddingVector& Embedder::embed(std::string_view text) {
  {
    std::shared_lock lock(mutex_);
    if (auto it = cache_.find(text); it != cache_.end()) return *it->second;
  }
  auto v = std::make_unique<EmbeddingVector>(provider_->embed(text));
  if (v->size() != provider_->dim()) {
    throw Error(ErrorCode::DIMENSION_MISMATCH, "provider returned " + std::to_string(v->size()) +
                                                   " dimensions, expected " + std::to_string(provider_->dim()));
  }
  std::unique_lock lock(mutex_);
  auto [it, inserted] = cache_.try_emplace(std::string(text), std::move(v));
  return *it->second;
}

std::size_t Embedder::cache_size() const {
  std::shared_lock lock(mutex_);
  return cache_.size();
}

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::DIMENSION_MISMATCH,
                "cosine of vectors with " + std::to_string(a.size()) + " and " + std::to_string(b.size()) + " dims");
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  if (a == b) return 1.0;
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

std::string field_embedding_text(const FieldDescriptor& f, std::string_view dataset_name) {
  std::string s = std::string(dataset_name) + ": " + f.name;
  if (!f.sample_values.empty()) {
    s += " (";
    for (std::size_t i = 0; i < f.sample_values.size(); ++i) {
      if (i) s += ", ";
      s += cell_text(f.sample_values[i]);
    }
    s += ")";
  }
  return s;
}

namespace {

std::map<std::string, std::string, std::less<>> names_of(const DatasetStore& store) {
  std::map<std::string, std::string, std::less<>> out;
  for (const auto& d : store.datasets()) out[d->id] = d->name;
  return out;
}

}  // namespace

FieldIndex::FieldIndex(Embedder& embedder, const DatasetStore& store)
    : FieldIndex(embedder, store.list_fields(), names_of(store)) {}

FieldIndex::FieldIndex(Embedder& embedder, std::vector<FieldDescriptor> fields,
                       const std::map<std::string, std::string, std::less<>>& dataset_names)
    : embedder_(embedder), fields_(std::move(fields)) {
  std::sort(fields_.begin(), fields_.end(), [](const FieldDescriptor& a, const FieldDescriptor& b) {
    return std::tie(a.dataset_id, a.name) < std::tie(b.dataset_id, b.name);
  });
  for (const auto& f : fields_) {
    auto it = dataset_names.find(f.dataset_id);
    texts_.push_back(field_embedding_text(f, it == dataset_names.end() ? f.dataset_id : it->second));
    vectors_.push_back(embedder_.embed(texts_.back()));
  }
}

std::vector<FieldMatch> FieldIndex::top_k(std::string_view query, std::size_t k, double floor) const {
  if (fields_.empty()) throw Error(ErrorCode::EMPTY_CATALOG, "the field catalog is empty");
  const EmbeddingVector& q = embedder_.embed(query);
  std::vector<std::pair<double, std::size_t>> scored;
  scored.reserve(fields_.size());
  for (std::size_t i = 0; i < fields_.size(); ++i) scored.emplace_back(cosine(q, vectors_[i]), i);
  // fields_ is sorted by (dataset id, name), so the index breaks ties.
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  std::vector<FieldMatch> out;
  for (const auto& [sim, i] : scored) {
    if (out.size() == k) break;
    if (sim < floor) break;
    out.push_back({fields_[i], sim});
  }
  return out;
}

std::vector<std::string> candidate_datasets(const std::vector<FieldMatch>& matches) {
  std::vector<std::string> out;
  for (const auto& m : matches) {
    if (std::find(out.begin(), out.end(), m.field.dataset_id) == out.end()) out.push_back(m.field.dataset_id);
  }
  return out;
}

double relevance(Embedder& embedder, std::string_view description, std::string_view statement,
                 std::string_view query) {
  const EmbeddingVector& d = embedder.embed(description);
  const double c1 = std::clamp(cosine(d, embedder.embed(statement)), 0.0, 1.0);
  const double c2 = std::clamp(cosine(d, embedder.embed(query)), 0.0, 1.0);
  return (c1 + c2) / 2.0;
}

}  // namespace factscope
