#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "naqsql/dataset.hpp"

namespace naqsql {

using Vector = std::vector<double>;

// dot(a, b) / (|a| |b|). Throws DimensionMismatch or ZeroVector.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  // Throws EmbeddingError (or MissingVector for offline lookups).
  virtual Vector embed_text(const std::string& text) = 0;
  virtual std::string describe() const = 0;
};

// Precomputed vectors keyed by exact question text.
class OfflineEmbeddings final : public EmbeddingProvider {
 public:
  explicit OfflineEmbeddings(std::map<std::string, Vector> vectors);
  static std::shared_ptr<OfflineEmbeddings> from_file(const std::filesystem::path& path);

  Vector embed_text(const std::string& text) override;
  std::string describe() const override { return "offline:" + source_; }
  std::size_t size() const { return vectors_.size(); }

 private:
  std::map<std::string, Vector> vectors_;
  std::string source_ = "memory";
};

struct HttpEmbeddingOptions {
  // OpenAI-compatible embeddings route, e.g. http://localhost:8080/v1/embeddings
  std::string endpoint;
  std::string model = "Alibaba-NLP/gte-Qwen2-1.5B-instruct";
  std::chrono::milliseconds timeout{60'000};
  int max_retries = 2;
};

// Live provider. Results are memoised so the same text always maps to the
// same vector within one process.
class HttpEmbeddings final : public EmbeddingProvider {
 public:
  explicit HttpEmbeddings(HttpEmbeddingOptions options);

  Vector embed_text(const std::string& text) override;
  std::string describe() const override { return "http:" + options_.endpoint + " model=" + options_.model; }

 private:
  HttpEmbeddingOptions options_;
  std::string base_;
  std::string path_;
  std::mutex mutex_;
  std::map<std::string, Vector> memo_;
};

struct EmbeddedExample {
  QuestionItem item;
  Vector vector;
};

// Immutable pool of few-shot candidates, all answerable or all unanswerable.
class ExampleStore {
 public:
  ExampleStore(Label pool_kind, std::vector<EmbeddedExample> entries);

  // Embeds every item of `items` whose label matches `pool_kind`.
  static ExampleStore build(Label pool_kind, const std::vector<QuestionItem>& items, EmbeddingProvider& embedder);

  Label pool_kind() const { return pool_kind_; }
  std::size_t dimension() const { return dimension_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const std::vector<EmbeddedExample>& entries() const { return entries_; }

 private:
  Label pool_kind_;
  std::vector<EmbeddedExample> entries_;
  std::size_t dimension_ = 0;
};

// The k entries most similar to `query`, best first. Entries whose id equals
// `exclude_id` are skipped; ties keep store order.
std::vector<QuestionItem> top_k_similar(std::span<const double> query, const ExampleStore& store, std::size_t k,
                                        const std::optional<std::string>& exclude_id = std::nullopt);

}  // namespace naqsql
