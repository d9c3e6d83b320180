#include "naqsql/retriever.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "http_util.hpp"
#include "naqsql/error.hpp"

namespace naqsql {

using nlohmann::json;

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw DimensionMismatch("vector dimensions differ: " + std::to_string(a.size()) + " vs " +
                            std::to_string(b.size()));
  }
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) throw ZeroVector("cosine similarity of a zero vector");
  const double sim = dot / (std::sqrt(na) * std::sqrt(nb));
  return std::clamp(sim, -1.0, 1.0);
}

// ---------------------------------------------------------------------------

OfflineEmbeddings::OfflineEmbeddings(std::map<std::string, Vector> vectors) : vectors_(std::move(vectors)) {}

std::shared_ptr<OfflineEmbeddings> OfflineEmbeddings::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open embeddings file " + path.string());
  try {
    auto out = std::make_shared<OfflineEmbeddings>(json::parse(in).get<std::map<std::string, Vector>>());
    out->source_ = path.string();
    return out;
  } catch (const json::exception& e) {
    throw ParseError("embeddings file " + path.string() + ": " + e.what());
  }
}

Vector OfflineEmbeddings::embed_text(const std::string& text) {
  if (text.empty()) throw EmbeddingError("cannot embed empty text");
  auto it = vectors_.find(text);
  if (it == vectors_.end()) throw MissingVector("no precomputed vector for: " + text);
  return it->second;
}

// ---------------------------------------------------------------------------

HttpEmbeddings::HttpEmbeddings(HttpEmbeddingOptions options) : options_(std::move(options)) {
  std::tie(base_, path_) = detail::split_url(options_.endpoint);
}

Vector HttpEmbeddings::embed_text(const std::string& text) {
  if (text.empty()) throw EmbeddingError("cannot embed empty text");
  {
    std::lock_guard lock(mutex_);
    if (auto it = memo_.find(text); it != memo_.end()) return it->second;
  }
  const json payload = {{"model", options_.model}, {"input", text}};
  detail::HttpRetryPolicy policy{options_.timeout, options_.max_retries, std::chrono::milliseconds(500), {}};
  const auto outcome = detail::post_json(base_, path_, payload, policy);
  if (outcome.failure != detail::HttpFailure::None) {
    throw EmbeddingError("embedding endpoint " + options_.endpoint + " failed: " + outcome.detail);
  }
  Vector v;
  try {
    v = json::parse(outcome.body).at("data").at(0).at("embedding").get<Vector>();
  } catch (const json::exception& e) {
    throw EmbeddingError("embedding endpoint returned an unexpected body: " + std::string(e.what()));
  }
  std::lock_guard lock(mutex_);
  return memo_.emplace(text, std::move(v)).first->second;
}

// ---------------------------------------------------------------------------

ExampleStore::ExampleStore(Label pool_kind, std::vector<EmbeddedExample> entries)
    : pool_kind_(pool_kind), entries_(std::move(entries)) {
  for (const auto& e : entries_) {
    if (e.item.label != pool_kind_) {
      throw ValidationError("example '" + e.item.id + "' does not belong to the " +
                            std::string(to_string(pool_kind_)) + " pool");
    }
    if (e.vector.empty()) throw ValidationError("example '" + e.item.id + "' has an empty vector");
    if (dimension_ == 0) dimension_ = e.vector.size();
    if (e.vector.size() != dimension_) {
      throw DimensionMismatch("example '" + e.item.id + "' has dimension " + std::to_string(e.vector.size()) +
                              ", store uses " + std::to_string(dimension_));
    }
    const double norm2 = std::inner_product(e.vector.begin(), e.vector.end(), e.vector.begin(), 0.0);
    if (norm2 == 0.0) throw ZeroVector("example '" + e.item.id + "' has a zero vector");
  }
}

ExampleStore ExampleStore::build(Label pool_kind, const std::vector<QuestionItem>& items,
                                 EmbeddingProvider& embedder) {
  std::vector<EmbeddedExample> entries;
  for (const auto& item : items) {
    if (item.label != pool_kind) continue;
    entries.push_back({item, embedder.embed_text(item.question)});
  }
  return ExampleStore(pool_kind, std::move(entries));
}

std::vector<QuestionItem> top_k_similar(std::span<const double> query, const ExampleStore& store, std::size_t k,
                                        const std::optional<std::string>& exclude_id) {
  if (k == 0) return {};

  struct Scored {
    double similarity;
    std::size_t index;
  };
  std::vector<Scored> scored;
  const auto& entries = store.entries();
  scored.reserve(entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (exclude_id && entries[i].item.id == *exclude_id) continue;
    scored.push_back({cosine_similarity(query, entries[i].vector), i});
  }
  const std::size_t n = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(n), scored.end(),
                    [](const Scored& a, const Scored& b) {
                      if (a.similarity != b.similarity) return a.similarity > b.similarity;
                      return a.index < b.index;
                    });
  std::vector<QuestionItem> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(entries[scored[i].index].item);
  return out;
}

}  // namespace naqsql
