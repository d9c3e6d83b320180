#include "oracles.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <variant>

namespace oracle {

using naqsql::Cell;
using naqsql::ResultTable;

namespace {

std::optional<double> as_number(const Cell& c) {
  if (const auto* i = std::get_if<std::int64_t>(&c)) return static_cast<double>(*i);
  if (const auto* d = std::get_if<naqsql::Decimal>(&c)) return std::stod(d->text);
  return std::nullopt;
}

bool id_like(const std::string& name) {
  std::string lower;
  for (char ch : name) lower += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  if (lower == "id") return true;
  return lower.size() >= 3 && lower.compare(lower.size() - 3, 3, "_id") == 0;
}

ResultTable strip_ids(const ResultTable& t) {
  ResultTable out;
  std::vector<std::size_t> keep;
  for (std::size_t c = 0; c < t.columns.size(); ++c) {
    if (!id_like(t.columns[c])) {
      keep.push_back(c);
      out.columns.push_back(t.columns[c]);
    }
  }
  for (const auto& row : t.rows) {
    std::vector<Cell> r;
    for (std::size_t c : keep) r.push_back(row[c]);
    out.rows.push_back(std::move(r));
  }
  return out;
}

bool rows_match_greedy(const ResultTable& a, const ResultTable& b, const std::vector<std::size_t>& perm) {
  if (a.rows.size() != b.rows.size()) return false;
  std::vector<bool> used(b.rows.size(), false);
  for (const auto& ra : a.rows) {
    bool found = false;
    for (std::size_t j = 0; j < b.rows.size() && !found; ++j) {
      if (used[j]) continue;
      bool same = true;
      for (std::size_t c = 0; c < ra.size() && same; ++c) same = cell_equal(ra[c], b.rows[j][perm[c]]);
      if (same) {
        used[j] = true;
        found = true;
      }
    }
    if (!found) return false;
  }
  return true;
}

}  // namespace

bool cell_equal(const Cell& a, const Cell& b) {
  const auto na = as_number(a);
  const auto nb = as_number(b);
  if (na && nb) {
    const double scale = std::max({1.0, std::fabs(*na), std::fabs(*nb)});
    return std::fabs(*na - *nb) <= 1e-9 * scale;
  }
  if (na || nb) return false;
  return a == b;
}

bool soft_equal(const ResultTable& a_in, const ResultTable& b_in) {
  const ResultTable a = strip_ids(a_in);
  const ResultTable b = strip_ids(b_in);
  if (a.columns.size() != b.columns.size()) return false;
  std::vector<std::size_t> perm(b.columns.size());
  std::iota(perm.begin(), perm.end(), 0);
  do {
    if (rows_match_greedy(a, b, perm)) return true;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return false;
}

naqsql::ResultComparison compare(const naqsql::ExecResult& pred, const ResultTable& gold) {
  using naqsql::ResultComparison;
  const auto* table = std::get_if<ResultTable>(&pred);
  if (!table) return ResultComparison::DbError;
  if (table->columns == gold.columns && table->rows == gold.rows) return ResultComparison::ExactMatch;
  return soft_equal(*table, gold) ? ResultComparison::SoftCorrect : ResultComparison::Incorrect;
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::vector<std::string> top_k(const std::vector<double>& query, const std::vector<Entry>& entries, std::size_t k,
                               const std::optional<std::string>& exclude_id) {
  struct Scored {
    double sim;
    std::size_t pos;
  };
  std::vector<Scored> scored;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (exclude_id && entries[i].id == *exclude_id) continue;
    scored.push_back({cosine(query, entries[i].vector), i});
  }
  std::stable_sort(scored.begin(), scored.end(), [](const Scored& x, const Scored& y) { return x.sim > y.sim; });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < scored.size() && i < k; ++i) out.push_back(entries[scored[i].pos].id);
  return out;
}

}  // namespace oracle
