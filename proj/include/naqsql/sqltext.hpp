#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <variant>

namespace naqsql {

// The literal string a model must answer with to abstain.
inline constexpr std::string_view kAbstentionMarker = "unanswerable question";

struct SqlCandidate {
  std::string sql;  // never empty after trimming
  bool operator==(const SqlCandidate&) const = default;
};

struct Abstention {
  bool operator==(const Abstention&) const = default;
};

struct UnusableOutput {
  std::string raw;
  bool operator==(const UnusableOutput&) const = default;
};

using ModelOutputClass = std::variant<SqlCandidate, Abstention, UnusableOutput>;

// Sorts raw model output into SQL / abstention / unusable.
//
// Abstention wins whenever the marker phrase (any case) appears outside a
// SQL code fence, even if SQL is present too. A fence counts as a SQL fence
// when its body starts with SELECT or WITH. Otherwise the SQL candidate is
// taken from, in order: the first fenced block, the text after the last
// `[SQL]:` marker, the first SELECT/WITH statement up to `;`.
ModelOutputClass classify_output(std::string_view raw);

// Lowercase, collapse whitespace runs to one space, trim, strip trailing
// semicolons. Idempotent.
std::string normalize_sql(std::string_view sql);

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);

}  // namespace naqsql
