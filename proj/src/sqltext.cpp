#include "naqsql/sqltext.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <regex>
#include <vector>

namespace naqsql {

namespace {

constexpr std::string_view kFence = "```";
constexpr std::string_view kSqlMarker = "[sql]:";

constexpr std::array<std::string_view, 10> kSqlFenceTags = {
    "sql", "postgresql", "postgres", "pgsql", "psql", "sqlite", "mysql", "plsql", "tsql", "sql92"};

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

struct FencedBlock {
  std::size_t begin = 0;  // offset of the opening fence
  std::size_t end = 0;    // one past the closing fence (or end of text)
  std::string body;       // trimmed, language tag removed
};

// Drops a leading info string such as "sql" or "postgresql".
std::string strip_language_tag(std::string_view inner) {
  std::size_t k = 0;
  while (k < inner.size()) {
    const char c = inner[k];
    if (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '+') {
      ++k;
    } else {
      break;
    }
  }
  if (k == 0) return trim(inner);
  const std::string tag = to_lower(inner.substr(0, k));
  if (tag == "select" || tag == "with") return trim(inner);
  const std::string_view rest = inner.substr(k);
  const bool newline_follows = !rest.empty() && (rest[0] == '\n' || rest.substr(0, 2) == "\r\n");
  const bool known = std::find(kSqlFenceTags.begin(), kSqlFenceTags.end(), tag) != kSqlFenceTags.end();
  if (rest.empty()) return known ? std::string() : trim(inner);
  if (newline_follows || (known && is_space(rest[0]))) return trim(rest);
  return trim(inner);
}

std::vector<FencedBlock> find_fenced_blocks(std::string_view raw) {
  std::vector<FencedBlock> blocks;
  std::size_t pos = 0;
  while (true) {
    const std::size_t open = raw.find(kFence, pos);
    if (open == std::string_view::npos) break;
    const std::size_t body_begin = open + kFence.size();
    const std::size_t close = raw.find(kFence, body_begin);
    FencedBlock block;
    block.begin = open;
    if (close == std::string_view::npos) {
      block.end = raw.size();
      block.body = strip_language_tag(raw.substr(body_begin));
    } else {
      block.end = close + kFence.size();
      block.body = strip_language_tag(raw.substr(body_begin, close - body_begin));
    }
    blocks.push_back(std::move(block));
    pos = blocks.back().end;
  }
  return blocks;
}

bool starts_with_sql_keyword(std::string_view body) {
  static const std::regex re(R"(^\s*(select|with)\b)", std::regex::icase);
  const std::string s(body);
  return std::regex_search(s, re);
}

std::string text_outside_sql_fences(std::string_view raw, const std::vector<FencedBlock>& blocks) {
  std::string out;
  std::size_t pos = 0;
  for (const auto& block : blocks) {
    if (!starts_with_sql_keyword(block.body)) continue;
    out.append(raw.substr(pos, block.begin - pos));
    out.push_back(' ');
    pos = block.end;
  }
  if (pos < raw.size()) out.append(raw.substr(pos));
  return out;
}

std::optional<std::string> after_last_sql_marker(std::string_view raw) {
  const std::string lowered = to_lower(raw);
  const std::size_t at = lowered.rfind(kSqlMarker);
  if (at == std::string::npos) return std::nullopt;
  std::string rest = trim(raw.substr(at + kSqlMarker.size()));
  if (rest.empty()) return std::nullopt;
  return rest;
}

// First SELECT (or WITH <name> AS ( ...) up to and including the first ';'.
std::optional<std::string> first_statement(std::string_view raw) {
  static const std::regex select_re(R"(\bselect\b)", std::regex::icase);
  static const std::regex with_re(
      R"(\bwith\s+(recursive\s+)?[A-Za-z_][A-Za-z0-9_]*\s*(\([^)]*\)\s*)?as\s*\()", std::regex::icase);
  const std::string s(raw);
  std::size_t start = std::string::npos;
  std::smatch m;
  if (std::regex_search(s, m, select_re)) start = static_cast<std::size_t>(m.position(0));
  if (std::regex_search(s, m, with_re)) {
    start = std::min(start, static_cast<std::size_t>(m.position(0)));
  }
  if (start == std::string::npos) return std::nullopt;
  const std::size_t semi = s.find(';', start);
  const std::size_t stop = semi == std::string::npos ? s.size() : semi + 1;
  std::string stmt = trim(std::string_view(s).substr(start, stop - start));
  if (stmt.empty()) return std::nullopt;
  return stmt;
}

}  // namespace

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return std::string(s.substr(b, e - b));
}

std::string to_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

ModelOutputClass classify_output(std::string_view raw) {
  const auto blocks = find_fenced_blocks(raw);

  if (to_lower(text_outside_sql_fences(raw, blocks)).find(kAbstentionMarker) != std::string::npos) {
    return Abstention{};
  }

  for (const auto& block : blocks) {
    if (!block.body.empty()) return SqlCandidate{block.body};
  }
  if (auto sql = after_last_sql_marker(raw)) return SqlCandidate{std::move(*sql)};
  if (auto sql = first_statement(raw)) return SqlCandidate{std::move(*sql)};
  return UnusableOutput{std::string(raw)};
}

std::string normalize_sql(std::string_view sql) {
  std::string out;
  out.reserve(sql.size());
  bool pending_space = false;
  for (const char c : sql) {
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  while (!out.empty() && (out.back() == ';' || out.back() == ' ')) out.pop_back();
  return out;
}

}  // namespace naqsql
