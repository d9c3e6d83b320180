#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

namespace naqsql {

// A floating-point value kept in its canonical text rendering
// (12 significant digits) so that equality is textual and stable.
struct Decimal {
  std::string text;

  double value() const;
  bool operator==(const Decimal&) const = default;
};

// null | boolean | integer | decimal | text
using Cell = std::variant<std::monostate, bool, std::int64_t, Decimal, std::string>;

// Renders with 12 significant digits; negative zero becomes "0".
std::string render_real(double value);
Cell make_real(double value);
Cell canonicalize_cell(const Cell& cell);

bool is_null(const Cell& cell);
bool is_numeric(const Cell& cell);
double numeric_value(const Cell& cell);
std::string cell_to_string(const Cell& cell);

struct ResultTable {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;
  bool truncated = false;

  bool operator==(const ResultTable&) const = default;

  std::size_t width() const { return columns.size(); }
  // Throws ValidationError if a row's width differs from the header.
  void check_shape() const;
};

enum class ExecErrorKind { Syntax, MissingRelation, Timeout, Other };

std::string to_string(ExecErrorKind kind);
ExecErrorKind exec_error_kind_from_string(const std::string& name);

struct ExecError {
  ExecErrorKind kind = ExecErrorKind::Other;
  std::string message;

  bool operator==(const ExecError&) const = default;
};

using ExecResult = std::variant<ResultTable, ExecError>;

// Lowercases column names and re-renders every decimal cell. Row order is
// preserved. Idempotent.
ResultTable canonicalize_table(const ResultTable& table);

nlohmann::json cell_to_json(const Cell& cell);
Cell cell_from_json(const nlohmann::json& j);
nlohmann::json table_to_json(const ResultTable& table);
ResultTable table_from_json(const nlohmann::json& j);

}  // namespace naqsql
