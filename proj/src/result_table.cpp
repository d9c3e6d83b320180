#include "naqsql/result_table.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>

#include "naqsql/error.hpp"

namespace naqsql {

double Decimal::value() const { return std::strtod(text.c_str(), nullptr); }

std::string render_real(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  if (value == 0.0) return "0";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", value);
  std::string out(buf);
  if (out == "-0") out = "0";
  return out;
}

Cell make_real(double value) { return Decimal{render_real(value)}; }

Cell canonicalize_cell(const Cell& cell) {
  if (const auto* d = std::get_if<Decimal>(&cell)) return make_real(d->value());
  return cell;
}

bool is_null(const Cell& cell) { return std::holds_alternative<std::monostate>(cell); }

bool is_numeric(const Cell& cell) {
  return std::holds_alternative<std::int64_t>(cell) || std::holds_alternative<Decimal>(cell);
}

double numeric_value(const Cell& cell) {
  if (const auto* i = std::get_if<std::int64_t>(&cell)) return static_cast<double>(*i);
  if (const auto* d = std::get_if<Decimal>(&cell)) return d->value();
  return 0.0;
}

std::string cell_to_string(const Cell& cell) {
  struct Visitor {
    std::string operator()(std::monostate) const { return "NULL"; }
    std::string operator()(bool b) const { return b ? "true" : "false"; }
    std::string operator()(std::int64_t i) const { return std::to_string(i); }
    std::string operator()(const Decimal& d) const { return d.text; }
    std::string operator()(const std::string& s) const { return s; }
  };
  return std::visit(Visitor{}, cell);
}

void ResultTable::check_shape() const {
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != columns.size()) {
      throw ValidationError("result row " + std::to_string(r) + " has " +
                            std::to_string(rows[r].size()) + " cells, expected " +
                            std::to_string(columns.size()));
    }
  }
}

std::string to_string(ExecErrorKind kind) {
  switch (kind) {
    case ExecErrorKind::Syntax: return "syntax";
    case ExecErrorKind::MissingRelation: return "missing_relation";
    case ExecErrorKind::Timeout: return "timeout";
    case ExecErrorKind::Other: return "other";
  }
  return "other";
}

ExecErrorKind exec_error_kind_from_string(const std::string& name) {
  if (name == "syntax") return ExecErrorKind::Syntax;
  if (name == "missing_relation") return ExecErrorKind::MissingRelation;
  if (name == "timeout") return ExecErrorKind::Timeout;
  if (name == "other") return ExecErrorKind::Other;
  throw ParseError("unknown exec error kind '" + name + "'");
}

ResultTable canonicalize_table(const ResultTable& table) {
  ResultTable out;
  out.truncated = table.truncated;
  out.columns.reserve(table.columns.size());
  for (const auto& name : table.columns) {
    std::string lower = name;
    for (auto& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    out.columns.push_back(std::move(lower));
  }
  out.rows.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    std::vector<Cell> cells;
    cells.reserve(row.size());
    for (const auto& cell : row) cells.push_back(canonicalize_cell(cell));
    out.rows.push_back(std::move(cells));
  }
  return out;
}

nlohmann::json cell_to_json(const Cell& cell) {
  struct Visitor {
    nlohmann::json operator()(std::monostate) const { return nullptr; }
    nlohmann::json operator()(bool b) const { return b; }
    nlohmann::json operator()(std::int64_t i) const { return i; }
    // A 12-significant-digit decimal survives the trip through double.
    nlohmann::json operator()(const Decimal& d) const { return d.value(); }
    nlohmann::json operator()(const std::string& s) const { return s; }
  };
  return std::visit(Visitor{}, cell);
}

Cell cell_from_json(const nlohmann::json& j) {
  if (j.is_null()) return std::monostate{};
  if (j.is_boolean()) return j.get<bool>();
  if (j.is_number_integer()) return j.get<std::int64_t>();
  if (j.is_number_float()) return make_real(j.get<double>());
  if (j.is_string()) return j.get<std::string>();
  throw ParseError("unsupported cell value: " + j.dump());
}

nlohmann::json table_to_json(const ResultTable& table) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : table.rows) {
    nlohmann::json r = nlohmann::json::array();
    for (const auto& cell : row) r.push_back(cell_to_json(cell));
    rows.push_back(std::move(r));
  }
  return {{"columns", table.columns}, {"rows", std::move(rows)}, {"truncated", table.truncated}};
}

ResultTable table_from_json(const nlohmann::json& j) {
  try {
    ResultTable t;
    t.columns = j.at("columns").get<std::vector<std::string>>();
    for (const auto& r : j.at("rows")) {
      std::vector<Cell> row;
      for (const auto& c : r) row.push_back(cell_from_json(c));
      t.rows.push_back(std::move(row));
    }
    t.truncated = j.value("truncated", false);
    t.check_shape();
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed result table: ") + e.what());
  }
}

}  // namespace naqsql
