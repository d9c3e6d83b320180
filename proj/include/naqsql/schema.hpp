#pragma once

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

namespace naqsql {

struct ColumnDef {
  std::string name;
  std::string data_type;
  bool is_primary_key = false;
  std::optional<std::string> comment;
};

struct ForeignKey {
  std::string column;
  std::string ref_table;
  std::string ref_column;
};

struct TableDef {
  std::string name;
  std::vector<ColumnDef> columns;
  std::vector<ForeignKey> foreign_keys;

  const ColumnDef* find_column(const std::string& column) const;
};

/// Relational schema the prompts describe. Immutable once validated, so a
/// single instance can be shared by concurrent pipeline runs.
struct SchemaModel {
  std::string database_name;
  std::vector<TableDef> tables;
  /// Pre-rendered prompt text; when set it replaces the generated rendering.
  std::optional<std::string> readable_override;

  const TableDef* find_table(const std::string& table) const;

  /// Checks every invariant (non-empty, unique names, foreign keys resolve).
  /// Throws ValidationError naming the offending element.
  void validate() const;
};

SchemaModel schema_from_json(const nlohmann::json& doc);
nlohmann::json schema_to_json(const SchemaModel& schema);

/// Reads and validates a schema document. ParseError on malformed JSON,
/// ValidationError on broken invariants.
SchemaModel load_schema(const std::filesystem::path& path);

/// One `Table: <name>` block per table, one `- <col> (<type>)` line per
/// column with PK / FK / comment annotations. Byte-stable for equal input.
std::string render_schema_prompt(const SchemaModel& schema);

/// Column names that look like identifiers: `id` or `*_id`, case-insensitive.
std::set<std::string> identifier_columns(const std::vector<std::string>& columns);

bool is_identifier_column(const std::string& column);

}  // namespace naqsql
