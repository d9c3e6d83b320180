#include "naqsql/schema.hpp"

#include <cctype>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "naqsql/error.hpp"

namespace naqsql {

namespace {

using nlohmann::json;

std::optional<std::string> optional_string(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  return it->get<std::string>();
}

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace

const ColumnDef* TableDef::find_column(const std::string& column) const {
  for (const auto& c : columns) {
    if (c.name == column) return &c;
  }
  return nullptr;
}

const TableDef* SchemaModel::find_table(const std::string& table) const {
  for (const auto& t : tables) {
    if (t.name == table) return &t;
  }
  return nullptr;
}

void SchemaModel::validate() const {
  if (database_name.empty()) throw ValidationError("schema: database name is empty");
  if (tables.empty()) throw ValidationError("schema: no tables");

  std::unordered_set<std::string> table_names;
  for (const auto& table : tables) {
    if (table.name.empty()) throw ValidationError("schema: table with empty name");
    if (!table_names.insert(table.name).second) {
      throw ValidationError("schema: duplicate table '" + table.name + "'");
    }
    if (table.columns.empty()) {
      throw ValidationError("schema: table '" + table.name + "' has no columns");
    }
    std::unordered_set<std::string> column_names;
    for (const auto& column : table.columns) {
      if (column.name.empty()) {
        throw ValidationError("schema: table '" + table.name + "' has a column with empty name");
      }
      if (!column_names.insert(column.name).second) {
        throw ValidationError("schema: duplicate column '" + table.name + "." + column.name + "'");
      }
    }
  }

  for (const auto& table : tables) {
    for (const auto& fk : table.foreign_keys) {
      const std::string label = "foreign key " + table.name + "." + fk.column + " -> " +
                                fk.ref_table + "." + fk.ref_column;
      if (table.find_column(fk.column) == nullptr) {
        throw ValidationError("schema: " + label + ": local column does not exist");
      }
      const TableDef* target = find_table(fk.ref_table);
      if (target == nullptr) {
        throw ValidationError("schema: " + label + ": target table does not exist");
      }
      if (target->find_column(fk.ref_column) == nullptr) {
        throw ValidationError("schema: " + label + ": target column does not exist");
      }
    }
  }
}

SchemaModel schema_from_json(const json& doc) {
  try {
    SchemaModel schema;
    schema.database_name = doc.at("database").get<std::string>();
    schema.readable_override = optional_string(doc, "readable_override");
    for (const auto& t : doc.at("tables")) {
      TableDef table;
      table.name = t.at("name").get<std::string>();
      for (const auto& c : t.at("columns")) {
        ColumnDef column;
        column.name = c.at("name").get<std::string>();
        column.data_type = c.at("type").get<std::string>();
        column.is_primary_key = c.value("pk", false);
        column.comment = optional_string(c, "comment");
        table.columns.push_back(std::move(column));
      }
      if (auto fks = t.find("foreign_keys"); fks != t.end()) {
        for (const auto& f : *fks) {
          table.foreign_keys.push_back({f.at("column").get<std::string>(),
                                        f.at("ref_table").get<std::string>(),
                                        f.at("ref_column").get<std::string>()});
        }
      }
      schema.tables.push_back(std::move(table));
    }
    return schema;
  } catch (const json::exception& e) {
    throw ParseError(std::string("schema document: ") + e.what());
  }
}

json schema_to_json(const SchemaModel& schema) {
  json tables = json::array();
  for (const auto& t : schema.tables) {
    json columns = json::array();
    for (const auto& c : t.columns) {
      columns.push_back({{"name", c.name},
                         {"type", c.data_type},
                         {"pk", c.is_primary_key},
                         {"comment", c.comment ? json(*c.comment) : json(nullptr)}});
    }
    json fks = json::array();
    for (const auto& f : t.foreign_keys) {
      fks.push_back({{"column", f.column}, {"ref_table", f.ref_table}, {"ref_column", f.ref_column}});
    }
    tables.push_back({{"name", t.name}, {"columns", std::move(columns)}, {"foreign_keys", std::move(fks)}});
  }
  return {{"database", schema.database_name},
          {"readable_override",
           schema.readable_override ? json(*schema.readable_override) : json(nullptr)},
          {"tables", std::move(tables)}};
}

SchemaModel load_schema(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open schema file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError("schema file " + path.string() + ": " + e.what());
  }
  SchemaModel schema = schema_from_json(doc);
  schema.validate();
  return schema;
}

std::string render_schema_prompt(const SchemaModel& schema) {
  if (schema.readable_override) return *schema.readable_override;

  std::ostringstream out;
  out << "Database: " << schema.database_name << "\n";
  for (const auto& table : schema.tables) {
    out << "\nTable: " << table.name << "\n";
    for (const auto& column : table.columns) {
      out << "- " << column.name << " (" << column.data_type << ")";
      if (column.is_primary_key) out << " PK";
      for (const auto& fk : table.foreign_keys) {
        if (fk.column == column.name) out << ", FK -> " << fk.ref_table << "." << fk.ref_column;
      }
      if (column.comment && !column.comment->empty()) out << " -- " << *column.comment;
      out << "\n";
    }
  }
  return out.str();
}

bool is_identifier_column(const std::string& column) {
  const std::string name = lower(column);
  if (name == "id") return true;
  return name.size() >= 3 && name.compare(name.size() - 3, 3, "_id") == 0;
}

std::set<std::string> identifier_columns(const std::vector<std::string>& columns) {
  std::set<std::string> out;
  for (const auto& c : columns) {
    if (is_identifier_column(c)) out.insert(c);
  }
  return out;
}

}  // namespace naqsql
