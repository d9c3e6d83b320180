#include "naqsql/executor.hpp"

#include <sqlite3.h>

#include <atomic>
#include <cctype>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "naqsql/error.hpp"
#include "naqsql/sqltext.hpp"

namespace naqsql {

namespace {

bool starts_with(std::string_view s, std::string_view prefix) {
  return s.substr(0, prefix.size()) == prefix;
}

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

// Skips whitespace, comments and opening parentheses.
std::size_t skip_trivia(std::string_view sql, std::size_t i, bool skip_parens) {
  while (i < sql.size()) {
    const char c = sql[i];
    if (std::isspace(static_cast<unsigned char>(c)) || c == ';' || (skip_parens && c == '(')) {
      ++i;
    } else if (sql.substr(i, 2) == "--") {
      const std::size_t nl = sql.find('\n', i);
      i = nl == std::string_view::npos ? sql.size() : nl + 1;
    } else if (sql.substr(i, 2) == "/*") {
      const std::size_t close = sql.find("*/", i + 2);
      i = close == std::string_view::npos ? sql.size() : close + 2;
    } else {
      break;
    }
  }
  return i;
}

std::string leading_keyword(std::string_view sql) {
  std::size_t i = skip_trivia(sql, 0, true);
  std::size_t j = i;
  while (j < sql.size() && std::isalpha(static_cast<unsigned char>(sql[j]))) ++j;
  return to_lower(sql.substr(i, j - i));
}

ExecErrorKind classify_sqlite_error(int code, const std::string& message) {
  if (code == SQLITE_INTERRUPT) return ExecErrorKind::Timeout;
  const std::string m = to_lower(message);
  if (m.find("syntax error") != std::string::npos || m.find("incomplete input") != std::string::npos ||
      m.find("unrecognized token") != std::string::npos) {
    return ExecErrorKind::Syntax;
  }
  if (m.find("no such table") != std::string::npos || m.find("no such column") != std::string::npos ||
      m.find("no such function") != std::string::npos) {
    return ExecErrorKind::MissingRelation;
  }
  return ExecErrorKind::Other;
}

struct Deadline {
  std::chrono::steady_clock::time_point until;
  bool expired = false;
};

int progress_callback(void* arg) {
  auto* deadline = static_cast<Deadline*>(arg);
  if (std::chrono::steady_clock::now() >= deadline->until) {
    deadline->expired = true;
    return 1;
  }
  return 0;
}

Cell read_cell(sqlite3_stmt* stmt, int col) {
  switch (sqlite3_column_type(stmt, col)) {
    case SQLITE_NULL: return std::monostate{};
    case SQLITE_INTEGER: return static_cast<std::int64_t>(sqlite3_column_int64(stmt, col));
    case SQLITE_FLOAT: return make_real(sqlite3_column_double(stmt, col));
    default: {
      const auto* text = reinterpret_cast<const char*>(sqlite3_column_text(stmt, col));
      const int len = sqlite3_column_bytes(stmt, col);
      return std::string(text ? text : "", static_cast<std::size_t>(len));
    }
  }
}

std::filesystem::path fresh_temp_path() {
  static std::atomic<unsigned> counter{0};
  return std::filesystem::temp_directory_path() /
         ("naqsql-" + std::to_string(::getpid()) + "-" + std::to_string(counter++) + ".db");
}

sqlite3* open_read_only(const std::filesystem::path& path) {
  sqlite3* db = nullptr;
  const int rc = sqlite3_open_v2(path.c_str(), &db, SQLITE_OPEN_READONLY | SQLITE_OPEN_NOMUTEX, nullptr);
  if (rc != SQLITE_OK) {
    std::string message = db ? sqlite3_errmsg(db) : sqlite3_errstr(rc);
    sqlite3_close(db);
    throw ConnectionError("cannot open database " + path.string() + ": " + message);
  }
  sqlite3_exec(db, "PRAGMA query_only = ON", nullptr, nullptr, nullptr);
  return db;
}

}  // namespace

void materialize_dump(const std::filesystem::path& dump_path, const std::filesystem::path& db_path) {
  std::ifstream in(dump_path);
  if (!in) throw ConnectionError("cannot read SQL dump " + dump_path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();

  std::filesystem::remove(db_path);
  sqlite3* db = nullptr;
  if (sqlite3_open_v2(db_path.c_str(), &db, SQLITE_OPEN_READWRITE | SQLITE_OPEN_CREATE, nullptr) != SQLITE_OK) {
    std::string message = db ? sqlite3_errmsg(db) : "out of memory";
    sqlite3_close(db);
    throw ConnectionError("cannot create database " + db_path.string() + ": " + message);
  }
  char* err = nullptr;
  if (sqlite3_exec(db, buffer.str().c_str(), nullptr, nullptr, &err) != SQLITE_OK) {
    std::string message = err ? err : "unknown error";
    sqlite3_free(err);
    sqlite3_close(db);
    throw ConnectionError("loading dump " + dump_path.string() + " failed: " + message);
  }
  sqlite3_close(db);
}

class SqliteExecutor::Lease {
 public:
  explicit Lease(SqliteExecutor& owner) : owner_(owner), db_(owner.acquire()) {}
  ~Lease() { owner_.release(db_); }
  Lease(const Lease&) = delete;
  Lease& operator=(const Lease&) = delete;
  sqlite3* get() const { return db_; }

 private:
  SqliteExecutor& owner_;
  sqlite3* db_;
};

SqliteExecutor::SqliteExecutor(const std::string& connection, std::size_t pool_size) {
  std::string target = connection;
  bool is_dump = false;
  if (starts_with(target, "sqlite-dump:")) {
    target = target.substr(12);
    is_dump = true;
  } else if (starts_with(target, "sqlite:")) {
    target = target.substr(7);
  } else if (ends_with(target, ".sql")) {
    is_dump = true;
  }
  if (target.empty()) throw ConnectionError("empty database path in '" + connection + "'");

  if (is_dump) {
    db_path_ = fresh_temp_path();
    materialize_dump(target, db_path_);
    owns_file_ = true;
  } else {
    db_path_ = target;
    if (!std::filesystem::is_regular_file(db_path_)) {
      throw ConnectionError("database file " + db_path_.string() + " does not exist");
    }
  }

  if (pool_size == 0) pool_size = 1;
  try {
    for (std::size_t i = 0; i < pool_size; ++i) {
      sqlite3* db = open_read_only(db_path_);
      all_.push_back(db);
      idle_.push_back(db);
    }
  } catch (...) {
    for (auto* db : all_) sqlite3_close(db);
    if (owns_file_) std::filesystem::remove(db_path_);
    throw;
  }
}

SqliteExecutor::~SqliteExecutor() {
  for (auto* db : all_) sqlite3_close(db);
  if (owns_file_) {
    std::error_code ec;
    std::filesystem::remove(db_path_, ec);
  }
}

sqlite3* SqliteExecutor::acquire() {
  std::unique_lock lock(mutex_);
  available_.wait(lock, [this] { return !idle_.empty(); });
  sqlite3* db = idle_.back();
  idle_.pop_back();
  return db;
}

void SqliteExecutor::release(sqlite3* db) {
  {
    std::lock_guard lock(mutex_);
    idle_.push_back(db);
  }
  available_.notify_one();
}

ExecResult SqliteExecutor::execute_sql(std::string_view sql, const ExecLimits& limits) {
  if (trim(sql).empty()) return ExecError{ExecErrorKind::Other, "empty statement"};

  const std::string keyword = leading_keyword(sql);
  if (keyword != "select" && keyword != "with" && keyword != "values") {
    return ExecError{ExecErrorKind::Other, "write statements rejected"};
  }

  Lease lease(*this);
  sqlite3* db = lease.get();

  const std::string text(sql);
  sqlite3_stmt* raw_stmt = nullptr;
  const char* tail = nullptr;
  int rc = sqlite3_prepare_v2(db, text.c_str(), static_cast<int>(text.size()), &raw_stmt, &tail);
  std::unique_ptr<sqlite3_stmt, int (*)(sqlite3_stmt*)> stmt(raw_stmt, sqlite3_finalize);
  if (rc != SQLITE_OK) {
    std::string message = sqlite3_errmsg(db);
    return ExecError{classify_sqlite_error(rc, message), message};
  }
  if (!stmt) return ExecError{ExecErrorKind::Other, "empty statement"};
  if (tail != nullptr) {
    const std::string_view rest(tail);
    if (skip_trivia(rest, 0, false) < rest.size()) {
      return ExecError{ExecErrorKind::Other, "multiple statements are not allowed"};
    }
  }
  if (!sqlite3_stmt_readonly(stmt.get())) {
    return ExecError{ExecErrorKind::Other, "write statements rejected"};
  }

  Deadline deadline{std::chrono::steady_clock::now() + limits.timeout};
  sqlite3_progress_handler(db, 1000, progress_callback, &deadline);
  struct ClearHandler {
    sqlite3* db;
    ~ClearHandler() { sqlite3_progress_handler(db, 0, nullptr, nullptr); }
  } clear{db};

  ResultTable table;
  const int ncols = sqlite3_column_count(stmt.get());
  for (int c = 0; c < ncols; ++c) {
    const char* name = sqlite3_column_name(stmt.get(), c);
    table.columns.emplace_back(name ? name : "");
  }

  while (true) {
    rc = sqlite3_step(stmt.get());
    if (rc == SQLITE_DONE) break;
    if (rc != SQLITE_ROW) {
      if (deadline.expired || rc == SQLITE_INTERRUPT) {
        return ExecError{ExecErrorKind::Timeout,
                         "query exceeded the time limit of " + std::to_string(limits.timeout.count()) + " ms"};
      }
      std::string message = sqlite3_errmsg(db);
      return ExecError{classify_sqlite_error(rc, message), message};
    }
    if (table.rows.size() >= limits.max_rows) {
      table.truncated = true;
      break;
    }
    std::vector<Cell> row;
    row.reserve(static_cast<std::size_t>(ncols));
    for (int c = 0; c < ncols; ++c) row.push_back(read_cell(stmt.get(), c));
    table.rows.push_back(std::move(row));
  }
  return canonicalize_table(table);
}

bool SqliteExecutor::ping() {
  auto result = execute_sql("SELECT 1", ExecLimits{std::chrono::milliseconds(2000), 1});
  return std::holds_alternative<ResultTable>(result);
}

std::string SqliteExecutor::describe() const { return "sqlite:" + db_path_.string(); }

std::unique_ptr<Executor> open_executor(const std::string& connection, std::size_t pool_size) {
  if (starts_with(connection, "postgres://") || starts_with(connection, "postgresql://")) {
    throw ConnectionError("PostgreSQL backend is not available in this build: " + connection);
  }
  return std::make_unique<SqliteExecutor>(connection, pool_size);
}

}  // namespace naqsql
