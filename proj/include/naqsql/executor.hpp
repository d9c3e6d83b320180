#pragma once

#include <chrono>
#include <condition_variable>
#include <filesystem>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "naqsql/result_table.hpp"

struct sqlite3;

namespace naqsql {

struct ExecLimits {
  std::chrono::milliseconds timeout{30'000};
  std::size_t max_rows = 10'000;
};

// Read-only SQL runner. Statement failures come back as ExecError values;
// only the inability to reach the database at all is an exception.
class Executor {
 public:
  virtual ~Executor() = default;

  virtual ExecResult execute_sql(std::string_view sql, const ExecLimits& limits) = 0;
  ExecResult execute_sql(std::string_view sql) { return execute_sql(sql, ExecLimits{}); }

  // True when a trivial query round-trips.
  virtual bool ping() = 0;
  virtual std::string describe() const = 0;
};

// Creates `db_path` and loads the SQL dump into it.
void materialize_dump(const std::filesystem::path& dump_path, const std::filesystem::path& db_path);

// Embedded backend over SQLite. Connections are opened read-only and kept
// in a small pool; each connection runs one statement at a time.
//
// Accepted connection strings:
//   sqlite:<file>        existing database file
//   sqlite-dump:<file>   SQL dump, loaded into a private temporary file
//   <file>.sql           same as sqlite-dump:
//   <file>               same as sqlite:
class SqliteExecutor final : public Executor {
 public:
  explicit SqliteExecutor(const std::string& connection, std::size_t pool_size = 4);
  ~SqliteExecutor() override;

  SqliteExecutor(const SqliteExecutor&) = delete;
  SqliteExecutor& operator=(const SqliteExecutor&) = delete;

  using Executor::execute_sql;
  ExecResult execute_sql(std::string_view sql, const ExecLimits& limits) override;
  bool ping() override;
  std::string describe() const override;

  const std::filesystem::path& database_file() const { return db_path_; }

 private:
  class Lease;

  sqlite3* acquire();
  void release(sqlite3* db);

  std::filesystem::path db_path_;
  bool owns_file_ = false;
  std::mutex mutex_;
  std::condition_variable available_;
  std::vector<sqlite3*> idle_;
  std::vector<sqlite3*> all_;
};

// Parses a connection string and opens the matching backend. Throws
// ConnectionError for unsupported schemes or unreachable databases.
std::unique_ptr<Executor> open_executor(const std::string& connection, std::size_t pool_size = 4);

}  // namespace naqsql
