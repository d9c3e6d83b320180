#pragma once

#include <stdexcept>
#include <string>

namespace naqsql {

// Base for every error the library raises. Callers that only care about
// "something in naqsql failed" can catch this.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input document (JSON syntax, wrong field types).
class ParseError : public Error {
 public:
  using Error::Error;
};

// Well-formed document that breaks a domain invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Chat endpoint failure after the transport retry budget is spent, or a
// scripted provider running out of responses.
class LlmError : public Error {
 public:
  using Error::Error;
};

class TimeoutError : public LlmError {
 public:
  using LlmError::LlmError;
};

class EmbeddingError : public Error {
 public:
  using Error::Error;
};

class MissingVector : public EmbeddingError {
 public:
  using EmbeddingError::EmbeddingError;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class ZeroVector : public Error {
 public:
  using Error::Error;
};

class RetrievalError : public Error {
 public:
  using Error::Error;
};

class EmptyGeneration : public Error {
 public:
  using Error::Error;
};

// The database could not be opened at all. Per-statement failures are
// values (ExecError), not exceptions.
class ConnectionError : public Error {
 public:
  using Error::Error;
};

class MissingOutcome : public Error {
 public:
  using Error::Error;
};

}  // namespace naqsql
