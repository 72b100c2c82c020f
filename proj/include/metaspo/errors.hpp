#pragma once

#include <stdexcept>
#include <string>

namespace metaspo {

// Base class for every error thrown by this library. Subclasses are grouped
// by how the CLI maps them to exit codes: UsageError -> 1, DataError -> 2,
// BackendError -> 3.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class UsageError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class BackendError : public Error {
 public:
  using Error::Error;
};

// --- core ---
class MissingPlaceholder : public DataError {
 public:
  using DataError::DataError;
};
class MultiplePlaceholders : public DataError {
 public:
  using DataError::DataError;
};

// --- metrics ---
class EmptyRecordSet : public DataError {
 public:
  using DataError::DataError;
};

// --- meta prompts ---
class EmptyWrongSet : public DataError {
 public:
  using DataError::DataError;
};
class EmptyAnalysis : public DataError {
 public:
  using DataError::DataError;
};
class EmptyExampleSet : public DataError {
 public:
  using DataError::DataError;
};
class TagNotFound : public DataError {
 public:
  using DataError::DataError;
};

// --- optimizer ---
class EmptyPool : public DataError {
 public:
  using DataError::DataError;
};

// --- evaluation ---
class InsufficientExamples : public DataError {
 public:
  using DataError::DataError;
};
class EmptyVocabulary : public DataError {
 public:
  using DataError::DataError;
};

// --- backend ---
class BackendUnavailable : public BackendError {
 public:
  using BackendError::BackendError;
};
class MalformedResponse : public BackendError {
 public:
  using BackendError::BackendError;
};
class AuthError : public BackendError {
 public:
  using BackendError::BackendError;
};
class PoolExhausted : public BackendError {
 public:
  using BackendError::BackendError;
};

// --- runner ---
class ParseError : public DataError {
 public:
  using DataError::DataError;
};
class DuplicateId : public DataError {
 public:
  using DataError::DataError;
};
class MissingFile : public DataError {
 public:
  using DataError::DataError;
};
class IoError : public DataError {
 public:
  using DataError::DataError;
};

}  // namespace metaspo
