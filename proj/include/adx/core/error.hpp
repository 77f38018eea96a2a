#pragma once

#include <stdexcept>
#include <string>

namespace adx {

enum class ErrorKind { config, data, numerical, dimension, consistency, io };

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config: return "config";
    case ErrorKind::data: return "data";
    case ErrorKind::numerical: return "numerical";
    case ErrorKind::dimension: return "dimension";
    case ErrorKind::consistency: return "consistency";
    case ErrorKind::io: return "io";
  }
  return "unknown";
}

/// Base of every error raised by the library. The kind drives CLI exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& m) : Error(ErrorKind::config, m) {}
};

struct DataError : Error {
  explicit DataError(const std::string& m) : Error(ErrorKind::data, m) {}
};

struct NumericalError : Error {
  explicit NumericalError(const std::string& m) : Error(ErrorKind::numerical, m) {}
};

struct DimensionError : Error {
  explicit DimensionError(const std::string& m) : Error(ErrorKind::dimension, m) {}
};

struct ConsistencyError : Error {
  explicit ConsistencyError(const std::string& m) : Error(ErrorKind::consistency, m) {}
};

struct IoError : Error {
  explicit IoError(const std::string& m) : Error(ErrorKind::io, m) {}
};

/// Process exit status for an error kind: 2 config, 3 data, 4 numerical.
inline int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config: return 2;
    case ErrorKind::data:
    case ErrorKind::io:
    case ErrorKind::dimension: return 3;
    case ErrorKind::numerical:
    case ErrorKind::consistency: return 4;
  }
  return 1;
}

}  // namespace adx
