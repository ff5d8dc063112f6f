#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace defemo {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Incompatible tensor shapes or invalid op attributes.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf produced or consumed.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration values or flag combinations.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent input data. `line` is 1-based, 0 when unknown.
class DataError : public Error {
 public:
  DataError(const std::string& msg, std::string source = {}, std::size_t line = 0)
      : Error(format(msg, source, line)), source_(std::move(source)), line_(line) {}

  const std::string& source() const { return source_; }
  std::size_t line() const { return line_; }

 private:
  static std::string format(const std::string& msg, const std::string& source,
                            std::size_t line) {
    if (source.empty()) return msg;
    if (line == 0) return source + ": " + msg;
    return source + ":" + std::to_string(line) + ": " + msg;
  }

  std::string source_;
  std::size_t line_;
};

class CheckpointError : public Error {
 public:
  enum class Kind { BadMagic, VersionMismatch, Truncated, ChecksumMismatch, Malformed, ConfigMismatch };

  CheckpointError(Kind kind, const std::string& msg) : Error(msg), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

}  // namespace defemo
