#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace halbench {

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed input document. Line numbers are 1-based; 0 means unknown.
class ParseError : public Error {
public:
  ParseError(const std::string &what, std::size_t line)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  std::size_t line() const { return line_; }

private:
  std::size_t line_;
};

class ValidationError : public Error {
public:
  using Error::Error;
};

class UsageError : public Error {
public:
  using Error::Error;
};

class ConfigError : public Error {
public:
  using Error::Error;
};

class ReplayMissError : public Error {
public:
  explicit ReplayMissError(const std::string &digest)
      : Error("replay miss: no transcript entry for digest " + digest),
        digest_(digest) {}
  const std::string &digest() const { return digest_; }

private:
  std::string digest_;
};

class RetriableError : public Error {
public:
  using Error::Error;
};

/// Sandbox or harness-side failure that is not the guest's fault.
class InfrastructureError : public Error {
public:
  using Error::Error;
};

} // namespace halbench
