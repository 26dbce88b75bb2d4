#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace kinlab {

/// Base for every error thrown by the library. The C API maps each
/// subclass onto a distinct status code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent configuration. Carries one message per problem
/// so a single parse can report every missing or mistyped key.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::string message)
      : Error(message), messages_{std::move(message)} {}
  explicit ConfigError(std::vector<std::string> messages)
      : Error(join(messages)), messages_(std::move(messages)) {}

  const std::vector<std::string>& messages() const noexcept { return messages_; }

 private:
  static std::string join(const std::vector<std::string>& parts) {
    std::string out;
    for (const auto& p : parts) {
      if (!out.empty()) out += "\n";
      out += p;
    }
    return out;
  }
  std::vector<std::string> messages_;
};

/// A well-formed request that fails a mathematical precondition
/// (wrong arity, mismatched dimensions, violated parameter inequality).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// The numerics gave up: CFL violation, non-finite state, step cap exceeded.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace kinlab
