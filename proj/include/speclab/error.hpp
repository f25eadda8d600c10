#pragma once

#include <stdexcept>
#include <string>

namespace speclab {

/// Failure categories surfaced by the library. Each maps to one error
/// family of the public operations; callers switch on kind() rather than
/// parsing messages.
enum class ErrorKind {
  invalid_argument,
  coefficient_regularity,
  numerical_failure,
  insufficient_data,
  empty_set,
  search_failure,
  synthesis_failure,
  degenerate_chart,
  unsupported_geometry,
  config_validation,
};

const char* to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }
  /// The message without the kind prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorKind kind_;
  std::string detail_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& message);

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) fail(kind, message);
}

}  // namespace speclab
