#pragma once

#include <stdexcept>
#include <string>

namespace driftbound {

/// Root of every exception thrown by the library. Each module derives its own
/// error type carrying a `kind()` enumerator so callers can branch without
/// parsing messages.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <typename Kind>
class KindedError : public Error {
 public:
  KindedError(Kind kind, const std::string& message) : Error(message), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

}  // namespace driftbound
