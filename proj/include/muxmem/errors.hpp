#pragma once

#include <stdexcept>
#include <string>

namespace muxmem {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A parameter violates its documented domain.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// g2 is requested where its denominator vanishes (e.g. p = 0).
class UndefinedCorrelation : public Error {
 public:
  using Error::Error;
};

/// The gradient phase integral never returns to zero inside the search horizon.
class NoRephasing : public Error {
 public:
  using Error::Error;
};

/// Configuration document rejected; `field()` is the dotted path of the offending key.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& message)
      : Error(field.empty() ? message : field + ": " + message), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

namespace detail {

inline void require(bool condition, const std::string& message) {
  if (!condition) throw InvalidArgument(message);
}

}  // namespace detail
}  // namespace muxmem
