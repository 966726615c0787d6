#pragma once

#include <stdexcept>
#include <string>

namespace fgps {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A parameter lies outside its documented domain.
class InvalidParameter : public Error {
 public:
  using Error::Error;
};

// Inputs disagree on signal length.
class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

// A linear system in a closed-form expression has no unique solution.
class SingularityError : public Error {
 public:
  using Error::Error;
};

// Monte-Carlo weights collapsed, or an iterate became NaN/Inf.
class NumericalDegeneracy : public Error {
 public:
  using Error::Error;
};

// A request would exceed an enforced size cap (dense oracle paths).
class ResourceError : public Error {
 public:
  using Error::Error;
};

// Configuration is incomplete or inconsistent.
class InvalidConfiguration : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

namespace detail {

inline void require(bool ok, const std::string& what) {
  if (!ok) throw InvalidParameter(what);
}

inline void require_size(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    throw DimensionMismatch(std::string(what) + ": expected length " + std::to_string(want) +
                            ", got " + std::to_string(got));
  }
}

}  // namespace detail
}  // namespace fgps
