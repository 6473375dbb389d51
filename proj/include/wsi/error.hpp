#pragma once

#include <stdexcept>
#include <string>

namespace wsi {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input file could not be turned into a valid collection.
class LoadError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A classifier or translation backend could not be reached or answered garbage.
class TransportError : public Error {
 public:
  using Error::Error;
};

class UndefinedCorrelation : public Error {
 public:
  using Error::Error;
};

class LengthError : public Error {
 public:
  using Error::Error;
};

/// Design matrix is rank deficient; `column()` is the first offending column
/// in the caller's original column order.
class SingularDesign : public Error {
 public:
  SingularDesign(const std::string& what, std::size_t column)
      : Error(what), column_(column) {}
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t column_;
};

}  // namespace wsi
