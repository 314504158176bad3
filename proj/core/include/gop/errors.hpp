#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gop {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EmptyInput : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

/// Normalization statistics were never fitted for a layer.
class UnfitNormalization : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration or network construction parameters.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed model or report document. `path()` names the offending field.
class FormatError : public Error {
 public:
  FormatError(std::string path, const std::string& what)
      : Error(path.empty() ? what : path + ": " + what), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

/// c = 0 ridge solve on a numerically rank-deficient system.
class SingularSystem : public Error {
 public:
  using Error::Error;
};

class NonFiniteLoss : public Error {
 public:
  NonFiniteLoss(std::size_t epoch, const std::string& what)
      : Error(what), epoch_(epoch) {}
  std::size_t epoch() const noexcept { return epoch_; }

 private:
  std::size_t epoch_;
};

/// Improvement rate requested against a zero baseline.
class DegenerateBaseline : public Error {
 public:
  using Error::Error;
};

class AllCandidatesFailed : public Error {
 public:
  using Error::Error;
};

/// CSV parse failure. Row and column are 1-based, counted over data rows.
class ParseError : public Error {
 public:
  ParseError(std::size_t row, std::size_t column, const std::string& what)
      : Error("row " + std::to_string(row) + ", column " + std::to_string(column) + ": " + what),
        row_(row),
        column_(column) {}
  std::size_t row() const noexcept { return row_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t row_;
  std::size_t column_;
};

class RaggedRows : public Error {
 public:
  using Error::Error;
};

class UnknownLabelColumn : public Error {
 public:
  using Error::Error;
};

class ClassTooSmall : public Error {
 public:
  using Error::Error;
};

}  // namespace gop
