#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace qgmm {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Z'X is singular, so the exactly identified moment equations have no unique root.
class RankDeficient : public Error {
 public:
  using Error::Error;
};

/// V(theta) could not be factorized even after the jitter escalation.
class SingularWeighting : public Error {
 public:
  using Error::Error;
};

/// The proposal precision (Upsilon + Q, or Upsilon alone) is not positive definite.
class ProposalSingular : public Error {
 public:
  using Error::Error;
};

class TooFewDraws : public Error {
 public:
  using Error::Error;
};

class SingularCovariance : public Error {
 public:
  using Error::Error;
};

/// Raised by run_chain when nearly every step lands on a singular branch.
class SamplerFailure : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class FileNotFound : public IoError {
 public:
  using IoError::IoError;
};

class HeaderMismatch : public IoError {
 public:
  using IoError::IoError;
};

class CsvParseError : public IoError {
 public:
  using IoError::IoError;
};

/// A mapped cell is empty or does not parse as a decimal number.
class NonNumericCell : public IoError {
 public:
  NonNumericCell(std::size_t row, std::string column, const std::string& what)
      : IoError(what), row_(row), column_(std::move(column)) {}

  /// 1-based data row index (the header is row 0).
  std::size_t row() const { return row_; }
  const std::string& column() const { return column_; }

 private:
  std::size_t row_;
  std::string column_;
};

}  // namespace qgmm
