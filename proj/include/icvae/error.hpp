#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace icvae {

/// Base class for every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes are incompatible with the requested operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A value lies outside the domain of a function (log of a nonpositive
/// number, overflowing exp, non-finite input where finiteness is required).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Invalid argument or configuration value.
class ValueError : public Error {
 public:
  using Error::Error;
};

/// A training or evaluation step produced non-finite numbers.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// File could not be opened, read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Malformed binary input; carries the byte offset where parsing failed.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"), detail_(what), offset_(offset) {}

  std::uint64_t offset() const noexcept { return offset_; }
  /// Message without the offset suffix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  std::string detail_;
  std::uint64_t offset_;
};

/// Input ended before the declared payload was complete.
class TruncatedError : public FormatError {
 public:
  using FormatError::FormatError;
};

/// Stored checksum does not match the file contents.
class ChecksumError : public FormatError {
 public:
  using FormatError::FormatError;
};

/// File declares a format version this build cannot read.
class VersionError : public FormatError {
 public:
  using FormatError::FormatError;
};

/// Configuration key/value rejected; names the offending key.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& key, const std::string& what)
      : Error("config key '" + key + "': " + what), key_(key) {}

  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

}  // namespace icvae
