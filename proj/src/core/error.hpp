#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace uqr {

// Every failure raised by the core derives from Error. The C API maps the
// category onto a status code, the CLI maps that onto its exit code.
enum class ErrorCategory {
  Usage,    // bad arguments, contract violations by the caller
  Data,     // malformed files, bad configs or recipes, shape mismatches
  Numeric,  // non-finite values during training or evaluation
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}
  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& what) : Error(ErrorCategory::Data, what) {}
};

class DomainError : public Error {
 public:
  DomainError(const std::string& what, std::size_t index)
      : Error(ErrorCategory::Numeric, what + " at index " + std::to_string(index)),
        index_(index) {}
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

class ContractError : public Error {
 public:
  explicit ContractError(const std::string& what) : Error(ErrorCategory::Usage, what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorCategory::Data, what) {}
};

class RecipeError : public Error {
 public:
  explicit RecipeError(const std::string& what) : Error(ErrorCategory::Data, what) {}
};

class UnsupportedSize : public Error {
 public:
  explicit UnsupportedSize(const std::string& what) : Error(ErrorCategory::Data, what) {}
};

class ProtocolError : public Error {
 public:
  explicit ProtocolError(const std::string& what) : Error(ErrorCategory::Data, what) {}
};

// File-format failures carry the byte offset where decoding stopped.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::size_t offset)
      : Error(ErrorCategory::Data, what + " (byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(ErrorCategory::Numeric, what) {}
};

}  // namespace uqr
