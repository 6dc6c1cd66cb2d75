#pragma once

#include <stdexcept>
#include <string>

namespace leafkit {

// Broad failure classes. The CLI maps these onto exit codes.
enum class ErrorCategory {
  kUsage,    // bad configuration, shapes, labels, parameters
  kData,     // dataset layout, image decoding, file formats, i/o
  kNumeric,  // non-finite values
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
  explicit ShapeError(const std::string& what) : Error(ErrorCategory::kUsage, "shape error: " + what) {}
};

class ContractError : public Error {
 public:
  explicit ContractError(const std::string& what) : Error(ErrorCategory::kUsage, "contract error: " + what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorCategory::kUsage, "config error: " + what) {}
};

class LabelError : public Error {
 public:
  explicit LabelError(const std::string& what) : Error(ErrorCategory::kUsage, "label error: " + what) {}
};

class ParameterError : public Error {
 public:
  explicit ParameterError(const std::string& what) : Error(ErrorCategory::kUsage, "parameter error: " + what) {}
};

class DatasetError : public Error {
 public:
  explicit DatasetError(const std::string& what) : Error(ErrorCategory::kData, "dataset error: " + what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorCategory::kData, "i/o error: " + what) {}
};

class FormatError : public Error {
 public:
  explicit FormatError(const std::string& what) : Error(ErrorCategory::kData, "format error: " + what) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(ErrorCategory::kNumeric, "numeric error: " + what) {}
};

}  // namespace leafkit
