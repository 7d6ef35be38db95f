#pragma once

#include <stdexcept>
#include <string>

namespace protost {

enum class ErrorKind {
  kFormat,            // bad magic, header or encoding
  kLength,            // payload size disagrees with the header
  kValidation,        // values outside their domain (non-finite, negative weights...)
  kVersion,           // unsupported schema or file version
  kShape,             // dimension mismatch between operands
  kInsufficientData,  // fewer samples than the model requires
  kEmptyInput,
  kEmptyModel,
  kUnknownClass,
  kConfig,
  kPrerequisite,  // a pipeline artifact produced by another command is missing
  kNumeric,
  kIo,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) fail(kind, what);
}

}  // namespace protost
