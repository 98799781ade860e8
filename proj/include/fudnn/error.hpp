#pragma once

#include <stdexcept>
#include <string>

namespace fudnn {

// Error categories. The CLI maps each category onto a process exit code.
enum class ErrorKind {
  kRange,        // window or index outside the available data
  kFormat,       // malformed container / CSV / JSON input
  kMapping,      // unknown event code or class label
  kConfig,       // invalid configuration value
  kDesign,       // filter design outside Nyquist etc.
  kLength,       // signal too short for the requested operation
  kContract,     // shape or kind mismatch between components
  kInvalidInput, // degenerate data (e.g. all-zero channel for PLV)
  kNumeric,      // NaN / Inf detected
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what);
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& what);

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) fail(kind, what);
}

} // namespace fudnn
