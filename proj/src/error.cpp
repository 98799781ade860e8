#include "fudnn/error.hpp"

namespace fudnn {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kRange: return "range error";
    case ErrorKind::kFormat: return "format error";
    case ErrorKind::kMapping: return "mapping error";
    case ErrorKind::kConfig: return "configuration error";
    case ErrorKind::kDesign: return "design error";
    case ErrorKind::kLength: return "length error";
    case ErrorKind::kContract: return "contract error";
    case ErrorKind::kInvalidInput: return "invalid input";
    case ErrorKind::kNumeric: return "numeric error";
  }
  return "error";
}

Error::Error(ErrorKind kind, const std::string& what)
    : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

} // namespace fudnn
