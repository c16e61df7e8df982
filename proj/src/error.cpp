#include "patvar/error.hpp"

namespace patvar {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidOrder: return "invalid-order";
    case ErrorKind::kUnsupportedOrder: return "unsupported-order";
    case ErrorKind::kInvalidInput: return "invalid-input";
    case ErrorKind::kInsufficientData: return "insufficient-data";
    case ErrorKind::kInvalidScale: return "invalid-scale";
    case ErrorKind::kInvalidSpec: return "invalid-spec";
    case ErrorKind::kParameter: return "parameter";
    case ErrorKind::kSchema: return "schema";
    case ErrorKind::kConfiguration: return "configuration";
  }
  return "unknown";
}

}  // namespace patvar
