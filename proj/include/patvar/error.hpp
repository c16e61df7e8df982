#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace patvar {

enum class ErrorKind {
  kInvalidOrder,
  kUnsupportedOrder,
  kInvalidInput,
  kInsufficientData,
  kInvalidScale,
  kInvalidSpec,
  kParameter,
  kSchema,
  kConfiguration,
};

std::string_view to_string(ErrorKind kind);

// All library failures are reported through this type. The kind is stable and
// machine-readable; the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace patvar
