#pragma once

#include <stdexcept>
#include <string>

namespace weightsmith {

enum class ErrorKind {
  InvalidInput,
  InvalidAlpha,
  ShapeError,
  LayoutError,
  InvalidConstant,
  InvalidSkill,
  InvalidIndicator,
  PromptStateError,
  CapacityError,
  InvalidStep,
  UnboundedIterations,
  UnderdeterminedLayer,
  SchemaError,
  Unsupported,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidInput: return "InvalidInput";
    case ErrorKind::InvalidAlpha: return "InvalidAlpha";
    case ErrorKind::ShapeError: return "ShapeError";
    case ErrorKind::LayoutError: return "LayoutError";
    case ErrorKind::InvalidConstant: return "InvalidConstant";
    case ErrorKind::InvalidSkill: return "InvalidSkill";
    case ErrorKind::InvalidIndicator: return "InvalidIndicator";
    case ErrorKind::PromptStateError: return "PromptStateError";
    case ErrorKind::CapacityError: return "CapacityError";
    case ErrorKind::InvalidStep: return "InvalidStep";
    case ErrorKind::UnboundedIterations: return "UnboundedIterations";
    case ErrorKind::UnderdeterminedLayer: return "UnderdeterminedLayer";
    case ErrorKind::SchemaError: return "SchemaError";
    case ErrorKind::Unsupported: return "Unsupported";
  }
  return "Unknown";
}

// Every failure surfaced by the library carries one of the kinds above so
// callers (and the CLI) can branch on it without parsing messages.
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

}  // namespace weightsmith
