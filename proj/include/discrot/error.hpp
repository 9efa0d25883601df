#ifndef DISCROT_ERROR_HPP
#define DISCROT_ERROR_HPP

#include <stdexcept>
#include <string>
#include <utility>

namespace discrot {

enum class ErrorKind {
  InvalidInput,
  Convergence,
  Stiffness,
  Singular,
  Overflow,
  Regime,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidInput: return "invalid_input";
    case ErrorKind::Convergence: return "convergence";
    case ErrorKind::Stiffness: return "stiffness";
    case ErrorKind::Singular: return "singular";
    case ErrorKind::Overflow: return "overflow";
    case ErrorKind::Regime: return "regime";
  }
  return "unknown";
}

/// Base class for every failure raised by the library. `module` names the
/// component that detected the problem so front ends can report provenance.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string module, const std::string& what)
      : std::runtime_error(what), kind_(kind), module_(std::move(module)) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& module() const noexcept { return module_; }

 private:
  ErrorKind kind_;
  std::string module_;
};

class InvalidInput : public Error {
 public:
  InvalidInput(std::string module, const std::string& what)
      : Error(ErrorKind::InvalidInput, std::move(module), what) {}
};

class RegimeViolation : public Error {
 public:
  RegimeViolation(std::string module, const std::string& what)
      : Error(ErrorKind::Regime, std::move(module), what) {}
};

class OverflowError : public Error {
 public:
  OverflowError(std::string module, const std::string& what)
      : Error(ErrorKind::Overflow, std::move(module), what) {}
};

}  // namespace discrot

#endif  // DISCROT_ERROR_HPP
