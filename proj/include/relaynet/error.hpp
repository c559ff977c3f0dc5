#pragma once

#include <stdexcept>
#include <string>

namespace relaynet {

// Bad input: a parameter violates its documented invariants. The message
// names the offending field.
class ValidationError : public std::invalid_argument {
 public:
  ValidationError(const std::string& field, const std::string& what)
      : std::invalid_argument(field + ": " + what), field_(field) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

// A numerical procedure did not produce a trustworthy answer (unbracketed
// root, non-converged quadrature, unusable slope fit, ...).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void require(bool ok, const char* field, const std::string& what) {
  if (!ok) throw ValidationError(field, what);
}

}  // namespace detail
}  // namespace relaynet
