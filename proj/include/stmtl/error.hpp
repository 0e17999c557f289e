#pragma once

#include <stdexcept>
#include <string>

namespace stmtl {

/// Input data that violates a file format or dataset invariant.
class ValidationError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Non-finite values or a singular system encountered during computation.
class NumericalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

} // namespace stmtl
