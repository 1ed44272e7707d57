#pragma once

#include <stdexcept>
#include <string>

namespace gammachaos {

// Exit-code classes used by the command line tool: 1, 2, 3.
struct ValidationError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// The order budget of the exact engine was exceeded.
struct BudgetError : NumericalError {
  using NumericalError::NumericalError;
};

struct PreconditionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline void require(bool ok, const std::string& what) {
  if (!ok) throw ValidationError(what);
}

}  // namespace gammachaos
