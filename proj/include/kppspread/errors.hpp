#pragma once

#include <stdexcept>
#include <string>

namespace kppspread {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// config layer
struct ParseError : Error { using Error::Error; };
struct ValidationError : Error { using Error::Error; };
struct NonPositiveField : Error { using Error::Error; };

// eigensolver
struct NoConvergence : Error { using Error::Error; };
struct SingularShift : Error { using Error::Error; };
struct NotSymmetric : Error { using Error::Error; };

// asymptotic formulas: a hypothesis of the underlying limit theorem fails
struct AssumptionViolated : Error { using Error::Error; };
struct NotPersistent : Error { using Error::Error; };
struct UndefinedSpeed : Error { using Error::Error; };

// simulator
struct BlowUp : Error { using Error::Error; };
struct StabilityViolation : Error { using Error::Error; };
struct FrontEscaped : Error { using Error::Error; };
struct NoFront : Error { using Error::Error; };

}  // namespace kppspread
