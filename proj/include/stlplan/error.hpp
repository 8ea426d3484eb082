#pragma once

#include <stdexcept>
#include <string>

namespace stlplan {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define STLPLAN_DEFINE_ERROR(Name)        \
  class Name : public Error {             \
   public:                                \
    using Error::Error;                   \
  };

STLPLAN_DEFINE_ERROR(ArityError)
STLPLAN_DEFINE_ERROR(IntervalError)
STLPLAN_DEFINE_ERROR(TraceTooShort)
STLPLAN_DEFINE_ERROR(EmptyInput)
STLPLAN_DEFINE_ERROR(NonPositiveWeight)
STLPLAN_DEFINE_ERROR(LengthMismatch)
STLPLAN_DEFINE_ERROR(DegenerateSegment)
STLPLAN_DEFINE_ERROR(InfeasibleWindow)
STLPLAN_DEFINE_ERROR(NoCapableDrone)
STLPLAN_DEFINE_ERROR(Uncoverable)
STLPLAN_DEFINE_ERROR(SeedTooShort)
STLPLAN_DEFINE_ERROR(NonFiniteObjective)
STLPLAN_DEFINE_ERROR(ParseError)

#undef STLPLAN_DEFINE_ERROR

// Raised when a scenario is well-formed JSON but violates a constraint.
// `field()` is the dotted path of the offending entry, e.g. "timing.T_ins".
class ValidationError : public Error {
 public:
  ValidationError(std::string field, const std::string& what)
      : Error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

// Wraps an error raised inside a pipeline stage, keeping the stage name.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what)
      : Error("[" + stage + "] " + what), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

}  // namespace stlplan
