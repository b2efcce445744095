#pragma once

#include <stdexcept>
#include <string>

namespace stwind {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define STWIND_DEFINE_ERROR(Name)        \
  class Name : public Error {            \
   public:                               \
    using Error::Error;                  \
  };

// data
STWIND_DEFINE_ERROR(ParseError)
STWIND_DEFINE_ERROR(DuplicateError)
STWIND_DEFINE_ERROR(RangeError)
STWIND_DEFINE_ERROR(GapError)
STWIND_DEFINE_ERROR(EmptyPortfolioError)
STWIND_DEFINE_ERROR(InsufficientDataError)
// numerics and geometry
STWIND_DEFINE_ERROR(DomainError)
STWIND_DEFINE_ERROR(DimensionError)
STWIND_DEFINE_ERROR(GeometryError)
STWIND_DEFINE_ERROR(CoverageError)
STWIND_DEFINE_ERROR(ExtrapolationError)
STWIND_DEFINE_ERROR(IllConditionedError)
STWIND_DEFINE_ERROR(NonstationaryError)
STWIND_DEFINE_ERROR(ConditioningError)
// orchestration
STWIND_DEFINE_ERROR(ArgumentError)
STWIND_DEFINE_ERROR(PartitionError)
STWIND_DEFINE_ERROR(ConfigError)

#undef STWIND_DEFINE_ERROR

}  // namespace stwind
