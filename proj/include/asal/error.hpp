#pragma once

#include <stdexcept>
#include <string>

namespace asal {

// All library failures derive from Error so callers can catch one type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define ASAL_DEFINE_ERROR(Name)          \
  class Name : public Error {            \
   public:                               \
    using Error::Error;                  \
  };

ASAL_DEFINE_ERROR(DimensionError)
ASAL_DEFINE_ERROR(DomainError)
ASAL_DEFINE_ERROR(StateError)
ASAL_DEFINE_ERROR(NumericError)
ASAL_DEFINE_ERROR(ArgumentError)
ASAL_DEFINE_ERROR(ConfigError)
ASAL_DEFINE_ERROR(ParseError)
ASAL_DEFINE_ERROR(ExhaustedPoolError)
ASAL_DEFINE_ERROR(UnsupportedError)
ASAL_DEFINE_ERROR(AlignmentError)
ASAL_DEFINE_ERROR(ConflictError)
ASAL_DEFINE_ERROR(IoError)

#undef ASAL_DEFINE_ERROR

}  // namespace asal
