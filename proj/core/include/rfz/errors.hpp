#pragma once

#include <stdexcept>
#include <string>

namespace rfz {

/// Base of every error the library raises. `error_class()` is a stable,
/// machine-parsable name used by the command-line tool.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* error_class() const noexcept = 0;
};

#define RFZ_DECLARE_ERROR(Name)                                     \
  class Name : public Error {                                       \
   public:                                                          \
    using Error::Error;                                             \
    const char* error_class() const noexcept override { return #Name; } \
  }

// forest model / interchange
RFZ_DECLARE_ERROR(SchemaError);
RFZ_DECLARE_ERROR(InvariantError);
RFZ_DECLARE_ERROR(DimensionError);
RFZ_DECLARE_ERROR(TypeError);

// structure codec
RFZ_DECLARE_ERROR(MalformedSequence);
RFZ_DECLARE_ERROR(IndexError);

// entropy coders
RFZ_DECLARE_ERROR(EmptyDistribution);
RFZ_DECLARE_ERROR(UnknownSymbol);
RFZ_DECLARE_ERROR(TruncatedStream);
RFZ_DECLARE_ERROR(AlphabetMismatch);

// clustering
RFZ_DECLARE_ERROR(DegenerateInput);

// container
RFZ_DECLARE_ERROR(CorruptContainer);

// lossy
RFZ_DECLARE_ERROR(TaskError);
RFZ_DECLARE_ERROR(RangeError);

// trainer / datasets
RFZ_DECLARE_ERROR(DataError);

// option combinations the caller got wrong
RFZ_DECLARE_ERROR(UsageError);

#undef RFZ_DECLARE_ERROR

}  // namespace rfz
