#pragma once

#include <stdexcept>
#include <string>

namespace fbe {

// Base of every error the library raises. The kind() string is what the CLI
// prints in front of the message ("format error: ...").
class Error : public std::runtime_error {
public:
    Error(const char* kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    const char* kind() const noexcept { return kind_; }

private:
    const char* kind_;
};

#define FBE_DEFINE_ERROR(Name, label)                                   \
    class Name : public Error {                                         \
    public:                                                             \
        explicit Name(const std::string& what) : Error(label, what) {}  \
    }

/// Argument outside its documented domain.
FBE_DEFINE_ERROR(ParameterError, "parameter error");
/// A derived size or value does not fit the integer width in use.
FBE_DEFINE_ERROR(CapacityError, "capacity error");
/// Dimension mismatch between operands.
FBE_DEFINE_ERROR(ShapeError, "shape error");
/// Non-finite or otherwise unusable input values.
FBE_DEFINE_ERROR(InputError, "input error");
/// Degenerate input such as an all-zero dataset.
FBE_DEFINE_ERROR(DegenerateInputError, "degenerate-input error");
/// Codes or models that were not produced under the same condensation.
FBE_DEFINE_ERROR(IncompatibleError, "incompatibility error");
/// Bad magic, unknown version, malformed text, or invariant violations on read.
FBE_DEFINE_ERROR(FormatError, "format error");
/// Truncated or size-inconsistent binary payload.
FBE_DEFINE_ERROR(CorruptionError, "corruption error");
/// Operating-system level I/O failure.
FBE_DEFINE_ERROR(IoError, "io error");

#undef FBE_DEFINE_ERROR

}  // namespace fbe
