#pragma once

#include <stdexcept>
#include <string>

namespace finrad {

/// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A caller-supplied value violates a precondition.
struct InvalidArgument : Error {
    using Error::Error;
};

/// File could not be opened or read.
struct IoError : Error {
    using Error::Error;
};

/// File was readable but is not a supported format.
struct UnsupportedFormatError : Error {
    using Error::Error;
};

/// File claims a supported format but its contents are malformed.
struct CorruptFileError : Error {
    using Error::Error;
};

/// Tensor or image geometry does not match what an operation requires.
struct ShapeError : Error {
    using Error::Error;
};

/// A model graph description is malformed (bad input reference, dangling
/// concat, unsupported arity). Message names the offending node.
struct GraphError : Error {
    using Error::Error;
};

/// Errors specific to the binary model file format.
struct ModelFileError : Error {
    enum class Kind { bad_magic, bad_version, truncated };
    Kind kind;
    ModelFileError(Kind k, const std::string& msg) : Error(msg), kind(k) {}
};

} // namespace finrad
