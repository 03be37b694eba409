#pragma once

#include <stdexcept>
#include <string>

namespace mnn {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A structural invariant (shape, mask, topology) does not hold.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Operand sizes do not agree.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// A state, loss or update became NaN or infinite.
class NumericError : public Error {
public:
    using Error::Error;
};

/// Malformed file contents (CSV rows, model files).
class ParseError : public Error {
public:
    using Error::Error;
};

/// Unsupported model file version.
class VersionError : public Error {
public:
    using Error::Error;
};

namespace detail {

inline void require_dims(bool ok, const std::string& what) {
    if (!ok) throw DimensionError(what);
}

}  // namespace detail
}  // namespace mnn
