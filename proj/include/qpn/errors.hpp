#pragma once

#include <stdexcept>
#include <string>

namespace qpn {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Operand dimensions do not line up, or the configured dimension cap was hit.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// A matrix or map failed a structural precondition (non-Hermitian, not CP, ...).
class MatrixError : public Error {
public:
    using Error::Error;
};

class NotEnabled : public Error {
public:
    using Error::Error;
};

class SafetyViolation : public Error {
public:
    using Error::Error;
};

class NotReachable : public Error {
public:
    using Error::Error;
};

/// An enumeration bound (states, subsets, recursion depth) was exceeded.
class CapExceeded : public Error {
public:
    using Error::Error;
};

/// Annotation signatures do not match the net they decorate.
class IllTypedAnnotation : public Error {
public:
    using Error::Error;
};

/// Structural input (net, spec, document) violates its contract.
class InvalidInput : public Error {
public:
    using Error::Error;
};

}  // namespace qpn
