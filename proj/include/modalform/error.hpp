#pragma once

#include <stdexcept>
#include <string>

namespace modalform {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A construction parameter is outside its admissible range.
class InvalidParameter : public Error {
public:
    using Error::Error;
};

/// An input value is inconsistent with the objects it is combined with
/// (geometry mismatch, bad index, malformed file content...).
class InvalidInput : public Error {
public:
    using Error::Error;
};

class AssemblyError : public Error {
public:
    using Error::Error;
};

/// Eigen solver failure, loss of definiteness and similar numerical breakdowns.
class NumericalError : public Error {
public:
    using Error::Error;
};

class InterpolationFailure : public NumericalError {
public:
    InterpolationFailure(const std::string& what, int mode_count)
        : NumericalError(what), mode_count_(mode_count) {}

    int mode_count() const noexcept { return mode_count_; }

private:
    int mode_count_;
};

class UndefinedCorrelation : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace modalform
