#pragma once

#include <stdexcept>
#include <string>

namespace lesionforge {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class UnsupportedFormatError : public Error {
public:
    using Error::Error;
};

class CorruptFileError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class GeometryMismatchError : public Error {
public:
    using Error::Error;
};

/// Argument outside the domain of an operation (unknown label, bad range, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

class ParameterError : public Error {
public:
    using Error::Error;
};

class InputDomainError : public Error {
public:
    using Error::Error;
};

class EmptyPolicyError : public Error {
public:
    using Error::Error;
};

class InsufficientContextError : public Error {
public:
    using Error::Error;
};

class NoValidSiteError : public Error {
public:
    using Error::Error;
};

/// Raised by editors. `diagnostics` carries whatever the handler reported.
class EditorFailureError : public Error {
public:
    EditorFailureError(const std::string& what, std::string diagnostics = {})
        : Error(what), diagnostics_(std::move(diagnostics)) {}
    const std::string& diagnostics() const noexcept { return diagnostics_; }

private:
    std::string diagnostics_;
};

}  // namespace lesionforge
