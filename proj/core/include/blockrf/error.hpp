#pragma once

#include <stdexcept>
#include <string>

namespace blockrf {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A point or index outside the domain an operation is defined on.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Invalid argument combination or violated precondition.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Malformed, missing, or inconsistent file content.
class FormatError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace blockrf
