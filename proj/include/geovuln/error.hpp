#pragma once

#include <stdexcept>
#include <string>

namespace geovuln {

/// Base for every structured failure raised by the library. The message is
/// the user-facing diagnostic.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input bytes/text could not be decoded.
class ParseError : public Error {
public:
    using Error::Error;
};

/// A precondition on a value (range, domain, schema) does not hold.
class DomainError : public Error {
public:
    using Error::Error;
};

} // namespace geovuln
