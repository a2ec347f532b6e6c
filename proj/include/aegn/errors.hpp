#pragma once

#include <stdexcept>
#include <string>

namespace aegn {

// Error taxonomy shared by all modules. Library code throws, the CLI
// maps the categories onto process exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed input text or binary records (bad CSV field, bad magic, ...).
class ParseError : public Error {
public:
    using Error::Error;
};

// Well-formed input that violates a documented constraint (coordinate
// out of range, unknown polarity value, ...).
class ValidationError : public Error {
public:
    using Error::Error;
};

// A function argument outside its admissible range.
class InvalidParameterError : public Error {
public:
    using Error::Error;
};

// Input that must be ordered (event timestamps) but is not.
class OrderingError : public Error {
public:
    using Error::Error;
};

// Dimension mismatch between tensors, layers or reports.
class ShapeError : public Error {
public:
    using Error::Error;
};

// Reference to a node, layer or tensor that does not exist.
class LookupError : public Error {
public:
    using Error::Error;
};

// Numeric argument outside the mathematical domain of an operation.
class DomainError : public Error {
public:
    using Error::Error;
};

// Filesystem problems: missing file, failed write, failed rename.
class IoError : public Error {
public:
    using Error::Error;
};

// A weight file that is syntactically readable but inconsistent
// (checksum mismatch, truncated payload, shape disagreement).
class LoadError : public Error {
public:
    using Error::Error;
};

} // namespace aegn
