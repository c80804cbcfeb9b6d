#pragma once

#include <stdexcept>
#include <string>

namespace iqaboost {

// Base class for all toolkit errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed input text (manifests, score files, JSON payloads).
class ParseError : public Error {
public:
    using Error::Error;
};

// Dimension or size mismatch between operands.
class ShapeError : public Error {
public:
    using Error::Error;
};

// Input lies outside the operation's domain (zero spread, too few samples, ...).
class DegenerateInputError : public Error {
public:
    using Error::Error;
};

// A required (stimulus, metric) entry is absent.
class CompletenessError : public Error {
public:
    using Error::Error;
};

// Non-finite values encountered during numeric work.
class NumericError : public Error {
public:
    using Error::Error;
};

// Iterative solver failed to reach its tolerance.
class ConvergenceError : public Error {
public:
    using Error::Error;
};

// Metric id not declared in the active registry.
class RegistryError : public Error {
public:
    using Error::Error;
};

// Duplicate identifier where uniqueness is required.
class DuplicateError : public Error {
public:
    using Error::Error;
};

// Filesystem-level failure (missing file, unreadable, unwritable).
class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace iqaboost
