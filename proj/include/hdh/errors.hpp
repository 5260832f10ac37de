#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hdh {

/// Base for every error raised by the library. Catch this to handle any
/// failure; catch a subclass to react to a specific kind.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed file structure: ragged rows, bad magic, empty input.
class FormatError : public Error {
public:
    using Error::Error;
};

/// A cell that could not be read as a finite number. Row and column are 1-based.
class ParseError : public FormatError {
public:
    ParseError(std::size_t row, std::size_t column, const std::string& detail)
        : FormatError("parse error at row " + std::to_string(row) + ", column " +
                      std::to_string(column) + ": " + detail),
          row_(row), column_(column) {}

    std::size_t row() const noexcept { return row_; }
    std::size_t column() const noexcept { return column_; }

private:
    std::size_t row_;
    std::size_t column_;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

/// Invalid hyperparameter or option.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Value outside the domain of an operation, e.g. a non-binary visible vector.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Request exceeds what the data or an exact algorithm can hold.
class CapacityError : public Error {
public:
    using Error::Error;
};

/// Input that is well-formed but unusable, e.g. an empty relevance set.
class InputError : public Error {
public:
    using Error::Error;
};

class DivergenceError : public Error {
public:
    DivergenceError(std::string stage, int iteration)
        : Error("non-finite objective in stage '" + stage + "' at iteration " +
                std::to_string(iteration)),
          stage_(std::move(stage)), iteration_(iteration) {}

    const std::string& stage() const noexcept { return stage_; }
    int iteration() const noexcept { return iteration_; }

private:
    std::string stage_;
    int iteration_;
};

class VersionError : public FormatError {
public:
    using FormatError::FormatError;
};

class ChecksumError : public FormatError {
public:
    using FormatError::FormatError;
};

class TruncationError : public FormatError {
public:
    using FormatError::FormatError;
};

} // namespace hdh
