#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace koopa {

// Every failure raised by the library derives from Error. The CLI maps the
// concrete category onto its exit code.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

class ArgumentError : public Error {
public:
    using Error::Error;
};

class StreamError : public ArgumentError {
public:
    using ArgumentError::ArgumentError;
};

class NumericError : public Error {
public:
    using Error::Error;
};

class MetricError : public NumericError {
public:
    using NumericError::NumericError;
};

class StateError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line)
        : Error(what + " (line " + std::to_string(line) + ")"), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class ConvergenceError : public NumericError {
public:
    ConvergenceError(const std::string& what, std::size_t iterations)
        : NumericError(what + " after " + std::to_string(iterations) + " iterations"),
          iterations_(iterations) {}

    std::size_t iterations() const noexcept { return iterations_; }

private:
    std::size_t iterations_;
};

class TrainingError : public NumericError {
public:
    TrainingError(const std::string& what, std::size_t epoch, std::size_t batch)
        : NumericError(what + " (epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch) + ")"),
          epoch_(epoch), batch_(batch) {}

    std::size_t epoch() const noexcept { return epoch_; }
    std::size_t batch() const noexcept { return batch_; }

private:
    std::size_t epoch_;
    std::size_t batch_;
};

} // namespace koopa
