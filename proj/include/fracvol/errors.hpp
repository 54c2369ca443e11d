#pragma once

#include <stdexcept>
#include <string>

namespace fracvol {

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A numerical construction broke down (negative circulant eigenvalue,
/// covariance not positive definite after jitter, degenerate statistic).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input data could not be used (malformed CSV row, constant series).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid run configuration. `line` is 1-based, 0 when unknown.
class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& what, int line = 0)
        : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
          line_(line) {}

    int line() const noexcept { return line_; }

private:
    int line_;
};

}  // namespace fracvol
