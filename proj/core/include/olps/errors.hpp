#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace olps {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent configuration (CLI exit code 1).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Unreadable, malformed, or invalid market data (CLI exit code 2).
class DataError : public Error {
public:
    DataError(const std::string& what, std::optional<std::size_t> row = {},
              std::optional<std::size_t> column = {});

    std::optional<std::size_t> row() const noexcept { return row_; }
    std::optional<std::size_t> column() const noexcept { return column_; }

private:
    std::optional<std::size_t> row_;
    std::optional<std::size_t> column_;
};

/// Solver divergence, bad metric, or other numerical failure (CLI exit code 3).
class NumericalError : public Error {
public:
    using Error::Error;
};

/// Gross return of a played portfolio was zero: wealth is wiped out.
class BankruptError : public NumericalError {
public:
    explicit BankruptError(std::size_t round);
    std::size_t round() const noexcept { return round_; }

private:
    std::size_t round_;
};

/// An iterative solver hit its iteration cap.
class ConvergenceError : public NumericalError {
public:
    ConvergenceError(const std::string& solver, std::size_t iterations, double gap_estimate);
    double gap_estimate() const noexcept { return gap_; }

private:
    double gap_;
};

}  // namespace olps
