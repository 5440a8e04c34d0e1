#include "olps/errors.hpp"

#include <sstream>

namespace olps {

namespace {

std::string located(const std::string& what, std::optional<std::size_t> row,
                    std::optional<std::size_t> column) {
    if (!row && !column) return what;
    std::ostringstream os;
    os << what << " (";
    if (row) os << "row " << *row;
    if (row && column) os << ", ";
    if (column) os << "column " << *column;
    os << ")";
    return os.str();
}

}  // namespace

DataError::DataError(const std::string& what, std::optional<std::size_t> row,
                     std::optional<std::size_t> column)
    : Error(located(what, row, column)), row_(row), column_(column) {}

BankruptError::BankruptError(std::size_t round)
    : NumericalError("gross return is zero at round " + std::to_string(round) +
                     ": wealth wiped out"),
      round_(round) {}

ConvergenceError::ConvergenceError(const std::string& solver, std::size_t iterations,
                                   double gap_estimate)
    : NumericalError(solver + " did not converge in " + std::to_string(iterations) +
                     " iterations (gap estimate " + std::to_string(gap_estimate) + ")"),
      gap_(gap_estimate) {}

}  // namespace olps
