#pragma once

// Tabular reports: RFC 4180 CSV with CRLF line ends and 9 significant digits.

#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace lydim {

/// Empty, numeric or text cell.
using Cell = std::variant<std::monostate, double, std::string>;

struct Table {
  std::string name;  // file name, e.g. "pressure_curve.csv"
  std::vector<std::string> header;
  std::vector<std::vector<Cell>> rows;

  void add(std::vector<Cell> row);
};

/// %.9g with negative zero printed as 0.
std::string format_number(double value);

std::string to_csv(const Table& table);

/// Throws NumericalError naming the table and column of the first NaN/inf cell.
void check_finite(const Table& table);

/// Lowercase hex SHA-256 digest.
std::string sha256_hex(std::string_view data);

}  // namespace lydim
