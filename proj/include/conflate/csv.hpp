#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace conflate::csv {

/// Malformed CSV text. Row and column are 1-based; row 1 is the header.
class CsvError : public std::runtime_error {
 public:
  CsvError(const std::string& what, std::size_t row, std::size_t column)
      : std::runtime_error("row " + std::to_string(row) + ", column " + std::to_string(column) +
                           ": " + what),
        row_(row),
        column_(column) {}
  std::size_t row() const noexcept { return row_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t row_;
  std::size_t column_;
};

using Row = std::vector<std::string>;

/// Quotes a field only when it holds a comma, quote, CR or LF.
std::string escape(std::string_view field);

/// Joins fields with commas and terminates the line with LF.
std::string format_row(const Row& fields);

/// RFC 4180 reader. Accepts LF or CRLF line ends; a trailing newline does not
/// produce an empty row.
std::vector<Row> parse(std::string_view text);

}  // namespace conflate::csv
