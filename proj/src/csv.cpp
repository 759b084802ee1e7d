#include "conflate/csv.hpp"

namespace conflate::csv {

std::string escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string format_row(const Row& fields) {
  std::string line;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i > 0) line += ',';
    line += escape(fields[i]);
  }
  line += '\n';
  return line;
}

std::vector<Row> parse(std::string_view text) {
  std::vector<Row> rows;
  Row row;
  std::string field;
  std::size_t row_no = 1;
  bool in_quotes = false;
  bool was_quoted = false;
  bool row_open = false;

  auto end_field = [&] {
    row.push_back(std::move(field));
    field.clear();
    was_quoted = false;
  };
  auto end_row = [&] {
    end_field();
    rows.push_back(std::move(row));
    row.clear();
    ++row_no;
    row_open = false;
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    switch (c) {
      case '"':
        if (!field.empty() || was_quoted) {
          throw CsvError("unexpected quote inside unquoted field", row_no, row.size() + 1);
        }
        in_quotes = true;
        was_quoted = true;
        row_open = true;
        break;
      case ',':
        end_field();
        row_open = true;
        break;
      case '\r':
        if (i + 1 < text.size() && text[i + 1] == '\n') break;
        throw CsvError("bare carriage return", row_no, row.size() + 1);
      case '\n':
        end_row();
        break;
      default:
        if (was_quoted) throw CsvError("text after closing quote", row_no, row.size() + 1);
        field += c;
        row_open = true;
    }
  }
  if (in_quotes) throw CsvError("unterminated quoted field", row_no, row.size() + 1);
  if (row_open) end_row();
  return rows;
}

}  // namespace conflate::csv
