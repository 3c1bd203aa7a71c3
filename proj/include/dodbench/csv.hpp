#pragma once

// Minimal RFC 4180 CSV reading and writing.

#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "dodbench/error.hpp"

namespace dodbench::csv {

using Row = std::vector<std::string>;

inline std::string quote(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

inline void write_row(std::ostream& out, const Row& row) {
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i) out << ',';
    out << quote(row[i]);
  }
  out << '\n';
}

// Reads all rows. Lines starting with '#' outside quotes are comments.
inline std::vector<Row> read_all(std::istream& in) {
  std::vector<Row> rows;
  Row row;
  std::string field;
  bool in_quotes = false;
  bool at_line_start = true;
  bool row_has_content = false;
  char c;
  auto end_row = [&] {
    if (row_has_content || !row.empty()) {
      row.push_back(std::move(field));
      rows.push_back(std::move(row));
    }
    row.clear();
    field.clear();
    row_has_content = false;
    at_line_start = true;
  };
  while (in.get(c)) {
    if (in_quotes) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field += '"';
        } else {
          in_quotes = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    if (at_line_start && c == '#') {
      std::string skip;
      std::getline(in, skip);
      continue;
    }
    at_line_start = false;
    switch (c) {
      case '"':
        in_quotes = true;
        row_has_content = true;
        break;
      case ',':
        row.push_back(std::move(field));
        field.clear();
        row_has_content = true;
        break;
      case '\r': break;
      case '\n': end_row(); break;
      default:
        field += c;
        row_has_content = true;
    }
  }
  if (in_quotes) throw Error("unterminated quoted CSV field");
  if (row_has_content || !row.empty()) end_row();
  return rows;
}

}  // namespace dodbench::csv
