#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace lsm::csv {

struct Row {
  std::size_t line;  // 1-based physical line where the record starts
  std::vector<std::string> fields;
};

struct Table {
  std::vector<std::string> header;
  std::vector<Row> rows;

  // Column index by name; throws LookupError when absent.
  std::size_t column(std::string_view name) const;
  bool has_column(std::string_view name) const;
};

// RFC 4180 reader: quoted fields, doubled quotes, CRLF tolerated, UTF-8 BOM stripped.
// Blank lines are skipped.
Table parse(std::string_view text);
Table read_file(const std::string& path);

// Throws ParseError when the header does not start with `expected` (extra trailing
// columns are allowed) or when any row has a different arity than the header.
void require_header(const Table& table, const std::vector<std::string>& expected);

std::string escape(std::string_view field);
void write_row(std::ostream& out, const std::vector<std::string>& fields);

}  // namespace lsm::csv
