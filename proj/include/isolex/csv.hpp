#pragma once

#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace isolex::csv {

using Row = std::vector<std::string>;

/// Quotes a field when it contains a comma, quote, CR or LF (RFC 4180).
std::string escape(std::string_view field);

void write_row(std::ostream& out, const Row& row);

/// Parses an entire CSV stream. Quoted fields may span lines.
std::vector<Row> parse(std::istream& in);
std::vector<Row> parse(std::string_view text);

std::vector<Row> read_file(const std::string& path);

}  // namespace isolex::csv
