#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace osiq::csv {

/// One parsed record. Fields are unescaped.
using Row = std::vector<std::string>;

/// Parses a whole RFC-4180 document: quoted fields, doubled quotes,
/// embedded commas/newlines, CRLF or LF line endings. Throws FormatError
/// on unbalanced quotes or stray data after a closing quote.
std::vector<Row> parse(const std::string& text);

/// Reads and parses a CSV file. Throws FormatError if the file is missing.
std::vector<Row> read_file(const std::string& path);

/// Quotes a field only when needed (comma, quote, CR or LF present).
std::string escape_field(const std::string& field);

/// Serializes one row, no trailing newline.
std::string format_row(const Row& row);

/// Writes rows with a trailing newline after each, LF endings.
void write_file(const std::string& path, const std::vector<Row>& rows);

/// Shortest decimal form that parses back to the same double ("nan" for
/// NaN); keeps report files byte-stable across reruns.
std::string format_double(double value);

}  // namespace osiq::csv
