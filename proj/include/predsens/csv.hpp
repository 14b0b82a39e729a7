#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace predsens {

// RFC 4180 cell grammar: fields separated by commas, records by LF or CRLF,
// quoted fields may contain commas, newlines and doubled quotes.
std::vector<std::vector<std::string>> parse_csv(std::istream& in);
std::vector<std::vector<std::string>> parse_csv_text(const std::string& text);

// Quotes the field only when it contains a comma, quote or newline, so files
// without special characters round-trip unchanged.
std::string csv_escape(const std::string& field);
void write_csv_rows(std::ostream& out, const std::vector<std::vector<std::string>>& rows);

// Shortest decimal string that parses back to exactly the same double.
std::string format_double(double v);
// Strict full-cell parse; nullopt if the cell is not a finite number.
std::optional<double> parse_double(const std::string& cell);

}  // namespace predsens
