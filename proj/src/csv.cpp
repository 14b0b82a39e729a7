#include "predsens/csv.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "predsens/errors.hpp"

namespace predsens {

std::vector<std::vector<std::string>> parse_csv(std::istream& in) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool in_quotes = false;
  bool field_was_quoted = false;
  bool any_char = false;

  const auto end_field = [&]() {
    row.push_back(field);
    field.clear();
    field_was_quoted = false;
  };
  const auto end_record = [&]() {
    end_field();
    rows.push_back(std::move(row));
    row.clear();
    any_char = false;
  };

  char c;
  while (in.get(c)) {
    if (in_quotes) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field.push_back('"');
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
      any_char = true;
      continue;
    }
    switch (c) {
      case '"':
        if (!field.empty() || field_was_quoted) {
          throw ValidationError("csv: quote inside unquoted field");
        }
        in_quotes = true;
        field_was_quoted = true;
        any_char = true;
        break;
      case ',':
        end_field();
        any_char = true;
        break;
      case '\r':
        // Consumed silently; the following \n (if any) ends the record.
        break;
      case '\n':
        end_record();
        break;
      default:
        field.push_back(c);
        any_char = true;
        break;
    }
  }
  if (in_quotes) throw ValidationError("csv: unterminated quoted field");
  // Final record without trailing newline.
  if (any_char || !field.empty() || !row.empty()) end_record();
  return rows;
}

std::vector<std::vector<std::string>> parse_csv_text(const std::string& text) {
  std::istringstream in(text);
  return parse_csv(in);
}

std::string csv_escape(const std::string& field) {
  bool needs_quotes = false;
  for (char c : field) {
    if (c == ',' || c == '"' || c == '\n' || c == '\r') {
      needs_quotes = true;
      break;
    }
  }
  if (!needs_quotes) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out += "\"";
  return out;
}

void write_csv_rows(std::ostream& out, const std::vector<std::vector<std::string>>& rows) {
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i > 0) out << ',';
      out << csv_escape(row[i]);
    }
    out << '\n';
  }
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::optional<double> parse_double(const std::string& cell) {
  if (cell.empty()) return std::nullopt;
  // std::from_chars rejects leading whitespace and '+'; trim and handle both
  // so "  +1.5 " parses while "12abc" still fails the full-cell check.
  std::size_t begin = cell.find_first_not_of(" \t");
  std::size_t end = cell.find_last_not_of(" \t");
  if (begin == std::string::npos) return std::nullopt;
  std::string_view sv(cell.data() + begin, end - begin + 1);
  if (!sv.empty() && sv.front() == '+') sv.remove_prefix(1);
  if (sv.empty()) return std::nullopt;
  double value = 0.0;
  const auto res = std::from_chars(sv.data(), sv.data() + sv.size(), value);
  if (res.ec != std::errc() || res.ptr != sv.data() + sv.size()) return std::nullopt;
  if (!std::isfinite(value)) return std::nullopt;
  return value;
}

}  // namespace predsens
