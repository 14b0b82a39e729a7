#include <limits>
#include <sstream>

#include "doctest.h"
#include "predsens/csv.hpp"
#include "predsens/errors.hpp"

using namespace predsens;

TEST_CASE("csv parser handles quoting, CRLF and missing trailing newline") {
  const std::string text =
      "a,b,c\r\n"
      "1,\"hello, world\",3\n"
      "\"line\nbreak\",\"he said \"\"hi\"\"\",\n"
      "4,5,6";
  const auto rows = parse_csv_text(text);
  REQUIRE(rows.size() == 4);
  CHECK(rows[0] == std::vector<std::string>{"a", "b", "c"});
  CHECK(rows[1] == std::vector<std::string>{"1", "hello, world", "3"});
  CHECK(rows[2] == std::vector<std::string>{"line\nbreak", "he said \"hi\"", ""});
  CHECK(rows[3] == std::vector<std::string>{"4", "5", "6"});
}

TEST_CASE("csv parser rejects malformed quoting") {
  CHECK_THROWS_AS(parse_csv_text("a,b\n1,\"unterminated"), ValidationError);
  CHECK_THROWS_AS(parse_csv_text("a,b\n1,mid\"quote\n"), ValidationError);
}

TEST_CASE("csv writer round-trips arbitrary cells") {
  const std::vector<std::vector<std::string>> rows{
      {"plain", "with,comma", "with\"quote"},
      {"multi\nline", "", "trailing space "},
  };
  std::ostringstream out;
  write_csv_rows(out, rows);
  CHECK(parse_csv_text(out.str()) == rows);
}

TEST_CASE("double formatting is shortest round-trip") {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-308, 6.02214076e23, 541.4, -0.0,
                   std::numeric_limits<double>::max()}) {
    const auto parsed = parse_double(format_double(v));
    REQUIRE(parsed.has_value());
    CHECK(*parsed == v);
  }
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(2.0) == "2");
}

TEST_CASE("parse_double is strict about the full cell") {
  CHECK(parse_double("1.5").value() == 1.5);
  CHECK(parse_double(" +1.5 ").value() == 1.5);
  CHECK(parse_double("-3e2").value() == -300.0);
  CHECK_FALSE(parse_double("").has_value());
  CHECK_FALSE(parse_double("NA").has_value());
  CHECK_FALSE(parse_double("12abc").has_value());
  CHECK_FALSE(parse_double("1.5 2").has_value());
  CHECK_FALSE(parse_double("inf").has_value());
  CHECK_FALSE(parse_double("nan").has_value());
}
