// Writes the bundled demo dataset. The data-generating process is documented
// here and in the README so report numbers can be traced back to it:
//
//   ability ~ N(0, 1), shifted +0.25 for target rows (mild covariate shift)
//   reading = 500 + 90 (0.8 ability + 0.6 e1)
//   math    = 500 + 90 (0.8 ability + 0.6 e2)
//   ses     = 0.5 ability + 0.866 e3            (unit variance)
//   books   in {few, some, many}, ordered by ses + noise
//   gender  coin flip, "female" or "male"
//   score   = 480 + 0.35 (reading - 500) + 0.30 (math - 500) + 12 ses
//             + {few: 0, some: 5, many: 9} + (male ? -4 : 0) + 20 e4
//
// A row is a target row with probability 0.2; its score cell is left empty
// and the population column says "target". Roughly 2% of reading, ses and
// books cells are blanked to exercise imputation.
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <cmath>
#include <cstdio>

#include "predsens/csv.hpp"
#include "predsens/rng.hpp"

using namespace predsens;

namespace {

std::string fixed(double v, int digits) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

int main(int argc, char** argv) {
  const std::string path = argc > 1 ? argv[1] : "demo.csv";
  const std::size_t n = 600;
  Rng rng(424242);

  std::vector<std::vector<std::string>> rows;
  rows.push_back({"score", "population", "reading", "math", "ses", "books", "gender"});
  for (std::size_t i = 0; i < n; ++i) {
    const bool target = rng.uniform() < 0.2;
    const double ability = rng.normal() + (target ? 0.25 : 0.0);
    const double reading = 500.0 + 90.0 * (0.8 * ability + 0.6 * rng.normal());
    const double math = 500.0 + 90.0 * (0.8 * ability + 0.6 * rng.normal());
    const double ses = 0.5 * ability + 0.866 * rng.normal();
    const double book_score = ses + 0.8 * rng.normal();
    const std::string books = book_score < -0.5 ? "few" : book_score < 0.7 ? "some" : "many";
    const bool male = rng.uniform() < 0.5;
    const double bonus = books == "few" ? 0.0 : books == "some" ? 5.0 : 9.0;
    const double score = 480.0 + 0.35 * (reading - 500.0) + 0.30 * (math - 500.0) +
                         12.0 * ses + bonus + (male ? -4.0 : 0.0) + 20.0 * rng.normal();

    std::vector<std::string> row(7);
    row[0] = target ? "" : fixed(score, 1);
    row[1] = target ? "target" : "study";
    row[2] = rng.uniform() < 0.02 ? "" : fixed(reading, 1);
    row[3] = fixed(math, 1);
    row[4] = rng.uniform() < 0.02 ? "" : fixed(ses, 3);
    row[5] = rng.uniform() < 0.02 ? "" : books;
    row[6] = male ? "male" : "female";
    rows.push_back(std::move(row));
  }

  std::ofstream out(path, std::ios::binary);
  if (!out) {
    std::cerr << "cannot write '" << path << "'\n";
    return 1;
  }
  write_csv_rows(out, rows);
  std::cout << "wrote " << path << " (" << n << " rows)\n";
  return 0;
}
