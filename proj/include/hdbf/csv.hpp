#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "hdbf/simulation.hpp"
#include "hdbf/types.hpp"

namespace hdbf {

struct CsvSpec {
  std::string path;
  bool has_header = false;
  char delimiter = ',';
  bool transpose = false;  // transpose after load (variables-are-rows files)
};

// Rows are observations. Errors name the offending line (and column for
// unparsable cells).
DataMatrix load_group(const CsvSpec& spec);

// Shortest round-trip decimal formatting; reloading reproduces the exact bits.
std::string format_double(double value);

void write_matrix_csv(const std::string& path, const DataMatrix& m,
                      char delimiter = ',');

// All writers stamp the schema header line "# hdbf v1" and contain nothing
// run-dependent beyond the seeded results, so fixed-seed reruns are
// byte-identical.
void write_report_csv(std::ostream& out, const ExperimentReport& report);
void write_pairs_csv(std::ostream& out, const std::string& col_a,
                     const std::string& col_b,
                     const std::vector<std::pair<double, double>>& pairs);
void write_result_csv(std::ostream& out, const TestResult& result);

}  // namespace hdbf
