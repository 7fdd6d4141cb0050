#include "hdbf/csv.hpp"

#include <charconv>
#include <cstddef>
#include <fstream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

namespace hdbf {

namespace {

constexpr const char* kSchemaLine = "# hdbf v1";

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

double parse_cell(const std::string& cell, std::size_t line_no,
                  std::size_t col_no) {
  const std::string t = trim(cell);
  const char* begin = t.data();
  const char* end = t.data() + t.size();
  if (begin != end && *begin == '+') ++begin;  // from_chars rejects a leading +
  double value = 0.0;
  const auto res = std::from_chars(begin, end, value);
  if (res.ec != std::errc() || res.ptr != end || begin == end) {
    throw std::runtime_error("line " + std::to_string(line_no) + ", column " +
                             std::to_string(col_no) + ": cannot parse '" + t +
                             "' as a number");
  }
  return value;
}

}  // namespace

DataMatrix load_group(const CsvSpec& spec) {
  std::ifstream in(spec.path);
  if (!in) {
    throw std::runtime_error("cannot open '" + spec.path + "'");
  }
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  bool header_pending = spec.has_header;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped.front() == '#') continue;
    if (header_pending) {
      header_pending = false;
      continue;
    }
    std::vector<double> cells;
    std::size_t start = 0;
    std::size_t col_no = 1;
    while (true) {
      const std::size_t sep = line.find(spec.delimiter, start);
      const std::string cell = sep == std::string::npos
                                   ? line.substr(start)
                                   : line.substr(start, sep - start);
      cells.push_back(parse_cell(cell, line_no, col_no));
      if (sep == std::string::npos) break;
      start = sep + 1;
      ++col_no;
    }
    if (!rows.empty() && cells.size() != rows.front().size()) {
      throw std::runtime_error(
          "line " + std::to_string(line_no) + ": expected " +
          std::to_string(rows.front().size()) + " columns, found " +
          std::to_string(cells.size()));
    }
    rows.push_back(std::move(cells));
  }
  if (rows.empty()) {
    throw std::runtime_error("'" + spec.path + "' contains no data rows");
  }
  DataMatrix m(static_cast<Eigen::Index>(rows.size()),
               static_cast<Eigen::Index>(rows.front().size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
  }
  if (spec.transpose) {
    m = m.transpose().eval();
  }
  return m;
}

std::string format_double(double value) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  if (res.ec != std::errc()) {
    throw std::logic_error("format_double: buffer too small");
  }
  return std::string(buf, res.ptr);
}

void write_matrix_csv(const std::string& path, const DataMatrix& m,
                      char delimiter) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot open '" + path + "' for writing");
  }
  out << kSchemaLine << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j > 0) out << delimiter;
      out << format_double(m(i, j));
    }
    out << '\n';
  }
  if (!out) {
    throw std::runtime_error("write to '" + path + "' failed");
  }
}

void write_report_csv(std::ostream& out, const ExperimentReport& report) {
  out << kSchemaLine << '\n';
  out << "model,n1,n2,p,beta,reps,b,alpha,method,rejections,errors,"
         "size_or_power,se\n";
  for (std::size_t i = 0; i < report.tallies.size(); ++i) {
    const MethodTally& t = report.tallies[i];
    out << report.model << ',' << report.n1 << ',' << report.n2 << ','
        << report.p << ',' << format_double(report.beta) << ',' << report.reps
        << ',' << report.b << ',' << format_double(report.alpha) << ','
        << method_name(t.method) << ',' << t.rejections << ',' << t.errors
        << ',' << format_double(report.rate(i)) << ','
        << format_double(report.se(i)) << '\n';
  }
}

void write_pairs_csv(std::ostream& out, const std::string& col_a,
                     const std::string& col_b,
                     const std::vector<std::pair<double, double>>& pairs) {
  out << kSchemaLine << '\n';
  out << col_a << ',' << col_b << '\n';
  for (const auto& [a, b] : pairs) {
    out << format_double(a) << ',' << format_double(b) << '\n';
  }
}

void write_result_csv(std::ostream& out, const TestResult& result) {
  out << kSchemaLine << '\n';
  out << "method,statistic,p_value,reject,alpha,b,seed\n";
  out << method_name(result.method) << ',' << format_double(result.statistic)
      << ',' << format_double(result.p_value) << ','
      << (result.reject ? 1 : 0) << ',' << format_double(result.alpha) << ','
      << result.b_resamples << ',';
  if (result.seed.has_value()) out << *result.seed;
  out << '\n';
}

}  // namespace hdbf
