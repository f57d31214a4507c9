#pragma once

// CSV form of a history: one header row, then one row per grid point,
// all numbers with 17 significant digits so that rows re-parse bit-exactly.

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fsvp/driver.hpp"

namespace fsvp {

inline const std::vector<std::string>& history_columns() {
  static const std::vector<std::string> cols{
      "t",     "F11", "F12", "F13", "F21", "F22", "F23", "F31",    "F32",     "F33",
      "T11",   "T22", "T33", "T12", "T13", "T23", "sigma", "tau",  "xi",      "f",
      "R",     "s",   "s_d", "det_Ci", "det_Cii", "diss"};
  return cols;
}

class CsvError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline void write_history_csv(std::ostream& os, const std::vector<HistoryRecord>& history) {
  const auto& cols = history_columns();
  for (std::size_t c = 0; c < cols.size(); ++c) os << (c ? "," : "") << cols[c];
  os << '\n';
  for (const auto& r : history) {
    std::vector<double> v{r.t};
    v.insert(v.end(), r.F.a.begin(), r.F.a.end());
    v.insert(v.end(), r.T.v.begin(), r.T.v.end());
    v.insert(v.end(), {r.sigma, r.tau, r.xi, r.f, r.R, r.s, r.s_d, r.det_Ci, r.det_Cii, r.diss});
    for (std::size_t c = 0; c < v.size(); ++c) os << (c ? "," : "") << format_double(v[c]);
    os << '\n';
  }
}

inline std::vector<HistoryRecord> read_history_csv(std::istream& is) {
  const auto& cols = history_columns();
  std::string line;
  if (!std::getline(is, line)) throw CsvError("csv: empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  {
    std::stringstream ss(line);
    std::string name;
    std::size_t c = 0;
    while (std::getline(ss, name, ',')) {
      if (c >= cols.size() || name != cols[c])
        throw CsvError("csv: unexpected header column " + std::to_string(c + 1) + " '" + name + "'");
      ++c;
    }
    if (c != cols.size()) throw CsvError("csv: header has " + std::to_string(c) + " columns, expected " +
                                         std::to_string(cols.size()));
  }
  std::vector<HistoryRecord> out;
  std::size_t row = 1;
  while (std::getline(is, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> v;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      char* end = nullptr;
      errno = 0;
      const double x = std::strtod(cell.c_str(), &end);
      if (cell.empty() || end != cell.c_str() + cell.size() || (errno == ERANGE && std::isinf(x)))
        throw CsvError("csv: row " + std::to_string(row) + ": cannot parse '" + cell + "'");
      v.push_back(x);
    }
    if (v.size() != cols.size())
      throw CsvError("csv: row " + std::to_string(row) + ": " + std::to_string(v.size()) + " fields, expected " +
                     std::to_string(cols.size()));
    HistoryRecord r;
    std::size_t k = 0;
    r.t = v[k++];
    for (auto& x : r.F.a) x = v[k++];
    for (auto& x : r.T.v) x = v[k++];
    for (double* x : {&r.sigma, &r.tau, &r.xi, &r.f, &r.R, &r.s, &r.s_d, &r.det_Ci, &r.det_Cii, &r.diss})
      *x = v[k++];
    if (!out.empty() && !(r.t > out.back().t))
      throw CsvError("csv: row " + std::to_string(row) + ": time is not increasing");
    out.push_back(r);
  }
  if (out.empty()) throw CsvError("csv: no data rows");
  return out;
}

inline std::vector<HistoryRecord> read_history_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CsvError("csv: cannot open " + path);
  try {
    return read_history_csv(in);
  } catch (const CsvError& e) {
    throw CsvError(path + ": " + e.what());
  }
}

}  // namespace fsvp
