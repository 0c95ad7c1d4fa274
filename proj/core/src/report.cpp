#include "nilmix/report.hpp"

#include <cstdio>
#include <fstream>

#include "nilmix/errors.hpp"

namespace nilmix {

void ReportTable::add_row(std::vector<std::string> cells) {
  if (cells.size() != columns.size())
    throw DimensionMismatch("report row has " + std::to_string(cells.size()) +
                            " cells, table has " +
                            std::to_string(columns.size()) + " columns");
  rows.push_back(std::move(cells));
}

std::string format_num(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string csv_string(const ReportTable& t) {
  std::string out;
  for (size_t j = 0; j < t.columns.size(); ++j) {
    if (j) out += ',';
    out += t.columns[j];
  }
  out += '\n';
  for (const auto& row : t.rows) {
    for (size_t j = 0; j < row.size(); ++j) {
      if (j) out += ',';
      out += row[j];
    }
    out += '\n';
  }
  return out;
}

void write_csv(const ReportTable& t, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open " + path.string() + " for writing");
  const std::string s = csv_string(t);
  f.write(s.data(), static_cast<std::streamsize>(s.size()));
}

ReportTable to_table(const RateReport& r) {
  ReportTable t;
  t.columns = {"parameter", "mean", "se", "error", "flag"};
  for (const auto& p : r.points)
    t.add_row({format_num(p.parameter), format_num(p.mean), format_num(p.se),
               format_num(p.error), p.flag});
  return t;
}

}  // namespace nilmix
