#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "nilmix/fit.hpp"

namespace nilmix {

// Generic CSV table; every cell is preformatted so the byte layout of the
// file is a pure function of the data (determinism contract of the CLI).
struct ReportTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  void add_row(std::vector<std::string> cells);
};

// shortest exact decimal round-trip for doubles; integers via to_string
std::string format_num(double x);

std::string csv_string(const ReportTable& t);
void write_csv(const ReportTable& t, const std::filesystem::path& path);

// One point of a decay experiment: parameter is n, T or a gap; error is the
// distance to the reference integral; flag one of "", "noise", "exact".
struct RatePoint {
  double parameter = 0.0;
  double mean = 0.0;
  double se = 0.0;
  double error = 0.0;
  std::string flag;
};

struct RateReport {
  std::vector<RatePoint> points;
  std::optional<FitResult> fit;
  double mu = 0.0;  // reference value the errors are measured against
  std::vector<std::string> flags;
  std::uint64_t total_budget = 0;
};

// columns: parameter,mean,se,error,flag
ReportTable to_table(const RateReport& r);

}  // namespace nilmix
