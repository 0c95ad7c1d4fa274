#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "nilmix/errors.hpp"

namespace nilmix {

enum class FitModel {
  LogLinear,  // ln y = a + b*x      (exponential decay in x; rate = -b)
  LogLog      // ln y = a + b*ln x   (power-law decay in x;  rate = -b)
};

struct FitResult {
  double rate = 0.0;       // -slope, so positive for decaying data
  double intercept = 0.0;  // a in the transformed model
  double r2 = 0.0;
  int points_used = 0;
  std::vector<std::string> flags;  // e.g. dropped-nonpositive notes
};

// Least-squares rate fit shared by every decay experiment.
// Nonpositive ys are dropped (flagged); < 3 usable points is an error.
inline FitResult rate_fit(const std::vector<double>& xs,
                          const std::vector<double>& ys, FitModel model) {
  if (xs.size() != ys.size())
    throw DimensionMismatch("rate_fit: xs and ys lengths differ");

  std::vector<double> tx, ty;
  FitResult out;
  for (size_t i = 0; i < xs.size(); ++i) {
    if (!(ys[i] > 0.0)) {
      out.flags.push_back("dropped nonpositive y at x=" + std::to_string(xs[i]));
      continue;
    }
    double x = xs[i];
    if (model == FitModel::LogLog) {
      if (!(x > 0.0)) throw NonPositiveError("rate_fit: log-log model needs x > 0");
      x = std::log(x);
    }
    tx.push_back(x);
    ty.push_back(std::log(ys[i]));
  }
  if (tx.size() < 3)
    throw TooFewPoints("rate_fit: need at least 3 positive points, have " +
                       std::to_string(tx.size()));

  const double n = static_cast<double>(tx.size());
  double sx = 0, sy = 0;
  for (size_t i = 0; i < tx.size(); ++i) { sx += tx[i]; sy += ty[i]; }
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (size_t i = 0; i < tx.size(); ++i) {
    const double dx = tx[i] - mx, dy = ty[i] - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (sxx == 0.0) throw TooFewPoints("rate_fit: degenerate abscissae");
  const double slope = sxy / sxx;
  out.rate = -slope;
  out.intercept = my - slope * mx;
  out.points_used = static_cast<int>(tx.size());
  if (syy == 0.0) {
    out.r2 = 1.0;  // exact fit of constant data
  } else {
    const double ss_res = syy - slope * sxy;
    out.r2 = 1.0 - ss_res / syy;
  }
  return out;
}

}  // namespace nilmix
