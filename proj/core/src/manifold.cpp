#include "nilmix/manifold.hpp"

#include <cmath>
#include <limits>

namespace nilmix {

double norm2(const VecD& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

VecD neg(VecD v) {
  for (auto& x : v) x = -x;
  return v;
}

Nilmanifold::Nilmanifold(NilpotentAlgebra g, double metric_scale)
    : alg_(std::move(g)), metric_scale_(metric_scale) {
  if (!(metric_scale_ > 0.0))
    throw ConfigError("metric_scale must be positive");
  const int d = alg_.dim();
  if (d > 12)
    throw ConfigError("lattice word cache limited to dim <= 12");
  // enumerate {-1,0,1}^d once; the zero word sits at index (3^d - 1) / 2
  long total = 1;
  for (int i = 0; i < d; ++i) total *= 3;
  word_logs_.reserve(total);
  min_word_norm_ = std::numeric_limits<double>::infinity();
  for (long idx = 0; idx < total; ++idx) {
    long rem = idx;
    std::vector<long long> w(d);
    bool zero = true;
    for (int i = 0; i < d; ++i) {
      w[i] = static_cast<long long>(rem % 3) - 1;
      rem /= 3;
      if (w[i] != 0) zero = false;
    }
    VecD lg = word_log(w);
    if (!zero) min_word_norm_ = std::min(min_word_norm_, norm2(lg));
    word_logs_.push_back(std::move(lg));
  }
  min_word_norm_ *= metric_scale_;
}

VecD Nilmanifold::word_log(const std::vector<long long>& n) const {
  VecD t(alg_.dim());
  for (int i = 0; i < alg_.dim(); ++i) t[i] = static_cast<double>(n[i]);
  return alg_.first_from_second(t);
}

Nilmanifold::ReducedD Nilmanifold::reduce_first_kind(const VecD& x) const {
  const int d = alg_.dim();
  for (double c : x)
    if (!std::isfinite(c)) throw NonFiniteCoordinate("reduce: non-finite input");
  VecD cur = x;
  std::vector<long long> word(d, 0);
  VecD t;
  for (int i = 0; i < d; ++i) {
    t = alg_.second_from_first(cur);
    double fl = std::floor(t[i]);
    double frac = t[i] - fl;
    if (frac >= 1.0) {  // rounding at the cell boundary
      fl += 1.0;
      frac = 0.0;
    }
    const long long m = -static_cast<long long>(fl);
    word[i] = m;
    if (m != 0) {
      VecD step(d, 0.0);
      step[i] = static_cast<double>(m);
      cur = alg_.bch(cur, step);
    }
  }
  t = alg_.second_from_first(cur);
  // clamp residual rounding into [0,1)
  for (int i = 0; i < d; ++i) {
    if (t[i] >= 1.0) t[i] -= 1.0;
    if (t[i] < 0.0) t[i] = (t[i] <= -1e-12) ? t[i] + 1.0 : 0.0;
    if (t[i] >= 1.0 || t[i] < 0.0) t[i] = 0.0;
  }
  return {Point{std::move(t)}, std::move(word)};
}

Nilmanifold::ReducedQ Nilmanifold::reduce_first_kind(const RatVec& x) const {
  const int d = alg_.dim();
  RatVec cur = x;
  std::vector<BigInt> word(d, BigInt(0));
  RatVec t;
  for (int i = 0; i < d; ++i) {
    t = alg_.second_from_first(cur);
    const BigInt m = -rat_floor(t[i]);
    word[i] = m;
    if (m != 0) {
      RatVec step(d, Rat(0));
      step[i] = Rat(m);
      cur = alg_.bch(cur, step);
    }
  }
  t = alg_.second_from_first(cur);
  return {PointQ{std::move(t)}, std::move(word)};
}

Nilmanifold::ReducedD Nilmanifold::reduce(const VecD& second_kind) const {
  return reduce_first_kind(alg_.first_from_second(second_kind));
}

Nilmanifold::ReducedQ Nilmanifold::reduce(const RatVec& second_kind) const {
  return reduce_first_kind(alg_.first_from_second(second_kind));
}

Point Nilmanifold::haar_sample(RngStream& rng) const {
  VecD t(alg_.dim());
  for (auto& c : t) c = rng.uniform01();
  return Point{std::move(t)};
}

Point Nilmanifold::translate(const VecD& h_first_kind, const Point& x) const {
  return reduce_first_kind(alg_.bch(h_first_kind, lift(x))).point;
}

PointQ Nilmanifold::translate(const RatVec& h_first_kind, const PointQ& x) const {
  return reduce_first_kind(alg_.bch(h_first_kind, lift(x))).point;
}

double Nilmanifold::one_sided_distance(const VecD& lx, const VecD& ly) const {
  const VecD nx = neg(lx);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& wl : word_logs_) {
    const VecD a = alg_.bch(ly, wl);
    const VecD b = alg_.bch(a, nx);
    best = std::min(best, norm2(b));
  }
  return best;
}

double Nilmanifold::local_distance(const Point& x, const Point& y) const {
  const VecD lx = lift(x), ly = lift(y);
  const double d1 = one_sided_distance(lx, ly);
  const double d2 = one_sided_distance(ly, lx);
  return metric_scale_ * std::min(d1, d2);
}

}  // namespace nilmix
