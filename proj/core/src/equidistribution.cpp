#include "nilmix/equidistribution.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

#include "nilmix/errors.hpp"
#include "nilmix/ratlinalg.hpp"

namespace nilmix {

BoxMap BoxMap::validate(VecD v, std::vector<VecD> dirs, VecD sides) {
  const int d = static_cast<int>(v.size());
  const int k = static_cast<int>(dirs.size());
  if (k < 1) throw ConfigError("box map needs at least one direction");
  if (static_cast<int>(sides.size()) != k)
    throw DimensionMismatch("box map has " + std::to_string(k) +
                            " directions but " + std::to_string(sides.size()) +
                            " sides");
  for (const auto& w : dirs)
    if (static_cast<int>(w.size()) != d)
      throw DimensionMismatch("box direction length != base point length");
  for (double t : sides)
    if (!(t > 0.0)) throw ConfigError("box sides must be positive");
  for (const auto& wd : dirs) {
    double n2 = 0.0;
    for (double x : wd) n2 += x * x;
    if (!(n2 > 0.0)) throw ZeroDirection("box direction is zero");
  }

  Eigen::MatrixXd w(d, k);
  for (int j = 0; j < k; ++j)
    for (int i = 0; i < d; ++i) w(i, j) = dirs[j][i];
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(w);
  const auto& sv = svd.singularValues();
  if (sv(sv.size() - 1) <= 1e-10 * std::max(1.0, sv(0)))
    throw ConfigError("box directions are not linearly independent");

  BoxMap b;
  b.v = std::move(v);
  b.dirs = std::move(dirs);
  b.sides = std::move(sides);
  return b;
}

double BoxMap::volume() const {
  double p = 1.0;
  for (double t : sides) p *= t;
  return p;
}

double BoxMap::min_side() const {
  return *std::min_element(sides.begin(), sides.end());
}

VecD BoxMap::point(const VecD& t) const {
  VecD x = v;
  for (size_t j = 0; j < dirs.size(); ++j)
    for (size_t i = 0; i < x.size(); ++i) x[i] += t[j] * dirs[j][i];
  return x;
}

McResult box_average(const Observable& f, const BoxMap& box, const VecD& u,
                     const Point& g, std::uint64_t budget, std::uint64_t seed,
                     std::uint64_t stream, int workers) {
  const Nilmanifold& m = f.manifold();
  if (box.dim() != m.dim())
    throw DimensionMismatch("box map dimension != manifold dimension");
  if (static_cast<int>(u.size()) != m.dim())
    throw DimensionMismatch("translation vector length != dimension");

  const VecD lg = m.lift(g);
  bool u_zero = true;
  for (double ui : u)
    if (ui != 0.0) { u_zero = false; break; }

  const int k = box.k();
  return mc_mean(budget, workers, seed, stream, [&, u_zero](RngStream& rng) {
    VecD t(k);
    for (int j = 0; j < k; ++j) t[j] = rng.uniform01() * box.sides[j];
    VecD w = m.algebra().bch(box.point(t), lg);
    if (!u_zero) w = m.algebra().bch(u, w);
    return f.eval(m.reduce_first_kind(w).point);
  });
}

// --- dichotomy ------------------------------------------------------------

namespace {

struct ShellScan {
  int l = 0;
  long long shell = 0;
  const std::vector<VecD>* proj = nullptr;  // abelianized directions
  const std::vector<double>* thresholds = nullptr;
  std::vector<long long> z;
  std::uint64_t candidates = 0;

  bool hits_bounds() const {
    for (size_t i = 0; i < proj->size(); ++i) {
      double dot = 0.0;
      for (int j = 0; j < l; ++j)
        dot += static_cast<double>(z[j]) * (*proj)[i][j];
      if (std::fabs(dot) > (*thresholds)[i]) return false;
    }
    return true;
  }

  // lexicographic sweep of the canonical half of the sup-norm shell
  bool walk(int idx, bool touched, bool all_zero) {
    if (idx == l) {
      if (!touched) return false;
      ++candidates;
      return hits_bounds();
    }
    const long long lo = all_zero ? 0 : -shell;
    for (long long v = lo; v <= shell; ++v) {
      // remaining coordinates must be able to reach the shell
      if (!touched && std::llabs(v) != shell && idx == l - 1) continue;
      z[idx] = v;
      if (walk(idx + 1, touched || std::llabs(v) == shell,
               all_zero && v == 0))
        return true;
    }
    z[idx] = 0;
    return false;
  }
};

}  // namespace

DichotomyResult dichotomy_probe(const BoxMap& box, int abelian_dim,
                                double delta, double l1, double l2,
                                double multiplier) {
  if (!(delta > 0.0) || !(delta < 0.5))
    throw ConfigError("dichotomy delta must be in (0, 1/2)");
  if (!(multiplier > 0.0)) throw ConfigError("multiplier must be positive");
  const int l = abelian_dim;
  if (l < 1 || l > box.dim())
    throw DimensionMismatch("abelian dimension out of range");

  DichotomyResult res;
  res.z_bound =
      static_cast<long long>(std::floor(multiplier * std::pow(delta, -l1)));
  for (int i = 0; i < box.k(); ++i)
    res.pairing_bounds.push_back(multiplier * std::pow(delta, -l2) /
                                 box.sides[i]);
  if (res.z_bound < 1) return res;  // vacuously equidistributed

  const double total = std::pow(2.0 * res.z_bound + 1.0, l);
  if (total > 1e8)
    throw SearchBoxTooLarge(
        "dichotomy search box has ~" + std::to_string(total) +
        " candidates (> 1e8); reduce delta, L1 or the multiplier");

  std::vector<VecD> proj;
  for (const auto& w : box.dirs)
    proj.emplace_back(w.begin(), w.begin() + l);

  ShellScan scan;
  scan.l = l;
  scan.proj = &proj;
  scan.thresholds = &res.pairing_bounds;
  scan.z.assign(l, 0);
  for (long long s = 1; s <= res.z_bound; ++s) {
    scan.shell = s;
    if (scan.walk(0, false, true)) {
      res.equidistributed = false;
      res.z = scan.z;
      res.candidates = scan.candidates;
      return res;
    }
  }
  res.candidates = scan.candidates;
  return res;
}

// --- rate experiments -------------------------------------------------

namespace {

struct Reference {
  double mu = 0.0;
  bool exact = false;
};

Reference reference_integral(const Observable& f, std::uint64_t budget,
                             std::uint64_t seed, std::uint64_t stream,
                             int workers) {
  if (auto mu = f.exact_integral()) return {*mu, true};
  return {haar_mean(f, budget, seed, stream, workers).mean, false};
}

McResult accum_result(const McAccum& a) { return a.result(0); }

}  // namespace

RateReport box_rate_experiment(const Observable& f, const VecD& v,
                               const std::vector<VecD>& dirs, const VecD& u,
                               const Point& g,
                               const std::vector<double>& t_schedule,
                               std::uint64_t base_budget, std::uint64_t seed,
                               int workers, int panel_size,
                               int max_doublings) {
  if (t_schedule.empty()) throw ConfigError("empty T schedule");
  for (size_t i = 1; i < t_schedule.size(); ++i)
    if (!(t_schedule[i] > t_schedule[i - 1]))
      throw ConfigError("T schedule must be strictly increasing");
  if (panel_size < 1) throw ConfigError("panel size must be positive");
  const Nilmanifold& m = f.manifold();

  RateReport rep;
  const Reference ref =
      reference_integral(f, 10 * base_budget, seed, stream_id(0xE003, 0),
                         workers);
  rep.mu = ref.mu;
  if (!ref.exact) rep.flags.push_back("mu-estimated");

  // one panel of starts shared across the whole schedule
  std::vector<Point> starts{m.reduce(g.t).point};
  {
    RngStream rng(seed, stream_id(0xE001, 0));
    for (int j = 1; j < panel_size; ++j) starts.push_back(m.haar_sample(rng));
  }

  const int k = static_cast<int>(dirs.size());
  for (size_t ti = 0; ti < t_schedule.size(); ++ti) {
    const double t = t_schedule[ti];
    BoxMap box = BoxMap::validate(v, dirs, VecD(k, t));

    std::vector<McAccum> acc(starts.size(), McAccum(1));
    double rms_err = 0.0, rms_se = 0.0;
    std::string flag;
    std::uint64_t rung_budget = base_budget;
    for (int rung = 0; rung <= max_doublings; ++rung) {
      for (size_t j = 0; j < starts.size(); ++j) {
        const McResult r = box_average(
            f, box, u, starts[j], rung_budget, seed,
            stream_id(0xE002, ti, (static_cast<std::uint64_t>(rung) << 8) | j),
            workers);
        McAccum one(1);
        one.n = r.n;
        one.sum[0] = r.mean * static_cast<double>(r.n);
        one.sumsq[0] = r.se * r.se * static_cast<double>(r.n) *
                           static_cast<double>(r.n - 1) +
                       static_cast<double>(r.n) * r.mean * r.mean;
        acc[j].merge(one);
        rep.total_budget += r.n;
      }
      double se2 = 0.0, err2 = 0.0;
      for (auto& a : acc) {
        const McResult r = accum_result(a);
        err2 += (r.mean - rep.mu) * (r.mean - rep.mu);
        se2 += r.se * r.se;
      }
      rms_err = std::sqrt(err2 / static_cast<double>(acc.size()));
      rms_se = std::sqrt(se2 / static_cast<double>(acc.size()));
      if (rms_err == 0.0 && rms_se == 0.0) {
        flag = "exact";
        break;
      }
      if (3.0 * rms_se <= rms_err) break;
      if (rung == max_doublings) flag = "noise";
      rung_budget = (rung == 0) ? base_budget : rung_budget * 2;
    }

    double mean_pooled = 0.0;
    for (auto& a : acc) mean_pooled += accum_result(a).mean;
    mean_pooled /= static_cast<double>(acc.size());
    rep.points.push_back({t, mean_pooled, rms_se, rms_err, flag});
  }

  // fit over clean points
  std::vector<double> xs, ys;
  bool any_noise = false, any_clean = false, any_exact = false;
  for (const auto& p : rep.points) {
    if (p.flag == "noise") { any_noise = true; continue; }
    if (p.flag == "exact") { any_exact = true; continue; }
    any_clean = true;
    xs.push_back(p.parameter);
    ys.push_back(p.error);
  }
  if (!any_clean) {
    if (any_noise && !any_exact)
      throw AllPointsNoiseDominated(
          "every schedule point is noise-dominated; raise the budget");
    rep.flags.push_back("ExactAgreement");
    return rep;
  }
  try {
    rep.fit = rate_fit(xs, ys, FitModel::LogLog);
  } catch (const TooFewPoints&) {
    rep.flags.push_back("TooFewPoints");
  }
  return rep;
}

// --- unstable charts -----------------------------------------------------

UnstableChart UnstableChart::build(const JordanSplit& split, VecD sides) {
  UnstableChart c;
  c.basis = split.unstable;
  if (c.basis.empty())
    throw ConfigError("automorphism has no unstable subspace");
  if (sides.size() != c.basis.size())
    throw DimensionMismatch("chart box needs " +
                            std::to_string(c.basis.size()) + " sides, got " +
                            std::to_string(sides.size()));
  for (double t : sides)
    if (!(t > 0.0)) throw ConfigError("chart box sides must be positive");
  c.sides = std::move(sides);
  return c;
}

VecD psi_log(const Nilmanifold& m, const UnstableChart& chart, const VecD& b) {
  if (b.size() != chart.basis.size())
    throw DimensionMismatch("psi argument length != chart dimension");
  const auto& g = m.algebra();
  VecD log(m.dim(), 0.0);
  for (size_t i = 0; i < b.size(); ++i) {
    VecD step(m.dim());
    for (int j = 0; j < m.dim(); ++j) step[j] = b[i] * chart.basis[i][j];
    log = (i == 0) ? step : g.bch(log, step);
  }
  return log;
}

double psi_volume_element(const Nilmanifold& m, const UnstableChart& chart,
                          const VecD& b, double h) {
  const int s = chart.s();
  const int d = m.dim();
  Eigen::MatrixXd j(d, s);
  for (int i = 0; i < s; ++i) {
    VecD bp = b, bm = b;
    bp[i] += h;
    bm[i] -= h;
    const VecD fp = psi_log(m, chart, bp);
    const VecD fm = psi_log(m, chart, bm);
    for (int r = 0; r < d; ++r) j(r, i) = (fp[r] - fm[r]) / (2.0 * h);
  }
  return std::sqrt((j.transpose() * j).determinant());
}

namespace {

// dense double copy of the exact matrix power, with an overflow guard
std::vector<double> power_matrix_d(const Automorphism& a, int n) {
  const RatMat p = rat_pow(a.matrix(), n);
  std::vector<double> out(static_cast<size_t>(p.rows) * p.cols);
  for (int i = 0; i < p.rows; ++i)
    for (int j = 0; j < p.cols; ++j) {
      const double v = to_double(p.at(i, j));
      if (!std::isfinite(v))
        throw HorizonExceeded("matrix power overflows double precision at n=" +
                              std::to_string(n));
      out[static_cast<size_t>(i) * p.cols + j] = v;
    }
  return out;
}

VecD apply_dense(const std::vector<double>& mat, const VecD& x) {
  const int d = static_cast<int>(x.size());
  VecD y(d, 0.0);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      y[i] += mat[static_cast<size_t>(i) * d + j] * x[j];
  return y;
}

}  // namespace

McResult unstable_average(const Observable& f, const Automorphism& a,
                          const UnstableChart& chart, const Point& h,
                          const Point& g, int n, std::uint64_t budget,
                          std::uint64_t seed, std::uint64_t stream,
                          int workers) {
  if (n < 0) throw ConfigError("unstable average needs n >= 0");
  const Nilmanifold& m = f.manifold();
  if (m.dim() != a.dim())
    throw DimensionMismatch("observable and automorphism dimensions differ");

  const std::vector<double> mn = power_matrix_d(a, n);
  const VecD lh = m.lift(h);
  const VecD lg = m.lift(g);
  const int s = chart.s();

  return mc_mean(budget, workers, seed, stream, [&](RngStream& rng) {
    VecD b(s);
    for (int i = 0; i < s; ++i) b[i] = rng.uniform01() * chart.sides[i];
    VecD w = m.algebra().bch(lh, psi_log(m, chart, b));
    w = apply_dense(mn, w);
    w = m.algebra().bch(w, lg);
    return f.eval(m.reduce_first_kind(w).point);
  });
}

RateReport unstable_rate_experiment(const Observable& f, const Automorphism& a,
                                    const UnstableChart& chart, const Point& h,
                                    const Point& g,
                                    const std::vector<int>& n_schedule,
                                    std::uint64_t base_budget,
                                    std::uint64_t seed, int workers,
                                    int max_doublings) {
  if (n_schedule.empty()) throw ConfigError("empty n schedule");
  for (size_t i = 1; i < n_schedule.size(); ++i)
    if (n_schedule[i] <= n_schedule[i - 1])
      throw ConfigError("n schedule must be strictly increasing");

  RateReport rep;
  const Reference ref = reference_integral(
      f, 10 * base_budget, seed, stream_id(0xE005, 0), workers);
  rep.mu = ref.mu;
  if (!ref.exact) rep.flags.push_back("mu-estimated");

  for (size_t ni = 0; ni < n_schedule.size(); ++ni) {
    const int n = n_schedule[ni];
    McAccum acc(1);
    double err = 0.0, se = 0.0;
    std::string flag;
    std::uint64_t rung_budget = base_budget;
    for (int rung = 0; rung <= max_doublings; ++rung) {
      const McResult r = unstable_average(
          f, a, chart, h, g, n, rung_budget, seed,
          stream_id(0xE004, ni, static_cast<std::uint64_t>(rung)), workers);
      McAccum one(1);
      one.n = r.n;
      one.sum[0] = r.mean * static_cast<double>(r.n);
      one.sumsq[0] = r.se * r.se * static_cast<double>(r.n) *
                         static_cast<double>(r.n - 1) +
                     static_cast<double>(r.n) * r.mean * r.mean;
      acc.merge(one);
      rep.total_budget += r.n;

      const McResult c = accum_result(acc);
      err = std::fabs(c.mean - rep.mu);
      se = c.se;
      if (err == 0.0 && se == 0.0) { flag = "exact"; break; }
      if (3.0 * se <= err) break;
      if (rung == max_doublings) flag = "noise";
      rung_budget = (rung == 0) ? base_budget : rung_budget * 2;
    }
    const McResult c = accum_result(acc);
    rep.points.push_back({static_cast<double>(n), c.mean, se, err, flag});
  }

  std::vector<double> xs, ys;
  bool any_noise = false, any_clean = false, any_exact = false;
  for (const auto& p : rep.points) {
    if (p.flag == "noise") { any_noise = true; continue; }
    if (p.flag == "exact") { any_exact = true; continue; }
    any_clean = true;
    xs.push_back(p.parameter);
    ys.push_back(p.error);
  }
  if (!any_clean) {
    if (any_noise && !any_exact)
      throw AllPointsNoiseDominated(
          "every schedule point is noise-dominated; raise the budget");
    rep.flags.push_back("ExactAgreement");
    return rep;
  }
  try {
    rep.fit = rate_fit(xs, ys, FitModel::LogLinear);
  } catch (const TooFewPoints&) {
    rep.flags.push_back("TooFewPoints");
  }
  return rep;
}

}  // namespace nilmix
