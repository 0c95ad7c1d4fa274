#include "nilmix/stochastics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <thread>

#include "nilmix/errors.hpp"
#include "nilmix/rational.hpp"

namespace nilmix {

namespace {

// x -> alpha(x) with a row-major float matrix acting on first-kind coords
Point float_step(const Nilmanifold& m, const std::vector<double>& a,
                 const Point& x) {
  const int d = m.dim();
  const VecD w = m.lift(x);
  VecD y(d, 0.0);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      y[i] += a[static_cast<size_t>(i) * d + j] * w[j];
  return m.reduce_first_kind(y).point;
}

McAccum accum_from(const McResult& r) {
  McAccum a(1);
  a.n = r.n;
  a.sum[0] = r.mean * static_cast<double>(r.n);
  a.sumsq[0] = r.se * r.se * static_cast<double>(r.n) *
                   static_cast<double>(r.n > 0 ? r.n - 1 : 0) +
               static_cast<double>(r.n) * r.mean * r.mean;
  return a;
}

// one independent stream per path index, so results do not depend on the
// worker count; blocks are claimed through an atomic cursor
template <class PathFn>
void run_paths(std::uint64_t count, int workers, std::uint64_t seed,
               std::uint64_t stream, PathFn&& fn) {
  if (workers < 1) workers = 1;
  if (workers == 1 || count < 128) {
    for (std::uint64_t p = 0; p < count; ++p) {
      RngStream rng(seed, stream, p);
      fn(p, rng);
    }
    return;
  }
  std::atomic<std::uint64_t> cursor{0};
  const std::uint64_t block = 64;
  auto work = [&]() {
    for (;;) {
      const std::uint64_t lo = cursor.fetch_add(block);
      if (lo >= count) return;
      const std::uint64_t hi = std::min(count, lo + block);
      for (std::uint64_t p = lo; p < hi; ++p) {
        RngStream rng(seed, stream, p);
        fn(p, rng);
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) pool.emplace_back(work);
  for (auto& t : pool) t.join();
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double ks_to_normal(std::vector<double> v, double sigma) {
  if (!(sigma > 0.0) || v.empty()) return 1.0;
  std::sort(v.begin(), v.end());
  const double nn = static_cast<double>(v.size());
  double d = 0.0;
  for (size_t i = 0; i < v.size(); ++i) {
    const double p = normal_cdf(v[i] / sigma);
    d = std::max(d, (static_cast<double>(i) + 1.0) / nn - p);
    d = std::max(d, p - static_cast<double>(i) / nn);
  }
  return d;
}

}  // namespace

// --- orbit engine ---------------------------------------------------------

OrbitEngine::OrbitEngine(Automorphism a, long long horizon)
    : aut_(std::move(a)), horizon_(horizon) {
  if (horizon_ < 1) throw ConfigError("orbit horizon must be positive");
  int levels = 0;
  while ((1LL << levels) < horizon_) ++levels;
  pow2_.reserve(levels + 1);
  pow2inv_.reserve(levels + 1);
  pow2_.push_back(aut_.matrix());
  pow2inv_.push_back(aut_.matrix_inverse());
  for (int k = 1; k <= levels; ++k) {
    pow2_.push_back(pow2_.back() * pow2_.back());
    pow2inv_.push_back(pow2inv_.back() * pow2inv_.back());
  }
  const RatMat& inv = aut_.matrix_inverse();
  const int d = aut_.dim();
  ainv_d_.resize(static_cast<size_t>(d) * d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      ainv_d_[static_cast<size_t>(i) * d + j] = to_double(inv.at(i, j));
}

RatMat OrbitEngine::power(long long n) const {
  const int d = aut_.dim();
  if (n > horizon_ || n < -horizon_)
    throw HorizonExceeded("power " + std::to_string(n) +
                          " beyond configured horizon " +
                          std::to_string(horizon_));
  const auto& table = n >= 0 ? pow2_ : pow2inv_;
  unsigned long long k = n >= 0 ? static_cast<unsigned long long>(n)
                                : static_cast<unsigned long long>(-n);
  RatMat acc = RatMat::identity(d);
  for (size_t bit = 0; k != 0; ++bit, k >>= 1)
    if (k & 1ULL) acc = acc * table[bit];
  return acc;
}

PointQ OrbitEngine::apply_exact(long long n, const PointQ& x) const {
  const Nilmanifold& m = manifold();
  if (static_cast<int>(x.t.size()) != m.dim())
    throw DimensionMismatch("point dimension != manifold dimension");
  const RatVec w = m.lift(x);
  const RatVec y = power(n).apply(w);
  return m.reduce_first_kind(y).point;
}

Point OrbitEngine::apply(long long n, const Point& x) const {
  PointQ xq;
  xq.t.reserve(x.t.size());
  for (double c : x.t) xq.t.push_back(rat_from_double(c));
  const PointQ yq = apply_exact(n, xq);
  VecD t(yq.t.size());
  for (size_t i = 0; i < t.size(); ++i) t[i] = to_double(yq.t[i]);
  return manifold().reduce(t).point;  // re-box any coordinate rounded to 1.0
}

Point OrbitEngine::step(const Point& x) const {
  return float_step(manifold(), aut_.matrix_d(), x);
}

Point OrbitEngine::step_back(const Point& x) const {
  return float_step(manifold(), ainv_d_, x);
}

// --- correlation estimators -----------------------------------------------

namespace {

// exponents sorted, shifted to start at zero
McResult orbit_product_mean(const OrbitEngine& eng,
                            const std::vector<const Observable*>& fs,
                            const std::vector<long long>& ns,
                            std::uint64_t budget, std::uint64_t seed,
                            std::uint64_t stream, int workers) {
  const Nilmanifold& m = eng.manifold();
  for (const Observable* f : fs)
    if (f->manifold().dim() != m.dim())
      throw DimensionMismatch("observable dimension != manifold dimension");
  return mc_mean(budget, workers, seed, stream, [&](RngStream& rng) {
    Point cur = m.haar_sample(rng);
    double val = fs[0]->eval(cur);
    for (size_t i = 1; i < fs.size(); ++i) {
      for (long long k = ns[i - 1]; k < ns[i]; ++k) cur = eng.step(cur);
      val *= fs[i]->eval(cur);
    }
    return val;
  });
}

}  // namespace

McResult correlation(const OrbitEngine& eng, const Observable& f0,
                     const Observable& f1, long long n, std::uint64_t budget,
                     std::uint64_t seed, std::uint64_t stream, int workers) {
  if (n < 0) throw ConfigError("correlation lag must be nonnegative");
  return orbit_product_mean(eng, {&f0, &f1}, {0, n}, budget, seed, stream,
                            workers);
}

McResult multi_correlation(const OrbitEngine& eng,
                           const std::vector<Observable>& fs,
                           const std::vector<long long>& ns,
                           std::uint64_t budget, std::uint64_t seed,
                           std::uint64_t stream, int workers) {
  if (fs.size() != ns.size())
    throw DimensionMismatch("observable and exponent lists differ in length");
  if (fs.size() < 2)
    throw ConfigError("multi-correlation needs at least two factors");
  if (!eng.automorphism().is_ergodic().ergodic)
    throw NotErgodic("multi-correlation requires an ergodic automorphism");

  std::vector<size_t> order(fs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return ns[a] < ns[b]; });
  std::vector<const Observable*> fp;
  std::vector<long long> shifted;
  const long long base = ns[order.front()];
  for (size_t i : order) {
    fp.push_back(&fs[i]);
    shifted.push_back(ns[i] - base);
  }
  if (shifted.back() > eng.horizon())
    throw HorizonExceeded("exponent span " + std::to_string(shifted.back()) +
                          " beyond horizon " + std::to_string(eng.horizon()));
  return orbit_product_mean(eng, fp, shifted, budget, seed, stream, workers);
}

// --- exact character calculus ---------------------------------------------

namespace {

// frequency of f o alpha^n on the abelianization torus
std::optional<std::vector<BigInt>> transported_freq(const Automorphism& a,
                                                    const Observable& f,
                                                    long long n) {
  const auto freq = f.character_freq();
  if (!freq) return std::nullopt;
  const RatMat ab = a.abelianization_matrix();
  if (static_cast<int>(freq->size()) != ab.rows) return std::nullopt;
  const RatMat at = rat_pow(ab.transpose(), n);
  RatVec v(freq->size());
  for (size_t i = 0; i < freq->size(); ++i) v[i] = Rat((*freq)[i]);
  const RatVec w = at.apply(v);
  std::vector<BigInt> out;
  for (const Rat& q : w) {
    if (!is_integer(q)) return std::nullopt;  // lattice check failed upstream
    out.push_back(numerator(q));
  }
  return out;
}

bool all_zero(const std::vector<BigInt>& v) {
  return std::all_of(v.begin(), v.end(),
                     [](const BigInt& x) { return x == 0; });
}

}  // namespace

std::optional<double> exact_character_correlation(const Automorphism& a,
                                                  const Observable& f0,
                                                  const Observable& f1,
                                                  long long n) {
  if (n < 0) return std::nullopt;
  const auto m0 = transported_freq(a, f0, 0);
  const auto m1 = transported_freq(a, f1, n);
  if (!m0 || !m1) return std::nullopt;
  // products of torus characters integrate to 0 unless frequencies cancel
  if (f0.character_phase() != f1.character_phase()) return 0.0;
  bool plus = true, minus = true;
  for (size_t i = 0; i < m0->size(); ++i) {
    if ((*m1)[i] != (*m0)[i]) plus = false;
    if ((*m1)[i] != -(*m0)[i]) minus = false;
  }
  const double p = plus ? 0.5 : 0.0;
  const double q = minus ? 0.5 : 0.0;
  return f0.character_phase() == Phase::Cos ? p + q : p - q;
}

std::optional<double> exact_character_product_integral(
    const Automorphism& a, const std::vector<Observable>& fs,
    const std::vector<long long>& ns) {
  if (fs.size() != ns.size() || fs.empty()) return std::nullopt;
  if (fs.size() > 24) return std::nullopt;  // sign enumeration would explode
  const long long base = *std::min_element(ns.begin(), ns.end());
  std::vector<std::vector<BigInt>> ms;
  for (size_t i = 0; i < fs.size(); ++i) {
    auto m = transported_freq(a, fs[i], ns[i] - base);
    if (!m) return std::nullopt;
    if (fs[i].character_phase() == Phase::Sin) {
      if (all_zero(*m)) return 0.0;  // sin(0) factor kills the product
      return std::nullopt;           // mixed sine products not handled
    }
    ms.push_back(std::move(*m));
  }
  // prod cos(2 pi <m_i, t>) = 2^{-s} sum over sign choices of cos(2 pi <sum>)
  const size_t s = ms.size() - 1;
  const size_t l = ms[0].size();
  std::uint64_t hits = 0;
  for (std::uint64_t mask = 0; mask < (1ULL << s); ++mask) {
    bool zero = true;
    for (size_t c = 0; c < l && zero; ++c) {
      BigInt acc = ms[0][c];
      for (size_t i = 0; i < s; ++i) {
        if (mask & (1ULL << i))
          acc -= ms[i + 1][c];
        else
          acc += ms[i + 1][c];
      }
      if (acc != 0) zero = false;
    }
    if (zero) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(1ULL << s);
}

// --- decay experiments ------------------------------------------------

namespace {

struct MeanInfo {
  double value = 0.0;
  bool exact = false;
};

MeanInfo observable_mean(const Observable& f, std::uint64_t budget,
                         std::uint64_t seed, std::uint64_t stream,
                         int workers) {
  if (auto mu = f.exact_integral()) return {*mu, true};
  return {haar_mean(f, budget, seed, stream, workers).mean, false};
}

// doubling-budget estimate of one schedule point; stops once the deviation
// from mu clears three standard errors
struct LadderOutcome {
  McResult pooled;
  double error = 0.0;
  std::string flag;
};

template <class EstFn>
LadderOutcome budget_ladder(double mu, std::uint64_t base_budget,
                            int max_doublings, std::uint64_t& total_spent,
                            EstFn&& estimate) {
  McAccum acc(1);
  LadderOutcome out;
  std::uint64_t rung_budget = base_budget;
  for (int rung = 0; rung <= max_doublings; ++rung) {
    acc.merge(accum_from(estimate(rung_budget, rung)));
    total_spent += rung_budget;
    const McResult c = acc.result(0);
    out.error = std::fabs(c.mean - mu);
    if (out.error == 0.0 && c.se == 0.0) {
      out.flag = "exact";
      break;
    }
    if (3.0 * c.se <= out.error) break;
    if (rung == max_doublings) out.flag = "noise";
    rung_budget = (rung == 0) ? base_budget : rung_budget * 2;
  }
  out.pooled = acc.result(0);
  return out;
}

void fit_clean_points(RateReport& rep, FitModel model) {
  std::vector<double> xs, ys;
  bool any_noise = false, any_clean = false, any_exact = false;
  for (const auto& p : rep.points) {
    if (p.flag == "noise") {
      any_noise = true;
      continue;
    }
    if (p.flag == "exact") {
      any_exact = true;
      continue;
    }
    any_clean = true;
    xs.push_back(p.parameter);
    ys.push_back(p.error);
  }
  if (!any_clean) {
    if (any_noise && !any_exact)
      throw AllPointsNoiseDominated(
          "every schedule point is noise-dominated; raise the budget");
    rep.flags.push_back("ExactAgreement");
    return;
  }
  try {
    rep.fit = rate_fit(xs, ys, model);
  } catch (const TooFewPoints&) {
    rep.flags.push_back("TooFewPoints");
  }
}

void check_schedule(const std::vector<long long>& sched, const char* what) {
  if (sched.empty()) throw ConfigError(std::string("empty ") + what);
  if (sched.front() < 0)
    throw ConfigError(std::string(what) + " entries must be nonnegative");
  for (size_t i = 1; i < sched.size(); ++i)
    if (sched[i] <= sched[i - 1])
      throw ConfigError(std::string(what) + " must be strictly increasing");
}

}  // namespace

RateReport mixing_experiment(const OrbitEngine& eng, const Observable& f0,
                             const Observable& f1,
                             const std::vector<long long>& n_schedule,
                             std::uint64_t budget, std::uint64_t seed,
                             int workers, int max_doublings) {
  check_schedule(n_schedule, "n schedule");
  if (!eng.automorphism().is_ergodic().ergodic)
    throw NotErgodic("mixing experiment requires an ergodic automorphism");

  RateReport rep;
  const MeanInfo mu0 = observable_mean(f0, 10 * budget, seed,
                                       stream_id(0xF001, 0), workers);
  const MeanInfo mu1 = observable_mean(f1, 10 * budget, seed,
                                       stream_id(0xF002, 0), workers);
  rep.mu = mu0.value * mu1.value;
  if (!mu0.exact || !mu1.exact) rep.flags.push_back("mu-estimated");

  // when the character calculus predicts zero error at every lag there is
  // no decay curve to fit; verify the estimates statistically instead
  std::vector<double> predicted;
  bool have_exact = true;
  for (long long n : n_schedule) {
    const auto p = exact_character_correlation(eng.automorphism(), f0, f1, n);
    if (!p) {
      have_exact = false;
      break;
    }
    predicted.push_back(*p);
  }
  const bool exact_zero =
      have_exact && std::all_of(predicted.begin(), predicted.end(),
                                [&](double p) { return p == rep.mu; });

  if (exact_zero) {
    for (size_t i = 0; i < n_schedule.size(); ++i) {
      const McResult r =
          correlation(eng, f0, f1, n_schedule[i], budget, seed,
                      stream_id(0xF003, 0), workers);
      rep.total_budget += r.n;
      const double err = std::fabs(r.mean - rep.mu);
      rep.points.push_back({static_cast<double>(n_schedule[i]), r.mean, r.se,
                            err,
                            err <= 3.0 * r.se ? "exact-zero" : "inconsistent"});
    }
    rep.flags.push_back("ExactMixing");
    return rep;
  }

  for (size_t i = 0; i < n_schedule.size(); ++i) {
    const long long n = n_schedule[i];
    const LadderOutcome out = budget_ladder(
        rep.mu, budget, max_doublings, rep.total_budget,
        [&](std::uint64_t b, int rung) {
          return correlation(eng, f0, f1, n, b, seed,
                             stream_id(0xF003, static_cast<std::uint64_t>(rung)),
                             workers);
        });
    rep.points.push_back({static_cast<double>(n), out.pooled.mean,
                          out.pooled.se, out.error, out.flag});
  }
  fit_clean_points(rep, FitModel::LogLinear);
  return rep;
}

RateReport multimix_experiment(const OrbitEngine& eng,
                               const std::vector<Observable>& fs,
                               const std::vector<long long>& gap_schedule,
                               std::uint64_t budget, std::uint64_t seed,
                               int workers, int max_doublings) {
  if (fs.size() < 2)
    throw ConfigError("multi-mixing needs at least two observables");
  check_schedule(gap_schedule, "gap schedule");
  if (gap_schedule.front() < 1)
    throw ConfigError("gaps must be positive");
  if (!eng.automorphism().is_ergodic().ergodic)
    throw NotErgodic("multi-mixing requires an ergodic automorphism");
  const long long span =
      gap_schedule.back() * static_cast<long long>(fs.size() - 1);
  if (span > eng.horizon())
    throw HorizonExceeded("largest exponent " + std::to_string(span) +
                          " beyond horizon " + std::to_string(eng.horizon()));

  RateReport rep;
  rep.mu = 1.0;
  bool all_exact = true;
  for (size_t i = 0; i < fs.size(); ++i) {
    const MeanInfo mi = observable_mean(
        fs[i], 10 * budget, seed, stream_id(0xF005, i), workers);
    rep.mu *= mi.value;
    all_exact = all_exact && mi.exact;
  }
  if (!all_exact) rep.flags.push_back("mu-estimated");

  auto exponents = [&](long long gap) {
    std::vector<long long> ns;
    for (size_t i = 0; i < fs.size(); ++i)
      ns.push_back(gap * static_cast<long long>(i));
    return ns;
  };

  std::vector<double> predicted;
  bool have_exact = true;
  for (long long gap : gap_schedule) {
    const auto p = exact_character_product_integral(eng.automorphism(), fs,
                                                    exponents(gap));
    if (!p) {
      have_exact = false;
      break;
    }
    predicted.push_back(*p);
  }
  const bool exact_zero =
      have_exact && std::all_of(predicted.begin(), predicted.end(),
                                [&](double p) { return p == rep.mu; });

  if (exact_zero) {
    for (size_t i = 0; i < gap_schedule.size(); ++i) {
      const McResult r =
          multi_correlation(eng, fs, exponents(gap_schedule[i]), budget, seed,
                            stream_id(0xF004, 0), workers);
      rep.total_budget += r.n;
      const double err = std::fabs(r.mean - rep.mu);
      rep.points.push_back({static_cast<double>(gap_schedule[i]), r.mean,
                            r.se, err,
                            err <= 3.0 * r.se ? "exact-zero" : "inconsistent"});
    }
    rep.flags.push_back("ExactMixing");
    return rep;
  }

  for (size_t i = 0; i < gap_schedule.size(); ++i) {
    const long long gap = gap_schedule[i];
    const LadderOutcome out = budget_ladder(
        rep.mu, budget, max_doublings, rep.total_budget,
        [&](std::uint64_t b, int rung) {
          return multi_correlation(
              eng, fs, exponents(gap), b, seed,
              stream_id(0xF004, static_cast<std::uint64_t>(rung)), workers);
        });
    rep.points.push_back({static_cast<double>(gap), out.pooled.mean,
                          out.pooled.se, out.error, out.flag});
  }
  fit_clean_points(rep, FitModel::LogLinear);
  return rep;
}

// --- Green-Kubo variance -------------------------------------------------

VarianceEstimate green_kubo(const OrbitEngine& eng, const Observable& f,
                            int window, std::uint64_t budget,
                            std::uint64_t seed, std::uint64_t stream,
                            int workers, bool throw_on_negative) {
  if (window < 1) throw ConfigError("variance window must be >= 1");
  if (window > eng.horizon())
    throw HorizonExceeded("variance window beyond orbit horizon");
  if (budget < 2) throw ConfigError("variance estimate needs budget >= 2");
  const Nilmanifold& m = eng.manifold();
  if (f.manifold().dim() != m.dim())
    throw DimensionMismatch("observable dimension != manifold dimension");

  const int jmax = window;
  const McAccum acc = mc_accumulate_vec(
      budget, workers, seed, stream, jmax + 1,
      [&](RngStream& rng, std::vector<double>& buf) {
        Point cur = m.haar_sample(rng);
        const double f0 = f.eval(cur);
        buf[0] = f0 * f0;
        for (int j = 1; j <= jmax; ++j) {
          cur = eng.step(cur);
          buf[j] = f0 * f.eval(cur);
        }
      });

  VarianceEstimate est;
  est.window_requested = jmax;
  for (int j = 0; j <= jmax; ++j) {
    est.correlations.push_back(acc.mean(j));
    est.correlation_ses.push_back(acc.se(j));
  }

  // truncate before the first run of three consecutive noise-level terms
  int used = jmax;
  for (int j = 1; j + 2 <= jmax; ++j) {
    bool quiet = true;
    for (int k = j; k < j + 3; ++k)
      if (std::fabs(est.correlations[k]) > est.correlation_ses[k])
        quiet = false;
    if (quiet) {
      used = j - 1;
      break;
    }
  }
  est.window_used = used;
  if (used == jmax &&
      std::fabs(est.correlations[jmax]) > 3.0 * est.correlation_ses[jmax])
    est.flags.push_back("WindowTail");

  double sum = est.correlations[0];
  double var = est.correlation_ses[0] * est.correlation_ses[0];
  for (int j = 1; j <= used; ++j) {
    sum += 2.0 * est.correlations[j];
    var += 4.0 * est.correlation_ses[j] * est.correlation_ses[j];
  }
  est.sigma2_raw = sum;
  est.se = std::sqrt(var);
  if (sum < -3.0 * est.se) {
    if (throw_on_negative)
      throw NegativeVarianceEstimate(
          "truncated variance " + std::to_string(sum) + " below -3*SE " +
          std::to_string(est.se) + "; widen the window or raise the budget");
    est.flags.push_back("negative-variance");
  }
  est.sigma2 = sum;
  if (sum < 0.0) {
    est.sigma2 = 0.0;
    if (sum >= -3.0 * est.se) est.flags.push_back("VarianceClamped");
  }
  return est;
}

// --- central limit theorem -------------------------------------------------

namespace {

Observable centered_copy(const Observable& f, std::uint64_t budget,
                         std::uint64_t seed, std::uint64_t stream, int workers,
                         double& mean_used, bool& mean_exact) {
  const MeanInfo mu = observable_mean(f, budget, seed, stream, workers);
  mean_used = mu.value;
  mean_exact = mu.exact;
  if (mu.value == 0.0) return f;
  return f.shifted(-mu.value);
}

}  // namespace

CltReport clt_experiment(const OrbitEngine& eng, const Observable& f,
                         const std::vector<long long>& n_schedule,
                         std::uint64_t path_count, int variance_window,
                         std::uint64_t gk_budget, std::uint64_t seed,
                         int workers) {
  check_schedule(n_schedule, "n schedule");
  if (n_schedule.front() < 1) throw ConfigError("path lengths must be >= 1");
  if (path_count < 2) throw ConfigError("need at least two paths");
  if (!eng.automorphism().is_ergodic().ergodic)
    throw NotErgodic("the normal limit requires an ergodic automorphism");

  CltReport rep;
  rep.n_schedule = n_schedule;
  rep.sample_count = path_count;
  const Observable fc =
      centered_copy(f, 10 * gk_budget, seed, stream_id(0xF010, 0), workers,
                    rep.mean_used, rep.mean_exact);

  const VarianceEstimate gk =
      green_kubo(eng, fc, variance_window, gk_budget, seed,
                 stream_id(0xF011, 0), workers, /*throw_on_negative=*/true);
  rep.sigma2_hat = gk.sigma2;
  rep.sigma2_se = gk.se;
  rep.window_requested = gk.window_requested;
  rep.window_used = gk.window_used;
  rep.correlations = gk.correlations;
  rep.correlation_ses = gk.correlation_ses;
  rep.flags = gk.flags;

  const Nilmanifold& m = eng.manifold();
  const double sigma = std::sqrt(rep.sigma2_hat);
  if (!(sigma > 0.0)) rep.flags.push_back("degenerate-normal");

  for (size_t ni = 0; ni < n_schedule.size(); ++ni) {
    const long long n = n_schedule[ni];
    std::vector<double> values(path_count, 0.0);
    run_paths(path_count, workers, seed, stream_id(0xF012, ni),
              [&](std::uint64_t p, RngStream& rng) {
                Point cur = m.haar_sample(rng);
                double s = 0.0;
                for (long long i = 0; i < n; ++i) {
                  s += fc.eval(cur);
                  cur = eng.step(cur);
                }
                values[p] = s / std::sqrt(static_cast<double>(n));
              });
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    var /= static_cast<double>(values.size() - 1);
    rep.empirical_variances.push_back(var);
    rep.ks_statistics.push_back(ks_to_normal(values, sigma));
  }
  return rep;
}

DonskerReport donsker_paths(const OrbitEngine& eng, const Observable& f,
                            long long n, std::uint64_t path_count,
                            int grid_points, int variance_window,
                            std::uint64_t gk_budget, std::uint64_t seed,
                            int workers) {
  if (n < 4) throw ConfigError("path length must be >= 4");
  if (path_count < 2) throw ConfigError("need at least two paths");
  if (grid_points < 2) throw ConfigError("grid needs at least two points");

  DonskerReport rep;
  rep.n = n;
  rep.path_count = path_count;
  const Observable fc =
      centered_copy(f, 10 * gk_budget, seed, stream_id(0xF020, 0), workers,
                    rep.mean_used, rep.mean_exact);

  const VarianceEstimate gk =
      green_kubo(eng, fc, variance_window, gk_budget, seed,
                 stream_id(0xF021, 0), workers, /*throw_on_negative=*/false);
  rep.sigma2_hat = gk.sigma2;
  rep.sigma2_se = gk.se;
  rep.flags = gk.flags;
  if (gk.sigma2_raw <= 3.0 * gk.se)
    throw ZeroVariance(
        "asymptotic variance " + std::to_string(gk.sigma2_raw) +
        " is consistent with zero: the observable behaves like a coboundary; "
        "solve the cohomological equation instead of scaling paths");

  for (int k = 0; k < grid_points; ++k)
    rep.grid.push_back(static_cast<double>(k) /
                       static_cast<double>(grid_points - 1));
  const double norm =
      1.0 / std::sqrt(static_cast<double>(n) * rep.sigma2_hat);

  const Nilmanifold& m = eng.manifold();
  rep.paths.assign(path_count, std::vector<double>(grid_points, 0.0));
  std::vector<double> q25(path_count, 0.0), q50(path_count, 0.0);

  run_paths(path_count, workers, seed, stream_id(0xF022, 0),
            [&](std::uint64_t p, RngStream& rng) {
              std::vector<double> s(static_cast<size_t>(n) + 1, 0.0);
              Point cur = m.haar_sample(rng);
              for (long long i = 0; i < n; ++i) {
                s[i + 1] = s[i] + fc.eval(cur);
                cur = eng.step(cur);
              }
              auto at = [&](double t) {
                const double u = t * static_cast<double>(n);
                const auto lo = static_cast<long long>(std::floor(u));
                if (lo >= n) return norm * s[n];
                const double frac = u - static_cast<double>(lo);
                return norm * (s[lo] + frac * (s[lo + 1] - s[lo]));
              };
              for (int k = 0; k < grid_points; ++k)
                rep.paths[p][k] = at(rep.grid[k]);
              q25[p] = at(0.25);
              q50[p] = at(0.5);
            });

  for (int k = 0; k < grid_points; ++k) {
    double mean = 0.0;
    for (const auto& row : rep.paths) mean += row[k];
    mean /= static_cast<double>(path_count);
    double var = 0.0;
    for (const auto& row : rep.paths)
      var += (row[k] - mean) * (row[k] - mean);
    var /= static_cast<double>(path_count - 1);
    rep.variance_at_grid.push_back(var);
  }

  {
    double tx = 0.0, ty = 0.0;
    for (int k = 0; k < grid_points; ++k) {
      tx += rep.grid[k];
      ty += rep.variance_at_grid[k];
    }
    tx /= grid_points;
    ty /= grid_points;
    double sxx = 0.0, sxy = 0.0;
    for (int k = 0; k < grid_points; ++k) {
      sxx += (rep.grid[k] - tx) * (rep.grid[k] - tx);
      sxy += (rep.grid[k] - tx) * (rep.variance_at_grid[k] - ty);
    }
    rep.variance_slope = sxy / sxx;
  }

  {
    double ma = 0.0, mb = 0.0;
    for (std::uint64_t p = 0; p < path_count; ++p) {
      ma += q50[p] - q25[p];
      mb += q25[p];
    }
    ma /= static_cast<double>(path_count);
    mb /= static_cast<double>(path_count);
    double saa = 0.0, sbb = 0.0, sab = 0.0;
    for (std::uint64_t p = 0; p < path_count; ++p) {
      const double a = q50[p] - q25[p] - ma;
      const double b = q25[p] - mb;
      saa += a * a;
      sbb += b * b;
      sab += a * b;
    }
    rep.increment_correlation =
        (saa > 0.0 && sbb > 0.0) ? sab / std::sqrt(saa * sbb) : 0.0;
  }
  return rep;
}

// --- cohomological equation -------------------------------------------------

Observable coboundary_make(const Automorphism& a, const Observable& psi) {
  if (a.dim() != psi.manifold().dim())
    throw DimensionMismatch("automorphism and observable dimensions differ");
  auto mf = psi.manifold_ptr();
  const std::vector<double> mat = a.matrix_d();
  const Observable base = psi;
  auto fn = [mf, mat, base](const Point& x) {
    return base.eval(float_step(*mf, mat, x)) - base.eval(x);
  };
  return Observable::custom(std::move(mf), std::move(fn), 0.0, psi.theta(),
                            psi.label() + "@coboundary");
}

namespace {

void require_centered(const Observable& f, std::uint64_t seed,
                      std::uint64_t stream, int workers,
                      std::vector<std::string>& flags) {
  if (auto mu = f.exact_integral()) {
    if (*mu != 0.0)
      throw NotCentered("observable integrates to " + std::to_string(*mu));
    return;
  }
  const McResult r = haar_mean(f, 1u << 15, seed, stream, workers);
  if (std::fabs(r.mean) > 3.0 * r.se)
    throw NotCentered("sampled mean " + std::to_string(r.mean) +
                      " exceeds 3*SE " + std::to_string(r.se));
  flags.push_back("centering-checked-mc");
}

std::vector<double> scheme_weights(int n, CoboundaryScheme scheme,
                                   double abel_r) {
  std::vector<double> w(n, 1.0);
  switch (scheme) {
    case CoboundaryScheme::Partial:
      break;
    case CoboundaryScheme::Cesaro:
      for (int i = 0; i < n; ++i)
        w[i] = 1.0 - static_cast<double>(i) / static_cast<double>(n);
      break;
    case CoboundaryScheme::Abel:
      if (!(abel_r > 0.0) || !(abel_r < 1.0))
        throw ConfigError("abel weight must be in (0,1)");
      for (int i = 1; i < n; ++i) w[i] = w[i - 1] * abel_r;
      break;
  }
  return w;
}

}  // namespace

CoboundaryReport coboundary_solve(const OrbitEngine& eng, const Observable& f,
                                  int n, CoboundaryScheme scheme,
                                  double abel_r, std::uint64_t sample_count,
                                  std::uint64_t seed, int workers) {
  if (n < 1) throw ConfigError("orbit depth must be >= 1");
  if (n > eng.horizon())
    throw HorizonExceeded("orbit depth beyond configured horizon");
  if (sample_count < 1) throw ConfigError("need at least one residual sample");

  std::vector<std::string> flags;
  require_centered(f, seed, stream_id(0xF030, 0), workers, flags);
  const std::vector<double> w = scheme_weights(n, scheme, abel_r);

  const Nilmanifold& m = eng.manifold();
  std::vector<double> res(sample_count, 0.0), sup(sample_count, 0.0);
  run_paths(sample_count, workers, seed, stream_id(0xF031, 0),
            [&](std::uint64_t p, RngStream& rng) {
              Point cur = m.haar_sample(rng);
              std::vector<double> fv(static_cast<size_t>(n) + 1, 0.0);
              double fs = 0.0;
              for (int i = 0; i <= n; ++i) {
                fv[i] = f.eval(cur);
                fs = std::max(fs, std::fabs(fv[i]));
                if (i < n) cur = eng.step(cur);
              }
              double phi_x = 0.0, phi_ax = 0.0;
              for (int i = 0; i < n; ++i) {
                phi_x -= w[i] * fv[i];
                phi_ax -= w[i] * fv[i + 1];
              }
              res[p] = fv[0] - (phi_ax - phi_x);
              sup[p] = fs;
            });

  double rsup = 0.0, rl2 = 0.0, fsup = 0.0;
  for (std::uint64_t p = 0; p < sample_count; ++p) {
    rsup = std::max(rsup, std::fabs(res[p]));
    rl2 += res[p] * res[p];
    fsup = std::max(fsup, sup[p]);
  }
  rl2 = std::sqrt(rl2 / static_cast<double>(sample_count));

  auto mf = f.manifold_ptr();
  const std::vector<double> mat = eng.automorphism().matrix_d();
  const Observable base = f;
  const std::vector<double> wcopy = w;
  auto fn = [mf, mat, base, wcopy](const Point& x) {
    double acc = 0.0;
    Point cur = x;
    for (size_t i = 0; i < wcopy.size(); ++i) {
      acc += wcopy[i] * base.eval(cur);
      if (i + 1 < wcopy.size()) cur = float_step(*mf, mat, cur);
    }
    return -acc;
  };
  std::optional<double> phi_integral;
  if (f.exact_integral() && *f.exact_integral() == 0.0) phi_integral = 0.0;
  Observable phi = Observable::custom(mf, std::move(fn), phi_integral,
                                      f.theta(), f.label() + "@phi");

  CoboundaryReport rep{
      .phi = std::move(phi),
      .scheme = scheme,
      .n_used = n,
      .abel_r = scheme == CoboundaryScheme::Abel ? abel_r : 0.0,
      .residual_sup = rsup,
      .residual_l2 = rl2,
      .f_sup = fsup,
      .sample_count = sample_count,
      .flags = std::move(flags),
  };
  return rep;
}

CoboundaryTestReport coboundary_test(const OrbitEngine& eng,
                                     const Observable& f, int window,
                                     std::uint64_t budget, std::uint64_t seed,
                                     int workers) {
  CoboundaryTestReport rep;
  require_centered(f, seed, stream_id(0xF040, 0), workers, rep.flags);

  const VarianceEstimate gk =
      green_kubo(eng, f, window, budget, seed, stream_id(0xF041, 0), workers,
                 /*throw_on_negative=*/false);
  rep.sigma2_hat = gk.sigma2;
  rep.sigma2_se = gk.se;
  rep.window_used = gk.window_used;
  for (const auto& fl : gk.flags) rep.flags.push_back(fl);

  if (gk.sigma2_raw > 3.0 * gk.se) {
    rep.decision = CoboundaryDecision::NotCoboundary;
    return rep;
  }

  for (int n : {25, 50, 100, 200}) {
    if (n > eng.horizon()) break;
    const CoboundaryReport sol = coboundary_solve(
        eng, f, n, CoboundaryScheme::Cesaro, 0.0, 256, seed, workers);
    rep.residual_n_ladder.push_back(n);
    rep.residual_l2_ladder.push_back(sol.residual_l2);
    rep.f_sup = std::max(rep.f_sup, sol.f_sup);
  }
  if (rep.residual_l2_ladder.empty()) {
    rep.decision = CoboundaryDecision::Inconclusive;
    rep.flags.push_back("horizon-too-small");
    return rep;
  }
  const double last = rep.residual_l2_ladder.back();
  const bool shrinking = last <= rep.residual_l2_ladder.front();
  const bool small = last <= 0.05 * rep.f_sup;
  rep.decision = (shrinking && small) ? CoboundaryDecision::Coboundary
                                      : CoboundaryDecision::Inconclusive;
  return rep;
}

}  // namespace nilmix
