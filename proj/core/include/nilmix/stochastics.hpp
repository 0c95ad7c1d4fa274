#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nilmix/observables.hpp"
#include "nilmix/report.hpp"
#include "nilmix/spectral.hpp"

namespace nilmix {

// Iterates a validated automorphism on its manifold. Bulk statistics walk
// with single float steps (per-step rounding is a harmless perturbation for
// Monte-Carlo purposes); apply() instead goes through exact rational matrix
// powers and exact reduction, so compositions are honest at any n up to the
// horizon. Power tables are built once and shared read-only afterwards.
class OrbitEngine {
 public:
  explicit OrbitEngine(Automorphism a, long long horizon = 1 << 13);

  const Automorphism& automorphism() const { return aut_; }
  const Nilmanifold& manifold() const { return aut_.manifold(); }
  long long horizon() const { return horizon_; }

  // exact first-kind matrix of alpha^n, |n| <= horizon
  RatMat power(long long n) const;

  // exact pipeline: rationalize, power, reduce, round once at the end
  Point apply(long long n, const Point& x) const;
  PointQ apply_exact(long long n, const PointQ& x) const;

  Point step(const Point& x) const;       // float x -> alpha(x)
  Point step_back(const Point& x) const;  // float x -> alpha^{-1}(x)

 private:
  Automorphism aut_;
  long long horizon_;
  std::vector<RatMat> pow2_, pow2inv_;  // alpha^(2^k), alpha^(-2^k)
  std::vector<double> ainv_d_;          // row-major float inverse
};

// Plain Monte-Carlo estimate of E[f0(x) f1(alpha^n x)] over Haar samples.
// The stream is deliberately independent of n so schedules share their
// random numbers (variance reduction when differencing against the mean).
McResult correlation(const OrbitEngine& eng, const Observable& f0,
                     const Observable& f1, long long n, std::uint64_t budget,
                     std::uint64_t seed, std::uint64_t stream, int workers = 1);

// E[prod_i f_i(alpha^{n_i} x)]. Pairs (n_i, f_i) are sorted and shifted so
// the first exponent is zero (Haar invariance); with two factors and the
// same stream this reproduces correlation() sample for sample.
McResult multi_correlation(const OrbitEngine& eng,
                           const std::vector<Observable>& fs,
                           const std::vector<long long>& ns,
                           std::uint64_t budget, std::uint64_t seed,
                           std::uint64_t stream, int workers = 1);

// Exact value of E[f0(x) f1(alpha^n x)] when both observables are characters
// (integer frequency transport on the abelianization); nullopt otherwise.
std::optional<double> exact_character_correlation(const Automorphism& a,
                                                  const Observable& f0,
                                                  const Observable& f1,
                                                  long long n);

// Exact E[prod f_i(alpha^{n_i} x)] for cosine characters via the sign
// expansion of the product; zero-frequency sine factors short-circuit to 0.
// nullopt when any factor is not a character or mixes a nonzero sine.
std::optional<double> exact_character_product_integral(
    const Automorphism& a, const std::vector<Observable>& fs,
    const std::vector<long long>& ns);

// Correlation decay sweep: points carry C_n, its SE and |C_n - mu0 mu1|;
// errors are resolved by doubling the budget until 3*SE <= error. When both
// observables are characters and the exact calculus predicts zero error
// everywhere, the report is flagged ExactMixing instead of fitted.
RateReport mixing_experiment(const OrbitEngine& eng, const Observable& f0,
                             const Observable& f1,
                             const std::vector<long long>& n_schedule,
                             std::uint64_t budget, std::uint64_t seed,
                             int workers = 1, int max_doublings = 6);

// Multi-correlation decay against the minimal gap: exponents are i*gap.
RateReport multimix_experiment(const OrbitEngine& eng,
                               const std::vector<Observable>& fs,
                               const std::vector<long long>& gap_schedule,
                               std::uint64_t budget, std::uint64_t seed,
                               int workers = 1, int max_doublings = 6);

// Truncated Green-Kubo variance sigma2 = C_0 + 2 sum_{j=1}^{window} C_j for
// a centered observable. The window is truncated adaptively: the sum stops
// before the first run of three consecutive terms indistinguishable from
// noise (|C_j| <= SE_j). sigma2 below -3*SE throws (or flags) a negative
// estimate; small negative values clamp to zero with a flag.
struct VarianceEstimate {
  double sigma2 = 0.0;
  double sigma2_raw = 0.0;
  double se = 0.0;
  int window_requested = 0;
  int window_used = 0;
  std::vector<double> correlations;
  std::vector<double> correlation_ses;
  std::vector<std::string> flags;
};

VarianceEstimate green_kubo(const OrbitEngine& eng, const Observable& f,
                            int window, std::uint64_t budget,
                            std::uint64_t seed, std::uint64_t stream,
                            int workers = 1, bool throw_on_negative = true);

struct CltReport {
  std::vector<long long> n_schedule;
  double sigma2_hat = 0.0;
  double sigma2_se = 0.0;
  int window_requested = 0;
  int window_used = 0;
  std::vector<double> correlations;
  std::vector<double> correlation_ses;
  std::vector<double> empirical_variances;  // Var(n^{-1/2} S_n), per entry
  std::vector<double> ks_statistics;        // KS vs Normal(0, sigma2_hat)
  std::uint64_t sample_count = 0;           // paths per schedule entry
  double mean_used = 0.0;                   // centering constant
  bool mean_exact = false;
  std::vector<std::string> flags;
};

// Normalized Birkhoff sums over Haar-started paths, compared against the
// Green-Kubo normal law. f is centered internally with its exact integral
// when known, otherwise with a 10x-budget estimate.
CltReport clt_experiment(const OrbitEngine& eng, const Observable& f,
                         const std::vector<long long>& n_schedule,
                         std::uint64_t path_count, int variance_window,
                         std::uint64_t gk_budget, std::uint64_t seed,
                         int workers = 1);

struct DonskerReport {
  long long n = 0;
  std::uint64_t path_count = 0;
  std::vector<double> grid;  // times in [0,1]
  std::vector<std::vector<double>> paths;  // per path, values on the grid
  std::vector<double> variance_at_grid;
  double variance_slope = 0.0;         // least-squares Var(path(t)) vs t
  double increment_correlation = 0.0;  // corr(path(1/2)-path(1/4), path(1/4))
  double sigma2_hat = 0.0;
  double sigma2_se = 0.0;
  double mean_used = 0.0;
  bool mean_exact = false;
  std::vector<std::string> flags;
};

// Scaled partial-sum paths t -> (n sigma2)^{-1/2} S_{nt} with linear
// interpolation between integer indices. Throws ZeroVariance when the
// Green-Kubo estimate is indistinguishable from zero (the observable is a
// coboundary; solve the cohomological equation instead).
DonskerReport donsker_paths(const OrbitEngine& eng, const Observable& f,
                            long long n, std::uint64_t path_count,
                            int grid_points, int variance_window,
                            std::uint64_t gk_budget, std::uint64_t seed,
                            int workers = 1);

// f = psi o alpha - psi, with exact zero integral by construction.
Observable coboundary_make(const Automorphism& a, const Observable& psi);

enum class CoboundaryScheme { Partial, Cesaro, Abel };

struct CoboundaryReport {
  Observable phi;  // phi_hat(x) = -sum_i w_i f(alpha^i x)
  CoboundaryScheme scheme = CoboundaryScheme::Cesaro;
  int n_used = 0;
  double abel_r = 0.0;
  double residual_sup = 0.0;  // residual = f - (phi_hat o alpha - phi_hat)
  double residual_l2 = 0.0;
  double f_sup = 0.0;  // max |f| seen along the sampled orbits
  std::uint64_t sample_count = 0;
  std::vector<std::string> flags;
};

CoboundaryReport coboundary_solve(const OrbitEngine& eng, const Observable& f,
                                  int n, CoboundaryScheme scheme,
                                  double abel_r, std::uint64_t sample_count,
                                  std::uint64_t seed, int workers = 1);

enum class CoboundaryDecision { Coboundary, NotCoboundary, Inconclusive };

struct CoboundaryTestReport {
  CoboundaryDecision decision = CoboundaryDecision::Inconclusive;
  double sigma2_hat = 0.0;
  double sigma2_se = 0.0;
  int window_used = 0;
  std::vector<int> residual_n_ladder;
  std::vector<double> residual_l2_ladder;
  double f_sup = 0.0;
  std::vector<std::string> flags;
};

// Three-way decision: NotCoboundary when sigma2 exceeds 3x its SE; else
// Coboundary when Cesaro residuals shrink along N in {25,50,100,200} and the
// last is below 5% of sup|f|; else Inconclusive.
CoboundaryTestReport coboundary_test(const OrbitEngine& eng,
                                     const Observable& f, int window,
                                     std::uint64_t budget, std::uint64_t seed,
                                     int workers = 1);

}  // namespace nilmix
