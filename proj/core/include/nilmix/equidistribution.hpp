#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nilmix/manifold.hpp"
#include "nilmix/observables.hpp"
#include "nilmix/parallel.hpp"
#include "nilmix/report.hpp"
#include "nilmix/spectral.hpp"

namespace nilmix {

// Affine box map iota(t) = v + t_1 w_1 + ... + t_k w_k into the algebra,
// t ranging over the product box [0,T_1] x ... x [0,T_k].
struct BoxMap {
  VecD v;
  std::vector<VecD> dirs;
  VecD sides;

  // checks k >= 1, positive sides, matching dimensions and direction
  // independence (rank at 1e-10)
  static BoxMap validate(VecD v, std::vector<VecD> dirs, VecD sides);

  int k() const { return static_cast<int>(dirs.size()); }
  int dim() const { return static_cast<int>(v.size()); }
  double volume() const;
  double min_side() const;
  VecD point(const VecD& t) const;  // v + sum t_i dirs[i]
};

// Monte-Carlo estimate of the pushforward average
// 1/|B| int_B f(exp(u) exp(iota(t)) g) dt.
McResult box_average(const Observable& f, const BoxMap& box, const VecD& u,
                     const Point& g, std::uint64_t budget, std::uint64_t seed,
                     std::uint64_t stream, int workers = 1);

// Exhaustive obstruction search of the dichotomy: a nonzero integer z with
// ||z||_inf <= multiplier * delta^{-L1} and, for every direction,
// |<z, pi_ab(w_i)>| <= multiplier * delta^{-L2} / T_i. Candidates are scanned
// by increasing sup-norm shell, lexicographic within a shell, one canonical
// sign per +-z pair; the first hit is returned.
struct DichotomyResult {
  bool equidistributed = true;
  std::vector<long long> z;          // obstruction witness when found
  long long z_bound = 0;             // search radius actually used
  std::vector<double> pairing_bounds;  // per-direction thresholds
  std::uint64_t candidates = 0;
};
DichotomyResult dichotomy_probe(const BoxMap& box, int abelian_dim,
                                double delta, double l1, double l2,
                                double multiplier = 1.0);

// Error-vs-T decay experiment for a growing box along fixed directions.
// The error at side length T is the RMS of |box_average - mu| over a panel
// of starting points (g plus panel_size-1 Haar draws): a single start's line
// integral of an oscillating observable passes through zero, which no log
// fit survives; the paper's bound is uniform over starts, and the RMS is a
// lower bound for the sup. Budgets double per point until 3*SE <= error or
// the ladder cap; leftovers are flagged "noise". Points with exactly zero
// error are flagged "exact" and the fit is skipped if nothing else remains.
RateReport box_rate_experiment(const Observable& f, const VecD& v,
                               const std::vector<VecD>& dirs, const VecD& u,
                               const Point& g,
                               const std::vector<double>& t_schedule,
                               std::uint64_t base_budget, std::uint64_t seed,
                               int workers = 1, int panel_size = 16,
                               int max_doublings = 6);

// Product-of-exponentials chart of the unstable leaf: basis vectors are the
// unstable chain vectors of a JordanSplit in block order, the box B is the
// product of [0, sides_i].
struct UnstableChart {
  std::vector<VecD> basis;
  VecD sides;

  static UnstableChart build(const JordanSplit& split, VecD sides);
  int s() const { return static_cast<int>(basis.size()); }
};

// first-kind coordinates of psi(b) = exp(b_1 w_1) ... exp(b_s w_s)
VecD psi_log(const Nilmanifold& m, const UnstableChart& chart, const VecD& b);

// sqrt(det J^T J) of the smooth map b -> log psi(b) (first-kind coords), by
// central finite differences. Constancy in b is the operational form of
// "psi pushes box Lebesgue to the leaf's Haar"; tests compare against b = 0.
double psi_volume_element(const Nilmanifold& m, const UnstableChart& chart,
                          const VecD& b, double h = 1e-5);

// Monte-Carlo estimate of 1/|B| int_B f(alpha^n(h psi(b)) g) db.
McResult unstable_average(const Observable& f, const Automorphism& a,
                          const UnstableChart& chart, const Point& h,
                          const Point& g, int n, std::uint64_t budget,
                          std::uint64_t seed, std::uint64_t stream,
                          int workers = 1);

// Error-vs-n decay at a fixed box; same mu/ladder/flag conventions as
// box_rate_experiment, single start (the n-dependence does not oscillate).
RateReport unstable_rate_experiment(const Observable& f, const Automorphism& a,
                                    const UnstableChart& chart, const Point& h,
                                    const Point& g,
                                    const std::vector<int>& n_schedule,
                                    std::uint64_t base_budget,
                                    std::uint64_t seed, int workers = 1,
                                    int max_doublings = 6);

}  // namespace nilmix
