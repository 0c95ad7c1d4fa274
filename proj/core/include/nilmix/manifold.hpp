#pragma once

#include <cstdint>
#include <vector>

#include "nilmix/algebra.hpp"
#include "nilmix/rng.hpp"

namespace nilmix {

// Canonical point of the compact quotient: second-kind coordinates of the
// fundamental-domain representative, all in [0,1).
struct Point {
  VecD t;
};
struct PointQ {
  RatVec t;
};

// Compact nilmanifold presented by a nilpotent algebra whose basis spans the
// lattice: Lambda = exp(Z e_1) ... exp(Z e_d), fundamental domain
// F = exp([0,1) e_1) ... exp([0,1) e_d). Haar measure is the image of
// Lebesgue measure on F's coordinate box.
class Nilmanifold {
 public:
  explicit Nilmanifold(NilpotentAlgebra g, double metric_scale = 1.0);

  const NilpotentAlgebra& algebra() const { return alg_; }
  int dim() const { return alg_.dim(); }
  double metric_scale() const { return metric_scale_; }

  struct ReducedD {
    Point point;
    std::vector<long long> word;  // canonical = g * exp(w_1 e_1)...exp(w_d e_d)
  };
  struct ReducedQ {
    PointQ point;
    std::vector<BigInt> word;
  };

  // Left-to-right floor sweep over second-kind coordinates. Each step
  // right-multiplies by exp(-floor(t_i) e_i); earlier coordinates are stable
  // because the tail basis segments span subalgebras (Malcev ordering).
  ReducedD reduce(const VecD& second_kind) const;
  ReducedQ reduce(const RatVec& second_kind) const;

  // Same sweep starting from first-kind (log) coordinates.
  ReducedD reduce_first_kind(const VecD& x) const;
  ReducedQ reduce_first_kind(const RatVec& x) const;

  // i.i.d. uniform [0,1)^d second-kind coordinates = Haar on the quotient.
  Point haar_sample(RngStream& rng) const;

  // x -> h x for h given by first-kind coordinates.
  Point translate(const VecD& h_first_kind, const Point& x) const;
  PointQ translate(const RatVec& h_first_kind, const PointQ& x) const;

  // First-kind coordinates of the canonical representative.
  VecD lift(const Point& x) const { return alg_.first_from_second(x.t); }
  RatVec lift(const PointQ& x) const { return alg_.first_from_second(x.t); }

  // Symmetrized local metric: min over lattice words w in {-1,0,1}^d of the
  // first-kind log-norm of lift(y) * lambda_w * lift(x)^{-1}, scaled by
  // metric_scale. Exact for nearby points; a documented lower-cost proxy for
  // far-apart ones (the word set is truncated).
  double local_distance(const Point& x, const Point& y) const;

  // min over nonzero words in {-1,0,1}^d of the displacement norm; half of
  // this is the injectivity guard used by bump observables.
  double min_lattice_displacement() const { return min_word_norm_; }

  // log of exp(n_1 e_1)...exp(n_d e_d)
  VecD word_log(const std::vector<long long>& n) const;

  const std::vector<VecD>& cached_word_logs() const { return word_logs_; }

 private:
  double one_sided_distance(const VecD& lx, const VecD& ly) const;

  NilpotentAlgebra alg_;
  double metric_scale_ = 1.0;
  std::vector<VecD> word_logs_;  // all words in {-1,0,1}^d
  double min_word_norm_ = 0.0;
};

double norm2(const VecD& v);
VecD neg(VecD v);

}  // namespace nilmix
