#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nilmix/manifold.hpp"
#include "nilmix/ratlinalg.hpp"

namespace nilmix {

struct ErgodicityCertificate {
  bool ergodic = false;
  // when non-ergodic: the cyclotomic order k with Phi_k | char poly
  int witness_order = 0;
  std::vector<int> orders_checked;
  RatPoly abelian_char_poly;
};

// A validated lattice automorphism. d_alpha columns are the images of the
// basis vectors. Validation checks, all in exact arithmetic:
//   - |det| = 1,
//   - bracket preservation  D[x,y] = [Dx, Dy],
//   - lattice preservation: second-kind coordinates of alpha(exp e_i) and
//     alpha^{-1}(exp e_i) are integers.
class Automorphism {
 public:
  static Automorphism validate(const Nilmanifold& m, const RatMat& d_alpha);

  const Nilmanifold& manifold() const { return manifold_; }
  const NilpotentAlgebra& algebra() const { return manifold_.algebra(); }
  const RatMat& matrix() const { return d_alpha_; }
  const RatMat& matrix_inverse() const { return d_alpha_inv_; }
  // induced map on the abelianization L/[L,L]; always integer entries
  const RatMat& abelianization_matrix() const { return abelian_; }

  const std::vector<double>& matrix_d() const { return d_alpha_d_; }
  int dim() const { return manifold_.dim(); }

  // Exact root-of-unity test on the abelianization: the automorphism is
  // ergodic iff no cyclotomic polynomial divides the characteristic
  // polynomial (only finitely many candidate orders, phi(k) <= l).
  ErgodicityCertificate is_ergodic() const;

 private:
  Automorphism(Nilmanifold m, RatMat d, RatMat dinv, RatMat ab);

  Nilmanifold manifold_;
  RatMat d_alpha_, d_alpha_inv_, abelian_;
  std::vector<double> d_alpha_d_;  // row-major double mirror
};

// --- real Jordan structure --------------------------------------------------

struct JordanBlock {
  bool complex_pair = false;
  double re = 0.0, im = 0.0;  // eigenvalue; im > 0 iff complex_pair
  double modulus = 0.0;
  int chain_length = 1;  // s: real blocks span s dims, complex 2s
  // real: w_1..w_s with D w_i = re*w_i + w_{i+1}, D w_s = re*w_s;
  // complex: interleaved w_1, w'_1, ..., w_s, w'_s with
  //   D w_i = a w_i + b w'_i + w_{i+1},  D w'_i = -b w_i + a w'_i + w'_{i+1}.
  std::vector<VecD> vectors;
};

struct JordanSplit {
  // all blocks, ordered by (|lambda| asc, rotation angle asc, input order)
  std::vector<JordanBlock> blocks;
  std::vector<int> unstable_blocks, stable_blocks, central_blocks;
  // concatenated chain vectors per class, in block order
  std::vector<VecD> unstable, stable, central;
};

// Hybrid split: exact primary decomposition over Q first, then numerical
// real Jordan chains inside each component. Degenerate numerical geometry
// (conditioning below `tol`) raises IllConditioned.
JordanSplit jordan_split(const Automorphism& a, double tol = 1e-8);

// Smallest rational D-invariant ideal containing W (W given as float vectors
// inside the span of primary components): primary components meeting W,
// saturated under bracketing. Returns an exact rational basis.
std::vector<RatVec> rational_hull(const Automorphism& a,
                                  const std::vector<VecD>& w,
                                  double tol = 1e-10);

// --- Diophantine certification ----------------------------------------------

struct DiophantineReport {
  VecD direction;
  double c2 = 1.0;
  long long zmax = 0;
  double c1_hat = 0.0;  // min over 0 < ||z||_inf <= zmax of |<z,w>| ||z||_2^c2
  std::vector<long long> witness_z;
  double witness_pairing = 0.0;  // |<witness, w>|
  std::vector<std::string> flags;
};

// Brute-force certification of |<z,w>| >= c1 ||z||^{-c2} over the integer
// box. Scales linearly in w (c1_hat(s w) = s c1_hat(w)); pass unit vectors
// to compare against classical constants. A (near-)rational direction comes
// back with c1_hat ~ 0 and a "DiophantineFailure" flag.
DiophantineReport diophantine_constant(const VecD& w, double c2,
                                       long long zmax, int workers = 1);

// Samples unit directions in span(v_basis) and returns the best Diophantine
// report. Errors: ZeroDirection for a trivial span; SubspaceRational if an
// integer vector annihilates the whole span (bounded search, ||z||_inf <= 50
// shrinking with dimension; V arrives in floats so the check is a certified
// search, not an exact hull).
DiophantineReport generic_direction(const std::vector<VecD>& v_basis,
                                    int trials, double c2, long long zmax,
                                    std::uint64_t seed, int workers = 1);

}  // namespace nilmix
