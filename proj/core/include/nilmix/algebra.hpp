#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "nilmix/errors.hpp"
#include "nilmix/ratlinalg.hpp"
#include "nilmix/rational.hpp"

namespace nilmix {

// Coefficient vectors in the fixed basis (e_1..e_d). Exact and float
// representations are parallel overload sets; exact inputs stay exact.
using VecD = std::vector<double>;

VecD to_vecd(const RatVec& v);

// A finite-dimensional nilpotent Lie algebra presented by rational structure
// constants c[i][j][k] ([e_i, e_j] = sum_k c[i][j][k] e_k) over a basis that
// must run compatibly through the lower central series (Malcev ordering:
// every gamma_m is the span of a tail segment e_{j_m}..e_d). Construction
// validates antisymmetry, Jacobi, nilpotency and the ordering, all exactly.
class NilpotentAlgebra {
 public:
  // tensor: dense row-major d*d*d rationals, entry (i,j,k) at ((i*d)+j)*d+k.
  // declared_step, when present, must match the computed nilpotency step.
  static NilpotentAlgebra validate(int dim, const std::vector<Rat>& tensor,
                                   std::optional<int> declared_step = {});

  int dim() const { return dim_; }
  int step() const { return step_; }
  // l = dim of the abelianization L/[L,L]
  int abelianization_dim() const { return abelian_dim_; }

  const Rat& c(int i, int j, int k) const {
    return tensor_[(static_cast<size_t>(i) * dim_ + j) * dim_ + k];
  }

  // Bases (rref) of gamma_1 .. gamma_step; gamma_{step+1} = 0 is implicit.
  const std::vector<std::vector<RatVec>>& lower_central_series() const {
    return lcs_;
  }

  RatVec bracket(const RatVec& x, const RatVec& y) const;
  VecD bracket(const VecD& x, const VecD& y) const;

  // Truncated Baker-Campbell-Hausdorff product log(exp(x)exp(y)); the Dynkin
  // expansion is precomputed per algebra with exact rational coefficients
  // and truncates at the nilpotency step, so it is a polynomial identity.
  RatVec bch(const RatVec& x, const RatVec& y) const;
  VecD bch(const VecD& x, const VecD& y) const;

  // exp(x) = exp(t_1 e_1) ... exp(t_d e_d): coordinates of the second kind.
  // Solved by peeling: t_i is the e_i coefficient once e_1..e_{i-1} are
  // stripped, which the Malcev ordering guarantees. Inverse accumulates the
  // product left to right.
  RatVec second_from_first(const RatVec& x) const;
  VecD second_from_first(const VecD& x) const;
  RatVec first_from_second(const RatVec& t) const;
  VecD first_from_second(const VecD& t) const;

  RatVec basis_vector(int i) const;

 private:
  NilpotentAlgebra() = default;
  void build_bch_table();

  template <class S>
  std::vector<S> bracket_impl(const std::vector<S>& x,
                              const std::vector<S>& y) const;
  template <class S>
  std::vector<S> bch_impl(const std::vector<S>& x,
                          const std::vector<S>& y) const;

  int dim_ = 0;
  int step_ = 0;
  int abelian_dim_ = 0;
  std::vector<Rat> tensor_;
  std::vector<double> tensor_d_;

  struct SparseEntry {
    int k;
    Rat q;
    double d;
  };
  // nonzero structure constants for each ordered pair (i,j)
  std::vector<std::vector<SparseEntry>> sparse_;

  struct BchTerm {
    std::vector<std::uint8_t> word;  // 0 = first argument, 1 = second
    Rat coef;
    double coef_d;
  };
  std::vector<BchTerm> bch_terms_;  // weight >= 2 only; weight-1 part is x+y

  std::vector<std::vector<RatVec>> lcs_;
};

}  // namespace nilmix
