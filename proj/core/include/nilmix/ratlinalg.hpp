#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "nilmix/errors.hpp"
#include "nilmix/rational.hpp"

namespace nilmix {

using RatVec = std::vector<Rat>;

struct RatMat {
  int rows = 0, cols = 0;
  std::vector<Rat> a;  // row-major

  RatMat() = default;
  RatMat(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c) {}

  Rat& at(int i, int j) { return a[static_cast<size_t>(i) * cols + j]; }
  const Rat& at(int i, int j) const { return a[static_cast<size_t>(i) * cols + j]; }

  static RatMat identity(int n);
  RatMat operator*(const RatMat& o) const;
  RatMat operator+(const RatMat& o) const;
  RatMat operator-(const RatMat& o) const;
  RatVec apply(const RatVec& v) const;
  RatMat transpose() const;
  bool operator==(const RatMat& o) const = default;
};

RatMat rat_scale(const RatMat& m, const Rat& s);
Rat rat_det(const RatMat& m);
RatMat rat_inverse(const RatMat& m);       // throws Error if singular
RatMat rat_pow(const RatMat& m, long long n);  // negative n inverts first

// Reduced row echelon form in place; returns pivot column indices.
std::vector<int> rat_rref(std::vector<RatVec>& rows);
int rat_rank(std::vector<RatVec> rows);

// Basis of the right kernel {v : M v = 0}.
std::vector<RatVec> rat_kernel(const RatMat& m);

// Reduced (rref) basis of the span of the given vectors.
std::vector<RatVec> span_basis(std::vector<RatVec> vectors);
// Membership test against a basis already in rref form.
bool span_contains(const std::vector<RatVec>& rref_basis, const RatVec& v);

// --- polynomials over Q, ascending coefficients, no trailing zeros ---------

using RatPoly = std::vector<Rat>;

int poly_deg(const RatPoly& p);  // -1 for zero polynomial
RatPoly poly_trim(RatPoly p);
RatPoly poly_add(const RatPoly& a, const RatPoly& b);
RatPoly poly_sub(const RatPoly& a, const RatPoly& b);
RatPoly poly_mul(const RatPoly& a, const RatPoly& b);
std::pair<RatPoly, RatPoly> poly_divmod(const RatPoly& a, const RatPoly& b);
bool poly_divides(const RatPoly& divisor, const RatPoly& dividend);
RatPoly poly_gcd(RatPoly a, RatPoly b);  // monic
RatPoly poly_derivative(const RatPoly& p);
RatPoly poly_monic(RatPoly p);
Rat poly_eval(const RatPoly& p, const Rat& x);
RatMat poly_at_matrix(const RatPoly& p, const RatMat& m);

// Monic characteristic polynomial (Faddeev-LeVerrier, exact).
RatPoly char_poly(const RatMat& m);

// k-th cyclotomic polynomial (integer coefficients), cached.
const RatPoly& cyclotomic(int k);

// Factorization over Q (monic factors). Rational-root peeling plus a
// Kronecker interpolation search; small degrees always succeed. If the
// search budget is exhausted the remaining factor is returned with
// certified_irreducible = false.
struct PolyFactor {
  RatPoly factor;  // monic
  int multiplicity = 1;
  bool certified_irreducible = true;
};
std::vector<PolyFactor> factor_poly(const RatPoly& p,
                                    std::uint64_t budget = 2000000);

// Exact primary (generalized eigenspace over Q) decomposition of a square
// matrix: one component per irreducible factor of the characteristic
// polynomial, basis of ker q(M)^mult each. Dimensions always sum to n.
struct PrimaryComponent {
  RatPoly factor;
  int multiplicity = 1;
  bool certified_irreducible = true;
  std::vector<RatVec> basis;
};
std::vector<PrimaryComponent> primary_decomposition(const RatMat& m);

}  // namespace nilmix
