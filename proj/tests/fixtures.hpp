#pragma once

// Shared test fixtures: the three reference algebras, their standard
// automorphisms, and small rational/double sampling helpers.

#include <random>
#include <vector>

#include "nilmix/algebra.hpp"
#include "nilmix/manifold.hpp"
#include "nilmix/spectral.hpp"

namespace fx {

using nilmix::NilpotentAlgebra;
using nilmix::Rat;
using nilmix::RatMat;
using nilmix::RatVec;
using nilmix::VecD;

struct Br {
  int i, j, k;  // 0-based, [e_i, e_j] = (num/den) e_k
  long long num, den;
};

inline std::vector<Rat> tensor(int d, const std::vector<Br>& brackets) {
  std::vector<Rat> c(static_cast<size_t>(d) * d * d, Rat(0));
  auto at = [&](int i, int j, int k) -> Rat& {
    return c[(static_cast<size_t>(i) * d + j) * d + k];
  };
  for (const auto& b : brackets) {
    at(b.i, b.j, b.k) = Rat(b.num, b.den);
    at(b.j, b.i, b.k) = -Rat(b.num, b.den);
  }
  return c;
}

inline NilpotentAlgebra torus(int d) {
  return NilpotentAlgebra::validate(d, tensor(d, {}));
}

// [e1, e2] = e3
inline NilpotentAlgebra heisenberg() {
  return NilpotentAlgebra::validate(3, tensor(3, {{0, 1, 2, 1, 1}}));
}

// [e1, e2] = e3, [e1, e3] = e4
inline NilpotentAlgebra filiform4() {
  return NilpotentAlgebra::validate(
      4, tensor(4, {{0, 1, 2, 1, 1}, {0, 2, 3, 1, 1}}));
}

inline RatMat mat2(long long a, long long b, long long c, long long d) {
  RatMat m(2, 2);
  m.at(0, 0) = a;
  m.at(0, 1) = b;
  m.at(1, 0) = c;
  m.at(1, 1) = d;
  return m;
}

// columns are images of basis vectors
inline RatMat cols(int d, const std::vector<RatVec>& images) {
  RatMat m(d, d);
  for (int j = 0; j < d; ++j)
    for (int i = 0; i < d; ++i) m.at(i, j) = images[static_cast<size_t>(j)][i];
  return m;
}

inline RatMat cat_matrix() { return mat2(2, 1, 1, 1); }

// Hyperbolic on the abelianization (the cat map), sheared in the center
// direction so second-kind lattice coordinates stay integral.
inline RatMat sheared_heis_matrix() {
  return cols(3, {{Rat(2), Rat(1), Rat(0)},
                  {Rat(1), Rat(1), Rat(1, 2)},
                  {Rat(0), Rat(0), Rat(1)}});
}

inline double rand_unif(std::mt19937_64& g, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(g);
}

// rational with numerator in [-num_bound, num_bound], denominator in
// [1, den_bound]
inline Rat rand_rat(std::mt19937_64& g, long long num_bound,
                    long long den_bound) {
  std::uniform_int_distribution<long long> num(-num_bound, num_bound);
  std::uniform_int_distribution<long long> den(1, den_bound);
  return Rat(num(g), den(g));
}

inline RatVec rand_rat_vec(std::mt19937_64& g, int d, long long num_bound,
                           long long den_bound) {
  RatVec v(d);
  for (auto& x : v) x = rand_rat(g, num_bound, den_bound);
  return v;
}

inline VecD rand_vec(std::mt19937_64& g, int d, double lo, double hi) {
  VecD v(d);
  for (auto& x : v) x = rand_unif(g, lo, hi);
  return v;
}

}  // namespace fx
