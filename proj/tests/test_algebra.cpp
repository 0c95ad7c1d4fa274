#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "nilmix/algebra.hpp"
#include "nilmix/errors.hpp"
#include "oracles.hpp"

using namespace nilmix;

TEST_CASE("validate accepts the reference algebras") {
  const auto heis = fx::heisenberg();
  CHECK(heis.dim() == 3);
  CHECK(heis.step() == 2);
  CHECK(heis.abelianization_dim() == 2);
  CHECK(heis.c(0, 1, 2) == Rat(1));
  CHECK(heis.c(1, 0, 2) == Rat(-1));

  const auto t2 = fx::torus(2);
  CHECK(t2.step() == 1);
  CHECK(t2.abelianization_dim() == 2);

  const auto fil = fx::filiform4();
  CHECK(fil.step() == 3);
  CHECK(fil.abelianization_dim() == 2);

  // declared step cross-check
  CHECK_NOTHROW(NilpotentAlgebra::validate(3, fx::tensor(3, {{0, 1, 2, 1, 1}}),
                                           2));
  CHECK_THROWS_AS(
      NilpotentAlgebra::validate(3, fx::tensor(3, {{0, 1, 2, 1, 1}}), 3),
      ConfigError);
}

TEST_CASE("lower central series bases") {
  const auto heis = fx::heisenberg();
  const auto& lcs = heis.lower_central_series();
  REQUIRE(lcs.size() == 2);
  CHECK(lcs[0].size() == 3);
  REQUIRE(lcs[1].size() == 1);
  CHECK(lcs[1][0] == RatVec{Rat(0), Rat(0), Rat(1)});

  const auto fil = fx::filiform4();
  const auto& lcs4 = fil.lower_central_series();
  REQUIRE(lcs4.size() == 3);
  CHECK(lcs4[0].size() == 4);
  CHECK(lcs4[1].size() == 2);  // span{e3, e4}
  CHECK(lcs4[2].size() == 1);  // span{e4}
}

TEST_CASE("validate rejects malformed structure tensors") {
  // [e1, e1] = e3
  {
    auto t = fx::tensor(3, {});
    t[(0 * 3 + 0) * 3 + 2] = Rat(1);
    CHECK_THROWS_AS(NilpotentAlgebra::validate(3, t), AntisymmetryViolation);
  }
  // c(0,1,2) and c(1,0,2) restated with the same sign
  {
    auto t = fx::tensor(3, {});
    t[(0 * 3 + 1) * 3 + 2] = Rat(1);
    t[(1 * 3 + 0) * 3 + 2] = Rat(1);
    CHECK_THROWS_AS(NilpotentAlgebra::validate(3, t), AntisymmetryViolation);
  }
  // [e1,e2] = e3, [e3,e1] = -e1 breaks Jacobi on (e1,e2,e3)
  CHECK_THROWS_AS(
      NilpotentAlgebra::validate(
          3, fx::tensor(3, {{0, 1, 2, 1, 1}, {2, 0, 0, -1, 1}})),
      JacobiViolation);
  // so(3) satisfies Jacobi but is not nilpotent
  CHECK_THROWS_AS(
      NilpotentAlgebra::validate(
          3, fx::tensor(3, {{0, 1, 2, 1, 1}, {1, 2, 0, 1, 1}, {2, 0, 1, 1, 1}})),
      NotNilpotent);
  // Heisenberg with the center first: gamma_2 = span{e1} is not a tail
  CHECK_THROWS_AS(
      NilpotentAlgebra::validate(3, fx::tensor(3, {{1, 2, 0, 1, 1}})),
      BasisNotMalcevOrdered);
  // wrong tensor size
  CHECK_THROWS_AS(NilpotentAlgebra::validate(3, std::vector<Rat>(26, Rat(0))),
                  DimensionMismatch);
}

TEST_CASE("bracket is the tensor, bilinearly extended") {
  const auto heis = fx::heisenberg();
  const RatVec e1 = heis.basis_vector(0);
  const RatVec e2 = heis.basis_vector(1);
  CHECK(heis.bracket(e1, e2) == RatVec{Rat(0), Rat(0), Rat(1)});
  CHECK(heis.bracket(e2, e1) == RatVec{Rat(0), Rat(0), Rat(-1)});

  std::mt19937_64 g(11);
  for (int trial = 0; trial < 50; ++trial) {
    const RatVec x = fx::rand_rat_vec(g, 3, 8, 5);
    const RatVec y = fx::rand_rat_vec(g, 3, 8, 5);
    const Rat expect = x[0] * y[1] - x[1] * y[0];
    CHECK(heis.bracket(x, y) == RatVec{Rat(0), Rat(0), expect});
  }
}

TEST_CASE("exact bch agrees with the faithful matrix representation") {
  const auto heis = fx::heisenberg();
  std::mt19937_64 g(17);
  for (int trial = 0; trial < 150; ++trial) {
    const RatVec x = fx::rand_rat_vec(g, 3, 16, 8);
    const RatVec y = fx::rand_rat_vec(g, 3, 16, 8);
    CHECK(heis.bch(x, y) == oracle::bch_heis(x, y));
  }

  const auto fil = fx::filiform4();
  for (int trial = 0; trial < 100; ++trial) {
    const RatVec x = fx::rand_rat_vec(g, 4, 12, 6);
    const RatVec y = fx::rand_rat_vec(g, 4, 12, 6);
    CHECK(fil.bch(x, y) == oracle::bch_filiform4(x, y));
  }

  // abelian: bch degenerates to the sum
  const auto t2 = fx::torus(2);
  const RatVec a{Rat(1, 3), Rat(-7, 2)};
  const RatVec b{Rat(2, 5), Rat(4)};
  CHECK(t2.bch(a, b) == RatVec{Rat(1, 3) + Rat(2, 5), Rat(-7, 2) + Rat(4)});
}

TEST_CASE("bch is associative in exact arithmetic") {
  const auto fil = fx::filiform4();
  std::mt19937_64 g(23);
  for (int trial = 0; trial < 60; ++trial) {
    const RatVec x = fx::rand_rat_vec(g, 4, 9, 4);
    const RatVec y = fx::rand_rat_vec(g, 4, 9, 4);
    const RatVec z = fx::rand_rat_vec(g, 4, 9, 4);
    CHECK(fil.bch(fil.bch(x, y), z) == fil.bch(x, fil.bch(y, z)));
  }
}

TEST_CASE("float bch tracks the exact expansion") {
  const auto heis = fx::heisenberg();
  const auto fil = fx::filiform4();
  std::mt19937_64 g(29);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const VecD x = fx::rand_vec(g, 3, -2.0, 2.0);
    const VecD y = fx::rand_vec(g, 3, -2.0, 2.0);
    RatVec xq(3), yq(3);
    for (int i = 0; i < 3; ++i) {
      xq[i] = rat_from_double(x[i]);
      yq[i] = rat_from_double(y[i]);
    }
    const VecD zf = heis.bch(x, y);
    const RatVec zq = heis.bch(xq, yq);
    for (int i = 0; i < 3; ++i)
      worst = std::max(worst, std::abs(zf[i] - to_double(zq[i])));
  }
  for (int trial = 0; trial < 200; ++trial) {
    const VecD x = fx::rand_vec(g, 4, -2.0, 2.0);
    const VecD y = fx::rand_vec(g, 4, -2.0, 2.0);
    RatVec xq(4), yq(4);
    for (int i = 0; i < 4; ++i) {
      xq[i] = rat_from_double(x[i]);
      yq[i] = rat_from_double(y[i]);
    }
    const VecD zf = fil.bch(x, y);
    const RatVec zq = fil.bch(xq, yq);
    for (int i = 0; i < 4; ++i)
      worst = std::max(worst, std::abs(zf[i] - to_double(zq[i])));
  }
  CHECK(worst <= 1e-12);
}

TEST_CASE("coordinate changes of the first and second kind invert") {
  const auto fil = fx::filiform4();
  std::mt19937_64 g(31);
  for (int trial = 0; trial < 80; ++trial) {
    const RatVec x = fx::rand_rat_vec(g, 4, 10, 6);
    CHECK(fil.first_from_second(fil.second_from_first(x)) == x);
    CHECK(fil.second_from_first(fil.first_from_second(x)) == x);
  }
}

TEST_CASE("second-kind coordinates reproduce the product of exponentials") {
  // exp(x) must equal exp(t_1 R_1)...exp(t_d R_d) in the faithful
  // representation when t = second_from_first(x)
  const auto heis = fx::heisenberg();
  const auto rep3 = oracle::heisenberg_rep();
  std::mt19937_64 g(37);
  for (int trial = 0; trial < 60; ++trial) {
    const RatVec x = fx::rand_rat_vec(g, 3, 12, 7);
    const RatVec t = heis.second_from_first(x);
    CHECK(oracle::rep_exp(oracle::embed(rep3, x)) ==
          oracle::second_kind_word(rep3, t));
  }

  const auto fil = fx::filiform4();
  const auto rep4 = oracle::filiform4_rep();
  for (int trial = 0; trial < 40; ++trial) {
    const RatVec x = fx::rand_rat_vec(g, 4, 10, 5);
    const RatVec t = fil.second_from_first(x);
    CHECK(oracle::rep_exp(oracle::embed(rep4, x)) ==
          oracle::second_kind_word(rep4, t));
  }
}

TEST_CASE("float paths exist for bracket and coordinate changes") {
  const auto heis = fx::heisenberg();
  const VecD x{0.3, -1.2, 0.7};
  const VecD y{1.1, 0.4, -0.2};
  const VecD br = heis.bracket(x, y);
  CHECK(br[2] == doctest::Approx(0.3 * 0.4 - (-1.2) * 1.1).epsilon(1e-14));

  const VecD t = heis.second_from_first(x);
  const VecD back = heis.first_from_second(t);
  for (int i = 0; i < 3; ++i)
    CHECK(back[i] == doctest::Approx(x[i]).epsilon(1e-13));
}
