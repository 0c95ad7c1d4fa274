#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>
#include <random>

#include "fixtures.hpp"
#include "nilmix/errors.hpp"
#include "nilmix/manifold.hpp"
#include "nilmix/rng.hpp"
#include "oracles.hpp"

using namespace nilmix;

namespace {

bool in_unit_box_exact(const RatVec& t) {
  for (const Rat& c : t)
    if (c < 0 || c >= 1) return false;
  return true;
}

bool in_unit_box(const VecD& t) {
  for (double c : t)
    if (c < 0.0 || c >= 1.0) return false;
  return true;
}

}  // namespace

TEST_CASE("reduce lands in the fundamental box and is idempotent") {
  const Nilmanifold m(fx::heisenberg());
  std::mt19937_64 g(41);
  for (int trial = 0; trial < 2000; ++trial) {
    const VecD t = fx::rand_vec(g, 3, -5.0, 5.0);
    const auto red = m.reduce(t);
    CHECK(in_unit_box(red.point.t));
    // float path: idempotent up to the first/second-kind roundtrip rounding
    const auto again = m.reduce(red.point.t);
    for (int i = 0; i < 3; ++i)
      CHECK(std::abs(again.point.t[i] - red.point.t[i]) <= 1e-12);
    CHECK(again.word == std::vector<long long>{0, 0, 0});
  }
}

TEST_CASE("exact reduce is idempotent and lattice-invariant") {
  const Nilmanifold m(fx::heisenberg());
  const auto& alg = m.algebra();
  std::mt19937_64 g(43);
  std::uniform_int_distribution<long long> word(-3, 3);
  for (int trial = 0; trial < 400; ++trial) {
    const RatVec t = fx::rand_rat_vec(g, 3, 9, 4);
    const auto red = m.reduce(t);
    CHECK(in_unit_box_exact(red.point.t));
    CHECK(m.reduce(red.point.t).point.t == red.point.t);

    // right-multiplying by a lattice word must not move the class
    const RatVec gamma{Rat(word(g)), Rat(word(g)), Rat(word(g))};
    const RatVec shifted = alg.bch(alg.first_from_second(t),
                                   alg.first_from_second(gamma));
    CHECK(m.reduce_first_kind(shifted).point.t == red.point.t);
  }
}

TEST_CASE("reduce agrees with brute-force lattice enumeration") {
  const Nilmanifold m(fx::heisenberg());
  std::mt19937_64 g(47);
  std::uniform_int_distribution<long long> den_draw(1, 6);
  const auto unit_rat = [&]() {  // value in [-1, 1], exact
    const long long den = den_draw(g);
    std::uniform_int_distribution<long long> num_draw(-den, den);
    return Rat(num_draw(g), den);
  };
  for (int trial = 0; trial < 25; ++trial) {
    const RatVec t{unit_rat(), unit_rat(), unit_rat()};
    const auto red = m.reduce(t);
    const auto ref = oracle::heis_reduce_oracle(t, 4);
    CHECK(ref.hits == 1);  // fundamental domain: exactly one representative
    CHECK(red.point.t == ref.coords);
    for (int i = 0; i < 3; ++i) CHECK(red.word[i] == ref.word[i]);
  }
}

TEST_CASE("first-kind and second-kind entry points agree") {
  const Nilmanifold m(fx::filiform4());
  const auto& alg = m.algebra();
  std::mt19937_64 g(53);
  for (int trial = 0; trial < 100; ++trial) {
    const RatVec t = fx::rand_rat_vec(g, 4, 7, 4);
    CHECK(m.reduce_first_kind(alg.first_from_second(t)).point.t ==
          m.reduce(t).point.t);
  }
}

TEST_CASE("lift inverts reduce on the fundamental domain") {
  const Nilmanifold m(fx::heisenberg());
  const auto& alg = m.algebra();
  std::mt19937_64 g(59);
  for (int trial = 0; trial < 100; ++trial) {
    RatVec t = fx::rand_rat_vec(g, 3, 5, 6);
    const auto red = m.reduce(t);
    const RatVec x = m.lift(red.point);
    CHECK(alg.second_from_first(x) == red.point.t);
  }
}

TEST_CASE("haar sampling is invariant under left translation") {
  const Nilmanifold m(fx::heisenberg());
  constexpr int kSamples = 20000;
  const double pi2 = 2.0 * std::numbers::pi;

  // characters of the abelianization evaluated on reduced coordinates
  const auto f1 = [&](const Point& p) { return std::cos(pi2 * p.t[0]); };
  const auto f2 = [&](const Point& p) {
    return std::sin(pi2 * (p.t[0] + 2.0 * p.t[1]));
  };
  const VecD shifts[] = {{0.3, -0.2, 0.11}, {0.0, 0.0, 0.37}};

  for (const VecD& u : shifts) {
    for (int which = 0; which < 2; ++which) {
      RngStream rng(7, 100 + which);
      double s_plain = 0, s2_plain = 0, s_shift = 0, s2_shift = 0;
      for (int i = 0; i < kSamples; ++i) {
        const Point x = m.haar_sample(rng);
        const Point hx = m.translate(u, x);
        const double a = which == 0 ? f1(x) : f2(x);
        const double b = which == 0 ? f1(hx) : f2(hx);
        s_plain += a;
        s2_plain += a * a;
        s_shift += b;
        s2_shift += b * b;
      }
      const double mean_p = s_plain / kSamples;
      const double mean_s = s_shift / kSamples;
      const double var_p = s2_plain / kSamples - mean_p * mean_p;
      const double var_s = s2_shift / kSamples - mean_s * mean_s;
      const double se =
          std::sqrt((var_p + var_s) / kSamples) + 1e-12;
      CHECK(std::abs(mean_p - mean_s) <= 3.5 * se);
    }
  }
}

TEST_CASE("translation reduces to coordinate shift on the torus") {
  const Nilmanifold m(fx::torus(2));
  const Point x{{0.75, 0.5}};
  const Point y = m.translate({0.5, 0.75}, x);
  CHECK(y.t[0] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(y.t[1] == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("word_log composes lattice generators through bch") {
  const Nilmanifold m(fx::heisenberg());
  const VecD l100 = m.word_log({1, 0, 0});
  CHECK(l100[0] == doctest::Approx(1.0));
  CHECK(l100[1] == doctest::Approx(0.0));
  CHECK(l100[2] == doctest::Approx(0.0));

  // log(exp(e1) exp(e2)) = e1 + e2 + (1/2) e3
  const VecD l110 = m.word_log({1, 1, 0});
  CHECK(l110[0] == doctest::Approx(1.0));
  CHECK(l110[1] == doctest::Approx(1.0));
  CHECK(l110[2] == doctest::Approx(0.5));
}

TEST_CASE("local distance is a scaled symmetric wrap-aware metric") {
  const Nilmanifold m1(fx::heisenberg(), 1.0);
  const Nilmanifold m2(fx::heisenberg(), 2.0);

  const Point a{{0.2, 0.4, 0.6}};
  const Point b{{0.25, 0.38, 0.61}};
  CHECK(m1.local_distance(a, a) == doctest::Approx(0.0).epsilon(1e-12));
  const double d1 = m1.local_distance(a, b);
  CHECK(d1 > 0.0);
  CHECK(m1.local_distance(b, a) == doctest::Approx(d1).epsilon(1e-9));
  CHECK(m2.local_distance(a, b) == doctest::Approx(2.0 * d1).epsilon(1e-9));

  // neighbors across the central face t3 = 0 are close, not ~1 apart
  const Point cnear0{{0.5, 0.5, 0.02}};
  const Point cnear1{{0.5, 0.5, 0.98}};
  CHECK(m1.local_distance(cnear0, cnear1) < 0.1);

  // across the t1 face the identification twists the center fiber by t2:
  // at t2 = 0 the wrap is clean, at t2 = 1/2 the points stay ~1/2 apart
  const Point near0{{0.02, 0.0, 0.5}};
  const Point near1{{0.98, 0.0, 0.5}};
  CHECK(m1.local_distance(near0, near1) < 0.1);
  const Point twist0{{0.02, 0.5, 0.5}};
  const Point twist1{{0.98, 0.5, 0.5}};
  CHECK(m1.local_distance(twist0, twist1) > 0.25);

  CHECK(m1.min_lattice_displacement() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(m2.min_lattice_displacement() == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("haar samples fill the box uniformly per coordinate") {
  const Nilmanifold m(fx::filiform4());
  RngStream rng(13, 5);
  constexpr int kSamples = 20000;
  VecD mean(4, 0.0);
  for (int i = 0; i < kSamples; ++i) {
    const Point x = m.haar_sample(rng);
    for (int j = 0; j < 4; ++j) {
      CHECK(x.t[j] >= 0.0);
      CHECK(x.t[j] < 1.0);
      mean[j] += x.t[j];
    }
  }
  // SE of the mean of U[0,1) at 2e4 samples is ~0.002
  for (int j = 0; j < 4; ++j)
    CHECK(std::abs(mean[j] / kSamples - 0.5) < 0.008);
}

TEST_CASE("manifold construction rejects a bad metric scale") {
  CHECK_THROWS_AS(Nilmanifold(fx::torus(2), 0.0), Error);
  CHECK_THROWS_AS(Nilmanifold(fx::torus(2), -1.0), Error);
}
