#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "nilmix/errors.hpp"
#include "nilmix/stochastics.hpp"
#include "oracles.hpp"

using namespace nilmix;

namespace {

Automorphism make_cat() {
  return Automorphism::validate(Nilmanifold(fx::torus(2)), fx::cat_matrix());
}

Automorphism make_heis() {
  return Automorphism::validate(Nilmanifold(fx::heisenberg()),
                                fx::sheared_heis_matrix());
}

const oracle::IMat2 kCat{2, 1, 1, 1};

}  // namespace

TEST_CASE("orbit engine powers form an exact semigroup") {
  const OrbitEngine eng(make_cat(), 1 << 10);
  CHECK(eng.power(0) == RatMat::identity(2));
  CHECK(eng.power(1) == fx::cat_matrix());
  CHECK(eng.power(8) == rat_pow(fx::cat_matrix(), 8));
  CHECK(eng.power(5) * eng.power(3) == eng.power(8));
  CHECK(eng.power(-3) == rat_pow(fx::cat_matrix(), -3));
  CHECK(eng.power(-3) * eng.power(3) == RatMat::identity(2));
  CHECK(eng.power(1000) == rat_pow(fx::cat_matrix(), 1000));
  CHECK_THROWS_AS(eng.power(1025), HorizonExceeded);
}

TEST_CASE("exact application is reversible at any admissible power") {
  const OrbitEngine eng(make_heis(), 1 << 8);
  std::mt19937_64 g(71);
  for (int trial = 0; trial < 30; ++trial) {
    const RatVec t = fx::rand_rat_vec(g, 3, 6, 5);
    const PointQ x = eng.manifold().reduce(t).point;
    for (long long n : {1LL, 7LL, 64LL, 200LL}) {
      const PointQ y = eng.apply_exact(n, x);
      for (const Rat& c : y.t) {
        CHECK(c >= 0);
        CHECK(c < 1);
      }
      CHECK(eng.apply_exact(-n, y).t == x.t);
    }
  }
}

TEST_CASE("float stepping tracks the exact orbit") {
  const OrbitEngine eng(make_heis(), 1 << 8);
  std::mt19937_64 g(73);
  std::uniform_int_distribution<long long> num(-40, 40);
  for (int trial = 0; trial < 25; ++trial) {
    // dyadic coordinates: the double image is the same rational, so the
    // exact pipeline inside apply() sees the identical starting point and
    // hyperbolic amplification has no rounding gap to blow up
    const RatVec tq{Rat(num(g), 8), Rat(num(g), 8), Rat(num(g), 8)};
    const PointQ xq = eng.manifold().reduce(tq).point;
    Point xf;
    for (const Rat& c : xq.t) xf.t.push_back(to_double(c));

    // single exact hop equals a float step up to roundoff
    const Point stepped = eng.step(xf);
    const PointQ hopq = eng.apply_exact(1, xq);
    for (int i = 0; i < 3; ++i)
      CHECK(stepped.t[i] == doctest::Approx(to_double(hopq.t[i]))
                                .epsilon(1e-9));

    // apply() rationalizes its input and runs the exact powers
    const Point far = eng.apply(40, xf);
    const PointQ farq = eng.apply_exact(40, xq);
    for (int i = 0; i < 3; ++i)
      CHECK(far.t[i] == doctest::Approx(to_double(farq.t[i])).epsilon(1e-12));
  }
}

TEST_CASE("step and step_back invert each other") {
  const OrbitEngine eng(make_heis());
  std::mt19937_64 g(79);
  for (int trial = 0; trial < 50; ++trial) {
    const Point x = eng.manifold().reduce(fx::rand_vec(g, 3, 0.0, 1.0)).point;
    const Point y = eng.step_back(eng.step(x));
    for (int i = 0; i < 3; ++i)
      CHECK(y.t[i] == doctest::Approx(x.t[i]).epsilon(1e-10));
  }
}

TEST_CASE("exact character correlations follow the transported frequency") {
  const auto cat = make_cat();
  const Nilmanifold& m = cat.manifold();

  const auto cos10 = Observable::character(m, {1, 0}, Phase::Cos);
  const auto sin10 = Observable::character(m, {1, 0}, Phase::Sin);
  const auto sin53 = Observable::character(m, {5, 3}, Phase::Sin);
  const auto cos53 = Observable::character(m, {5, 3}, Phase::Cos);

  for (long long n = 0; n <= 12; ++n) {
    const auto got = exact_character_correlation(cat, cos10, cos10, n);
    REQUIRE(got.has_value());
    CHECK(*got == oracle::pair_correlation(oracle::Ph::Cos, {1, 0},
                                           oracle::Ph::Cos, {1, 0}, kCat, n));
  }

  // (A^T)^2 (1,0) = (5,3): the correlation concentrates at n = 2
  const auto hit = exact_character_correlation(cat, sin53, sin10, 2);
  REQUIRE(hit.has_value());
  CHECK(*hit == 0.5);
  CHECK(*exact_character_correlation(cat, cos53, cos10, 2) == 0.5);
  CHECK(*exact_character_correlation(cat, sin53, sin10, 3) == 0.0);
  CHECK(*exact_character_correlation(cat, sin53, cos10, 2) == 0.0);

  // non-characters opt out of the calculus
  const auto bump = Observable::bump(m, Point{{0.5, 0.5}}, 0.3, 2);
  CHECK_FALSE(exact_character_correlation(cat, bump, cos10, 1).has_value());
}

TEST_CASE("Monte-Carlo correlation approaches the exact value") {
  const auto cat = make_cat();
  const OrbitEngine eng(cat, 1 << 8);
  const Nilmanifold& m = cat.manifold();
  const auto sin10 = Observable::character(m, {1, 0}, Phase::Sin);
  const auto sin53 = Observable::character(m, {5, 3}, Phase::Sin);

  const auto mc = correlation(eng, sin53, sin10, 2, 60000, 5, 2);
  CHECK(std::abs(mc.mean - 0.5) <= 3.5 * mc.se);
  CHECK(mc.se < 0.01);

  const auto zero = correlation(eng, sin53, sin10, 3, 60000, 5, 3);
  CHECK(std::abs(zero.mean) <= 3.5 * zero.se);
}

TEST_CASE("multi correlations: sign expansion oracle and pair consistency") {
  const auto cat = make_cat();
  const OrbitEngine eng(cat, 1 << 8);
  const Nilmanifold& m = cat.manifold();

  const auto c10 = Observable::character(m, {1, 0}, Phase::Cos);
  const auto c01 = Observable::character(m, {0, 1}, Phase::Cos);
  const auto c11 = Observable::character(m, {1, 1}, Phase::Cos);
  const std::vector<Observable> fs{c10, c01, c11};
  const std::vector<oracle::Freq2> ms{{1, 0}, {0, 1}, {1, 1}};

  // coincidence at zero gaps: cos a cos b cos(a+b) integrates to 1/4
  const std::vector<long long> zeros{0, 0, 0};
  const auto exact0 = exact_character_product_integral(cat, fs, zeros);
  REQUIRE(exact0.has_value());
  CHECK(*exact0 == 0.25);
  CHECK(*exact0 == oracle::multi_cos_correlation(ms, zeros, kCat));

  for (const auto& ns : {std::vector<long long>{0, 1, 2},
                         std::vector<long long>{0, 2, 4},
                         std::vector<long long>{1, 3, 9}}) {
    const auto expect = oracle::multi_cos_correlation(ms, ns, kCat);
    const auto got = exact_character_product_integral(cat, fs, ns);
    REQUIRE(got.has_value());
    CHECK(*got == doctest::Approx(expect).epsilon(1e-14));
  }

  // Monte-Carlo agrees at the engineered coincidence
  const auto mc = multi_correlation(eng, fs, zeros, 60000, 9, 4);
  CHECK(std::abs(mc.mean - 0.25) <= 3.5 * mc.se);

  // a zero-frequency sine factor kills the product exactly
  const auto s00 = Observable::character(m, {0, 0}, Phase::Sin);
  const auto zeroed =
      exact_character_product_integral(cat, {s00, c10}, {0, 1});
  REQUIRE(zeroed.has_value());
  CHECK(*zeroed == 0.0);

  // two factors with a shared stream reproduce correlation()
  const auto pair_mc = multi_correlation(eng, {c10, c11}, {0, 3}, 20000, 11, 6);
  const auto corr_mc = correlation(eng, c10, c11, 3, 20000, 11, 6);
  CHECK(pair_mc.mean == corr_mc.mean);
  CHECK(pair_mc.se == corr_mc.se);
}

TEST_CASE("mixing_experiment flags exact character runs") {
  const auto cat = make_cat();
  const OrbitEngine eng(cat, 1 << 8);
  const Nilmanifold& m = cat.manifold();
  const auto c10 = Observable::character(m, {1, 0}, Phase::Cos);

  const auto rep = mixing_experiment(eng, c10, c10, {1, 2, 3, 4}, 20000, 3);
  CHECK(rep.points.size() == 4);
  bool exact_flag = false;
  for (const auto& f : rep.flags)
    if (f.find("Exact") != std::string::npos) exact_flag = true;
  CHECK(exact_flag);
  // every point estimate is statistically zero
  for (const auto& p : rep.points)
    CHECK(std::abs(p.mean) <= 3.5 * p.se + 1e-12);
}

TEST_CASE("green_kubo recovers the cat character variance") {
  const auto cat = make_cat();
  const OrbitEngine eng(cat, 1 << 8);
  const auto c10 = Observable::character(cat.manifold(), {1, 0}, Phase::Cos);

  // C_0 = 1/2 and the transported frequency never returns: sigma^2 = 1/2
  const auto est = green_kubo(eng, c10, 16, 60000, 7, 1);
  CHECK(std::abs(est.sigma2 - 0.5) <= 3.5 * est.se + 1e-3);
  CHECK(est.window_requested == 16);
  CHECK(est.window_used <= 16);
  CHECK(est.correlations.size() == 17);  // C_0 .. C_16
}

TEST_CASE("green_kubo clamps coboundary variances at zero") {
  const auto cat = make_cat();
  const OrbitEngine eng(cat, 1 << 8);
  const auto psi = Observable::character(cat.manifold(), {1, 0}, Phase::Cos);
  const auto f = coboundary_make(cat, psi);

  const auto est = green_kubo(eng, f, 24, 60000, 11, 2, 1, false);
  CHECK(est.sigma2 >= 0.0);
  CHECK(est.sigma2 <= 0.03);
}

TEST_CASE("coboundary_make telescopes pointwise") {
  const auto cat = make_cat();
  const OrbitEngine eng(cat, 1 << 8);
  const auto psi = Observable::character(cat.manifold(), {1, 0}, Phase::Cos);
  const auto f = coboundary_make(cat, psi);

  REQUIRE(f.exact_integral().has_value());
  CHECK(*f.exact_integral() == 0.0);

  std::mt19937_64 g(83);
  for (int trial = 0; trial < 40; ++trial) {
    const Point x =
        cat.manifold().reduce(fx::rand_vec(g, 2, 0.0, 1.0)).point;
    const double expect = psi.eval(eng.step(x)) - psi.eval(x);
    CHECK(f.eval(x) == doctest::Approx(expect).epsilon(1e-10));
  }
}

TEST_CASE("clt_experiment matches the Green-Kubo normal law") {
  const auto cat = make_cat();
  const OrbitEngine eng(cat, 1 << 11);
  const auto c10 = Observable::character(cat.manifold(), {1, 0}, Phase::Cos);

  const auto rep = clt_experiment(eng, c10, {64, 256}, 2000, 16, 40000, 5);
  CHECK(rep.sigma2_hat == doctest::Approx(0.5).epsilon(0.1));
  CHECK(rep.mean_exact);
  CHECK(rep.mean_used == 0.0);
  CHECK(rep.sample_count == 2000);
  REQUIRE(rep.ks_statistics.size() == 2);
  for (double ks : rep.ks_statistics) CHECK(ks <= 0.06);
  for (double v : rep.empirical_variances)
    CHECK(v == doctest::Approx(0.5).epsilon(0.3));
}

TEST_CASE("donsker paths behave like Brownian motion for the cat map") {
  const auto cat = make_cat();
  const OrbitEngine eng(cat, 1 << 10);
  const auto c10 = Observable::character(cat.manifold(), {1, 0}, Phase::Cos);

  const auto rep = donsker_paths(eng, c10, 512, 1500, 9, 16, 40000, 7);
  CHECK(rep.n == 512);
  CHECK(rep.path_count == 1500);
  REQUIRE(rep.grid.size() == 9);
  CHECK(rep.grid.front() == 0.0);
  CHECK(rep.grid.back() == 1.0);
  REQUIRE(rep.variance_at_grid.size() == 9);
  CHECK(rep.variance_slope > 0.6);
  CHECK(rep.variance_slope < 1.4);
  CHECK(std::abs(rep.increment_correlation) < 0.15);
  CHECK(rep.paths.size() == 1500);

  // variance at t = 0 vanishes and grows to ~t
  CHECK(rep.variance_at_grid.front() == 0.0);
  CHECK(rep.variance_at_grid.back() == doctest::Approx(1.0).epsilon(0.35));
}

TEST_CASE("donsker rejects coboundaries via ZeroVariance") {
  const auto cat = make_cat();
  const OrbitEngine eng(cat, 1 << 10);
  const auto psi = Observable::character(cat.manifold(), {1, 0}, Phase::Cos);
  const auto f = coboundary_make(cat, psi);
  CHECK_THROWS_AS(donsker_paths(eng, f, 256, 100, 5, 16, 40000, 3),
                  ZeroVariance);
}

TEST_CASE("coboundary solver reconstructs the transfer function") {
  const auto cat = make_cat();
  const OrbitEngine eng(cat, 1 << 10);
  const auto psi = Observable::character(cat.manifold(), {1, 0}, Phase::Cos);
  const auto f = coboundary_make(cat, psi);

  // the solver refuses observables with a visible mean
  CHECK_THROWS_AS(coboundary_solve(eng, psi.shifted(1.0), 50,
                                   CoboundaryScheme::Cesaro, 0.95, 64, 1),
                  NotCentered);

  const auto rep =
      coboundary_solve(eng, f, 200, CoboundaryScheme::Cesaro, 0.95, 256, 3);
  CHECK(rep.n_used == 200);
  CHECK(rep.f_sup > 0.0);
  CHECK(rep.residual_l2 <= 0.05 * rep.f_sup);
  CHECK(rep.residual_sup >= rep.residual_l2);

  // f = psi o alpha - psi is solved by phi = psi + const, so the
  // reconstruction minus psi should be flat up to the Cesaro tail
  std::mt19937_64 g(89);
  const Point base =
      cat.manifold().reduce(fx::rand_vec(g, 2, 0.0, 1.0)).point;
  const double offset = rep.phi.eval(base) - psi.eval(base);
  for (int trial = 0; trial < 10; ++trial) {
    const Point x =
        cat.manifold().reduce(fx::rand_vec(g, 2, 0.0, 1.0)).point;
    CHECK(std::abs(rep.phi.eval(x) - psi.eval(x) - offset) <= 0.25);
  }
}

TEST_CASE("coboundary_test decides both directions") {
  const auto cat = make_cat();
  const OrbitEngine eng(cat, 1 << 10);
  const auto psi = Observable::character(cat.manifold(), {1, 0}, Phase::Cos);

  const auto yes = coboundary_test(eng, coboundary_make(cat, psi), 16, 30000, 3);
  CHECK(yes.decision == CoboundaryDecision::Coboundary);
  REQUIRE(yes.residual_n_ladder.size() == yes.residual_l2_ladder.size());
  CHECK(yes.residual_n_ladder.size() >= 2);
  CHECK(yes.residual_l2_ladder.back() <= 0.05 * yes.f_sup);

  const auto no = coboundary_test(eng, psi, 16, 30000, 5);
  CHECK(no.decision == CoboundaryDecision::NotCoboundary);
  CHECK(std::abs(no.sigma2_hat - 0.5) <= 3.5 * no.sigma2_se + 1e-3);
}

TEST_CASE("multimix_experiment decays on character triples") {
  const auto cat = make_cat();
  const OrbitEngine eng(cat, 1 << 8);
  const Nilmanifold& m = cat.manifold();
  const std::vector<Observable> fs{
      Observable::character(m, {1, 0}, Phase::Cos),
      Observable::character(m, {0, 1}, Phase::Cos),
      Observable::character(m, {1, 1}, Phase::Cos)};

  const auto rep = multimix_experiment(eng, fs, {1, 2, 3}, 20000, 7);
  CHECK(rep.points.size() == 3);
  for (const auto& p : rep.points) {
    const auto exact = exact_character_product_integral(
        cat, fs, {0, static_cast<long long>(p.parameter),
                  2 * static_cast<long long>(p.parameter)});
    REQUIRE(exact.has_value());
    CHECK(std::abs(p.mean - *exact) <= 3.5 * p.se + 1e-12);
  }
}
