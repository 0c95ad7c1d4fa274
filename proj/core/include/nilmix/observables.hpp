#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "nilmix/manifold.hpp"
#include "nilmix/parallel.hpp"
#include "nilmix/rng.hpp"

namespace nilmix {

enum class Phase { Cos, Sin };

// Immutable test function on the quotient. Three base families:
//   character: cos/sin of 2 pi <m, t_1..t_l>, m integer frequencies on the
//     abelianization (exactly lattice-invariant since m pairs integrally);
//   bump: lattice-periodized compactly supported spline
//     (1 - (dist/radius)^2)^degree, one term by the injectivity guard;
//   mollified: Monte-Carlo convolution of a base observable over an
//     epsilon-ball of the algebra (see mollify below).
// Derived observables (shifted, scaled, coboundaries) share the base
// manifold. eval is pure and thread-safe.
class Observable {
 public:
  static Observable character(const Nilmanifold& m,
                              const std::vector<long long>& freq, Phase phase,
                              double theta = 1.0);
  static Observable bump(const Nilmanifold& m, const Point& center,
                         double radius, int degree = 3, double theta = 1.0);
  static Observable constant(const Nilmanifold& m, double value);
  // escape hatch for derived observables (coboundaries, composites); fn must
  // be pure, lattice-invariant and thread-safe
  static Observable custom(std::shared_ptr<const Nilmanifold> m,
                           std::function<double(const Point&)> fn,
                           std::optional<double> integral, double theta,
                           std::string label = "custom");

  double eval(const Point& x) const;
  double operator()(const Point& x) const { return eval(x); }

  const Nilmanifold& manifold() const;
  std::shared_ptr<const Nilmanifold> manifold_ptr() const;
  double theta() const;
  // exact Haar integral when the family provides one
  std::optional<double> exact_integral() const;
  // smoothing radius for mollified observables, 0 otherwise
  double smoothing_radius() const;
  const std::string& label() const;

  // frequency vector when the observable is a character (used by the exact
  // correlation calculus); empty otherwise
  std::optional<std::vector<long long>> character_freq() const;
  Phase character_phase() const;

  Observable shifted(double c) const;  // f + c
  Observable scaled(double s) const;   // s * f

 private:
  struct Impl;
  explicit Observable(std::shared_ptr<const Impl> impl);
  std::shared_ptr<const Impl> impl_;

  friend Observable mollify(const Observable&, double, int, RngStream&);
};

// Sampled lower bound for the C^theta norm: sup |f| over haar samples plus
// the sup of |f(x)-f(y)| / d(x,y)^theta over pairs at log-spaced separation
// scales. Reported as a lower bound; acceptance inequalities use it on both
// sides consistently.
double holder_norm_estimate(const Observable& f, double theta, int pair_count,
                            RngStream& rng);

// f_eps(x) = average of f(exp(u) x) over sample_count draws of u uniform in
// the eps-ball of the algebra. Samples are drawn once and cached, so the
// result is a deterministic observable. The Haar integral is inherited
// (translation invariance).
Observable mollify(const Observable& f, double eps, int sample_count,
                   RngStream& rng);

// Haar Monte-Carlo mean, shared by experiments that need a reference
// integral for observables without an exact one.
McResult haar_mean(const Observable& f, std::uint64_t budget,
                   std::uint64_t seed, std::uint64_t stream, int workers = 1);

}  // namespace nilmix
