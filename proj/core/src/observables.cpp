#include "nilmix/observables.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "nilmix/errors.hpp"

namespace nilmix {

struct Observable::Impl {
  std::shared_ptr<const Nilmanifold> manifold;
  std::function<double(const Point&)> fn;
  std::optional<double> integral;
  double theta = 1.0;
  double eps = 0.0;
  std::string label;
  std::optional<std::vector<long long>> freq;  // characters only
  Phase phase = Phase::Cos;
};

Observable::Observable(std::shared_ptr<const Impl> impl)
    : impl_(std::move(impl)) {}

double Observable::eval(const Point& x) const { return impl_->fn(x); }
const Nilmanifold& Observable::manifold() const { return *impl_->manifold; }
std::shared_ptr<const Nilmanifold> Observable::manifold_ptr() const {
  return impl_->manifold;
}
double Observable::theta() const { return impl_->theta; }
std::optional<double> Observable::exact_integral() const {
  return impl_->integral;
}
double Observable::smoothing_radius() const { return impl_->eps; }
const std::string& Observable::label() const { return impl_->label; }
std::optional<std::vector<long long>> Observable::character_freq() const {
  return impl_->freq;
}
Phase Observable::character_phase() const { return impl_->phase; }

Observable Observable::character(const Nilmanifold& m,
                                 const std::vector<long long>& freq,
                                 Phase phase, double theta) {
  const int l = m.algebra().abelianization_dim();
  if (static_cast<int>(freq.size()) != l)
    throw DimensionMismatch("character frequency needs " + std::to_string(l) +
                            " entries (abelianization), got " +
                            std::to_string(freq.size()));
  if (!(theta > 0.0) || theta > 1.0)
    throw ConfigError("holder exponent must be in (0,1]");

  auto impl = std::make_shared<Impl>();
  impl->manifold = std::make_shared<const Nilmanifold>(m);
  impl->theta = theta;
  impl->freq = freq;
  impl->phase = phase;
  bool zero = true;
  for (long long mi : freq)
    if (mi != 0) { zero = false; break; }
  impl->integral = zero ? (phase == Phase::Cos ? 1.0 : 0.0) : 0.0;
  impl->label = "character";
  impl->fn = [freq, phase, l](const Point& x) {
    // depends only on the first l second-kind coordinates, which shift by
    // integers under the lattice, so no reduction is needed
    double arg = 0.0;
    for (int i = 0; i < l; ++i)
      arg += static_cast<double>(freq[i]) * x.t[i];
    arg *= 2.0 * std::numbers::pi;
    return phase == Phase::Cos ? std::cos(arg) : std::sin(arg);
  };
  return Observable(std::move(impl));
}

Observable Observable::bump(const Nilmanifold& m, const Point& center,
                            double radius, int degree, double theta) {
  if (!(radius > 0.0)) throw ConfigError("bump radius must be positive");
  if (degree < 1) throw ConfigError("bump degree must be >= 1");
  if (!(theta > 0.0) || theta > 1.0)
    throw ConfigError("holder exponent must be in (0,1]");
  const double guard = 0.5 * m.min_lattice_displacement();
  if (!(radius < guard))
    throw SupportTooLarge("bump radius " + std::to_string(radius) +
                          " >= injectivity guard " + std::to_string(guard));

  auto impl = std::make_shared<Impl>();
  impl->manifold = std::make_shared<const Nilmanifold>(m);
  impl->theta = theta;
  impl->label = "bump";
  // support sits inside an injectivity ball, where the metric is the
  // Euclidean log-norm times metric_scale and exp preserves volume, so the
  // Haar integral is the classical ball integral of (1-|w/R|^2)^degree
  {
    const double r = radius / m.metric_scale();
    const double half_d = 0.5 * static_cast<double>(m.dim());
    impl->integral = std::pow(std::numbers::pi, half_d) *
                     std::tgamma(degree + 1.0) /
                     std::tgamma(degree + 1.0 + half_d) *
                     std::pow(r, m.dim());
  }
  const auto mf = impl->manifold;
  const Point c = impl->manifold->reduce(center.t).point;
  impl->fn = [mf, c, radius, degree](const Point& x) {
    // the periodized sum has at most one term inside the support (radius
    // below half the minimal lattice displacement), and local_distance
    // already minimizes over lattice words, so one profile term suffices
    const Point xr = mf->reduce(x.t).point;
    const double u = mf->local_distance(xr, c) / radius;
    if (u >= 1.0) return 0.0;
    return std::pow(1.0 - u * u, degree);
  };
  return Observable(std::move(impl));
}

Observable Observable::constant(const Nilmanifold& m, double value) {
  auto impl = std::make_shared<Impl>();
  impl->manifold = std::make_shared<const Nilmanifold>(m);
  impl->integral = value;
  impl->label = "constant";
  impl->fn = [value](const Point&) { return value; };
  return Observable(std::move(impl));
}

Observable Observable::custom(std::shared_ptr<const Nilmanifold> m,
                              std::function<double(const Point&)> fn,
                              std::optional<double> integral, double theta,
                              std::string label) {
  auto impl = std::make_shared<Impl>();
  impl->manifold = std::move(m);
  impl->fn = std::move(fn);
  impl->integral = integral;
  impl->theta = theta;
  impl->label = std::move(label);
  return Observable(std::move(impl));
}

Observable Observable::shifted(double c) const {
  auto impl = std::make_shared<Impl>(*impl_);
  const Observable base = *this;
  impl->fn = [base, c](const Point& x) { return base.eval(x) + c; };
  if (impl->integral) impl->integral = *impl->integral + c;
  impl->freq.reset();
  impl->label = impl_->label + "+const";
  return Observable(std::move(impl));
}

Observable Observable::scaled(double s) const {
  auto impl = std::make_shared<Impl>(*impl_);
  const Observable base = *this;
  impl->fn = [base, s](const Point& x) { return s * base.eval(x); };
  if (impl->integral) impl->integral = *impl->integral * s;
  impl->freq.reset();
  impl->label = impl_->label + "*const";
  return Observable(std::move(impl));
}

double holder_norm_estimate(const Observable& f, double theta, int pair_count,
                            RngStream& rng) {
  if (!(theta > 0.0) || theta > 1.0)
    throw ConfigError("holder exponent must be in (0,1]");
  if (pair_count < 1) throw ConfigError("pair_count must be positive");
  const Nilmanifold& m = f.manifold();
  const int d = m.dim();
  const double guard = 0.5 * m.min_lattice_displacement();

  double sup_abs = 0.0, sup_quot = 0.0;
  const int scales = 6;
  for (int i = 0; i < pair_count; ++i) {
    const Point x = m.haar_sample(rng);
    const double fx = f.eval(x);
    sup_abs = std::max(sup_abs, std::fabs(fx));

    // separation scale cycles over guard/4 .. guard/128
    const double delta = guard * std::pow(0.5, 2 + i % scales);
    VecD u(d);
    double nn = 0.0;
    for (int k = 0; k < d; ++k) {
      u[k] = rng.normal();
      nn += u[k] * u[k];
    }
    if (!(nn > 0.0)) continue;
    const double scale = delta / std::sqrt(nn);
    for (auto& uk : u) uk *= scale;

    const Point y = m.translate(u, x);
    const double dist = m.local_distance(x, y);
    if (!(dist > 0.0) || dist >= guard) continue;
    sup_quot = std::max(sup_quot, std::fabs(fx - f.eval(y)) /
                                      std::pow(dist, theta));
  }
  return sup_abs + sup_quot;
}

Observable mollify(const Observable& f, double eps, int sample_count,
                   RngStream& rng) {
  if (!(eps > 0.0) || !(eps < 0.5))
    throw ConfigError("mollifier radius must be in (0, 1/2)");
  if (sample_count < 1) throw ConfigError("sample_count must be positive");
  const auto mf = f.manifold_ptr();
  const int d = mf->dim();

  // u uniform in the eps-ball: gaussian direction, radius eps * U^{1/d}
  std::vector<VecD> shifts;
  shifts.reserve(sample_count);
  for (int s = 0; s < sample_count; ++s) {
    VecD u(d);
    double nn = 0.0;
    for (int k = 0; k < d; ++k) {
      u[k] = rng.normal();
      nn += u[k] * u[k];
    }
    if (!(nn > 0.0)) { --s; continue; }
    const double r = eps * std::pow(rng.uniform01(), 1.0 / d);
    const double scale = r / std::sqrt(nn);
    for (auto& uk : u) uk *= scale;
    shifts.push_back(std::move(u));
  }

  const Observable base = f;
  auto impl = std::make_shared<Observable::Impl>();
  impl->manifold = mf;
  impl->integral = f.exact_integral();  // translation invariance of Haar
  impl->theta = f.theta();
  impl->eps = eps;
  impl->label = f.label() + "@mollified";
  impl->fn = [base, mf, shifts](const Point& x) {
    double acc = 0.0;
    for (const auto& u : shifts) acc += base.eval(mf->translate(u, x));
    return acc / static_cast<double>(shifts.size());
  };
  return Observable(std::move(impl));
}

McResult haar_mean(const Observable& f, std::uint64_t budget,
                   std::uint64_t seed, std::uint64_t stream, int workers) {
  const Nilmanifold& m = f.manifold();
  return mc_mean(budget, workers, seed, stream,
                 [&](RngStream& rng) { return f.eval(m.haar_sample(rng)); });
}

}  // namespace nilmix
