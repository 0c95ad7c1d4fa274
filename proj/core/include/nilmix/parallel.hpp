#pragma once

#include <cmath>
#include <cstdint>
#include <thread>
#include <vector>

#include "nilmix/rng.hpp"

namespace nilmix {

struct McResult {
  double mean = 0.0;
  double se = 0.0;       // standard error of the mean
  std::uint64_t n = 0;
};

// Deterministic parallel Monte-Carlo mean. The sample space is partitioned
// into `workers` contiguous chunks; worker w draws from RngStream(seed,
// stream, w) only. Partial sums are merged in worker order after all joins,
// so the result is a function of (seed, stream, workers, total) alone.
template <class SampleFn>
McResult mc_mean(std::uint64_t total, int workers, std::uint64_t seed,
                 std::uint64_t stream, SampleFn&& fn) {
  if (workers < 1) workers = 1;
  if (static_cast<std::uint64_t>(workers) > total && total > 0)
    workers = static_cast<int>(total);

  struct Partial {
    double sum = 0.0, sumsq = 0.0;
    std::uint64_t n = 0;
  };
  std::vector<Partial> parts(workers);

  const std::uint64_t chunk = (total + workers - 1) / workers;
  auto run = [&](int w) {
    const std::uint64_t lo = w * chunk;
    const std::uint64_t hi = std::min(total, lo + chunk);
    if (lo >= hi) return;
    RngStream rng(seed, stream, static_cast<std::uint64_t>(w));
    Partial p;
    for (std::uint64_t i = lo; i < hi; ++i) {
      const double v = fn(rng);
      p.sum += v;
      p.sumsq += v * v;
      ++p.n;
    }
    parts[w] = p;
  };

  if (workers == 1) {
    run(0);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) pool.emplace_back(run, w);
    for (auto& t : pool) t.join();
  }

  double sum = 0.0, sumsq = 0.0;
  std::uint64_t n = 0;
  for (const auto& p : parts) {  // fixed order merge
    sum += p.sum;
    sumsq += p.sumsq;
    n += p.n;
  }

  McResult r;
  r.n = n;
  if (n == 0) return r;
  r.mean = sum / static_cast<double>(n);
  if (n > 1) {
    double var = (sumsq - static_cast<double>(n) * r.mean * r.mean) /
                 static_cast<double>(n - 1);
    if (var < 0.0) var = 0.0;
    r.se = std::sqrt(var / static_cast<double>(n));
  }
  return r;
}

// Raw moment accumulator for vector-valued samples. Used by experiments that
// grow their budget on a doubling ladder: each rung is one mc_accumulate_vec
// call with a fresh stream, rungs are merged in order.
struct McAccum {
  std::vector<double> sum, sumsq;
  std::uint64_t n = 0;

  explicit McAccum(int dim = 0) : sum(dim, 0.0), sumsq(dim, 0.0) {}

  void merge(const McAccum& o) {
    if (sum.empty()) {
      *this = o;
      return;
    }
    for (size_t i = 0; i < sum.size(); ++i) {
      sum[i] += o.sum[i];
      sumsq[i] += o.sumsq[i];
    }
    n += o.n;
  }

  double mean(int i) const {
    return n ? sum[i] / static_cast<double>(n) : 0.0;
  }
  double se(int i) const {
    if (n < 2) return 0.0;
    const double m = mean(i);
    double var = (sumsq[i] - static_cast<double>(n) * m * m) /
                 static_cast<double>(n - 1);
    if (var < 0.0) var = 0.0;
    return std::sqrt(var / static_cast<double>(n));
  }
  McResult result(int i) const { return {mean(i), se(i), n}; }
};

// fn(rng, out) fills out[0..dim) with one sample's values. Same determinism
// contract as mc_mean.
template <class SampleFn>
McAccum mc_accumulate_vec(std::uint64_t total, int workers, std::uint64_t seed,
                          std::uint64_t stream, int dim, SampleFn&& fn) {
  if (workers < 1) workers = 1;
  if (static_cast<std::uint64_t>(workers) > total && total > 0)
    workers = static_cast<int>(total);

  std::vector<McAccum> parts(workers, McAccum(dim));
  const std::uint64_t chunk = (total + workers - 1) / workers;
  auto run = [&](int w) {
    const std::uint64_t lo = w * chunk;
    const std::uint64_t hi = std::min(total, lo + chunk);
    if (lo >= hi) return;
    RngStream rng(seed, stream, static_cast<std::uint64_t>(w));
    McAccum acc(dim);
    std::vector<double> buf(dim, 0.0);
    for (std::uint64_t i = lo; i < hi; ++i) {
      fn(rng, buf);
      for (int j = 0; j < dim; ++j) {
        acc.sum[j] += buf[j];
        acc.sumsq[j] += buf[j] * buf[j];
      }
      ++acc.n;
    }
    parts[w] = std::move(acc);
  };

  if (workers == 1) {
    run(0);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) pool.emplace_back(run, w);
    for (auto& t : pool) t.join();
  }

  McAccum out(dim);
  for (auto& p : parts) out.merge(p);
  return out;
}

}  // namespace nilmix
