#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace nilmix {

// Deterministic stream RNG. Every Monte-Carlo loop draws from a stream keyed
// by (seed, stream id, worker index), so results depend only on those three
// values, never on scheduling. xoshiro256** seeded via splitmix64; uniform
// doubles take the top 53 bits, so output is identical across platforms
// (no reliance on std::uniform_real_distribution internals).
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream, std::uint64_t worker = 0) {
    std::uint64_t x = seed;
    x ^= 0x9e3779b97f4a7c15ULL * (stream + 1);
    x ^= 0xbf58476d1ce4e5b9ULL * (worker + 1);
    for (auto& si : s_) si = splitmix64(x);
    // burn a few outputs so nearby keys decorrelate
    for (int i = 0; i < 8; ++i) next();
  }

  std::uint64_t next() {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // uniform in [0,1)
  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * uniform01(); }

  // integer in [lo, hi] inclusive
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<std::int64_t>(next() % span);
  }

  // standard normal, Box-Muller (deterministic, no cached spare)
  double normal() {
    double u1 = uniform01(), u2 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }
  static std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t s_[4];
};

// Small helper used wherever a derived stream id is needed: stable hash of a
// label plus counters (e.g. one stream per n in an n-schedule).
inline std::uint64_t stream_id(std::uint64_t base, std::uint64_t a,
                               std::uint64_t b = 0) {
  std::uint64_t h = base ^ 0xd6e8feb86659fd93ULL;
  h ^= (a + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2));
  h *= 0xff51afd7ed558ccdULL;
  h ^= (b + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2));
  h *= 0xc4ceb9fe1a85ec53ULL;
  return h ^ (h >> 33);
}

}  // namespace nilmix
