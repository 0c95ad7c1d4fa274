#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cmath>
#include <cstdint>
#include <string>

namespace nilmix {

using BigInt = boost::multiprecision::cpp_int;
using Rat = boost::multiprecision::cpp_rational;

inline double to_double(const Rat& q) { return q.template convert_to<double>(); }

inline Rat rat(long long num, long long den = 1) { return Rat(num, den); }

// floor(a/b) with sign handling; b != 0.
inline BigInt floor_div(const BigInt& a, const BigInt& b) {
  BigInt q = a / b, r = a % b;
  if (r != 0 && ((r < 0) != (b < 0))) --q;
  return q;
}

inline BigInt rat_floor(const Rat& q) {
  return floor_div(numerator(q), denominator(q));
}

inline bool is_integer(const Rat& q) { return denominator(q) == 1; }

// exact dyadic rational equal to the double (finite inputs only)
inline Rat rat_from_double(double x) {
  if (x == 0.0) return Rat(0);
  int exp = 0;
  const double m = std::frexp(x, &exp);  // x = m * 2^exp, |m| in [1/2, 1)
  const auto mant = static_cast<long long>(std::ldexp(m, 53));
  Rat q(mant);
  const int shift = exp - 53;
  BigInt pow2 = BigInt(1) << (shift < 0 ? -shift : shift);
  if (shift >= 0)
    q *= Rat(pow2);
  else
    q /= Rat(pow2);
  return q;
}

inline std::string to_string(const Rat& q) {
  std::string s = numerator(q).str();
  if (denominator(q) != 1) s += "/" + denominator(q).str();
  return s;
}

}  // namespace nilmix
