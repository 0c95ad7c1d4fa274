#include "nilmix/ratlinalg.hpp"

#include <algorithm>
#include <map>
#include <mutex>

namespace nilmix {

RatMat RatMat::identity(int n) {
  RatMat m(n, n);
  for (int i = 0; i < n; ++i) m.at(i, i) = 1;
  return m;
}

RatMat RatMat::operator*(const RatMat& o) const {
  if (cols != o.rows) throw DimensionMismatch("RatMat: size mismatch in product");
  RatMat r(rows, o.cols);
  for (int i = 0; i < rows; ++i)
    for (int k = 0; k < cols; ++k) {
      const Rat& x = at(i, k);
      if (x == 0) continue;
      for (int j = 0; j < o.cols; ++j) {
        const Rat& y = o.at(k, j);
        if (y != 0) r.at(i, j) += x * y;
      }
    }
  return r;
}

RatMat RatMat::operator+(const RatMat& o) const {
  if (rows != o.rows || cols != o.cols)
    throw DimensionMismatch("RatMat: size mismatch in sum");
  RatMat r(rows, cols);
  for (size_t i = 0; i < a.size(); ++i) r.a[i] = a[i] + o.a[i];
  return r;
}

RatMat RatMat::operator-(const RatMat& o) const {
  if (rows != o.rows || cols != o.cols)
    throw DimensionMismatch("RatMat: size mismatch in difference");
  RatMat r(rows, cols);
  for (size_t i = 0; i < a.size(); ++i) r.a[i] = a[i] - o.a[i];
  return r;
}

RatVec RatMat::apply(const RatVec& v) const {
  if (static_cast<int>(v.size()) != cols)
    throw DimensionMismatch("RatMat: vector length mismatch");
  RatVec r(rows);
  for (int i = 0; i < rows; ++i) {
    Rat s = 0;
    for (int j = 0; j < cols; ++j)
      if (at(i, j) != 0 && v[j] != 0) s += at(i, j) * v[j];
    r[i] = s;
  }
  return r;
}

RatMat RatMat::transpose() const {
  RatMat r(cols, rows);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) r.at(j, i) = at(i, j);
  return r;
}

RatMat rat_scale(const RatMat& m, const Rat& s) {
  RatMat r = m;
  for (auto& x : r.a) x *= s;
  return r;
}

std::vector<int> rat_rref(std::vector<RatVec>& rows) {
  std::vector<int> pivots;
  if (rows.empty()) return pivots;
  const int ncols = static_cast<int>(rows[0].size());
  int r = 0;
  for (int c = 0; c < ncols && r < static_cast<int>(rows.size()); ++c) {
    int piv = -1;
    for (int i = r; i < static_cast<int>(rows.size()); ++i)
      if (rows[i][c] != 0) { piv = i; break; }
    if (piv < 0) continue;
    std::swap(rows[r], rows[piv]);
    const Rat inv = Rat(1) / rows[r][c];
    for (int j = c; j < ncols; ++j) rows[r][j] *= inv;
    for (int i = 0; i < static_cast<int>(rows.size()); ++i) {
      if (i == r || rows[i][c] == 0) continue;
      const Rat f = rows[i][c];
      for (int j = c; j < ncols; ++j) rows[i][j] -= f * rows[r][j];
    }
    pivots.push_back(c);
    ++r;
  }
  rows.resize(pivots.size(), RatVec(ncols));
  return pivots;
}

int rat_rank(std::vector<RatVec> rows) {
  return static_cast<int>(rat_rref(rows).size());
}

Rat rat_det(const RatMat& m) {
  if (m.rows != m.cols) throw DimensionMismatch("rat_det: square matrix required");
  RatMat t = m;
  Rat det = 1;
  const int n = m.rows;
  for (int c = 0; c < n; ++c) {
    int piv = -1;
    for (int i = c; i < n; ++i)
      if (t.at(i, c) != 0) { piv = i; break; }
    if (piv < 0) return Rat(0);
    if (piv != c) {
      for (int j = 0; j < n; ++j) std::swap(t.at(c, j), t.at(piv, j));
      det = -det;
    }
    det *= t.at(c, c);
    const Rat inv = Rat(1) / t.at(c, c);
    for (int i = c + 1; i < n; ++i) {
      if (t.at(i, c) == 0) continue;
      const Rat f = t.at(i, c) * inv;
      for (int j = c; j < n; ++j) t.at(i, j) -= f * t.at(c, j);
    }
  }
  return det;
}

RatMat rat_inverse(const RatMat& m) {
  if (m.rows != m.cols) throw DimensionMismatch("rat_inverse: square matrix required");
  const int n = m.rows;
  std::vector<RatVec> aug(n, RatVec(2 * n));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) aug[i][j] = m.at(i, j);
    aug[i][n + i] = 1;
  }
  auto pivots = rat_rref(aug);
  if (static_cast<int>(pivots.size()) != n || pivots.back() >= n)
    throw Error("rat_inverse: singular matrix");
  RatMat r(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) r.at(i, j) = aug[i][n + j];
  return r;
}

RatMat rat_pow(const RatMat& m, long long n) {
  if (m.rows != m.cols) throw DimensionMismatch("rat_pow: square matrix required");
  if (n < 0) return rat_pow(rat_inverse(m), -n);
  RatMat result = RatMat::identity(m.rows);
  RatMat base = m;
  unsigned long long e = static_cast<unsigned long long>(n);
  while (e > 0) {
    if (e & 1ULL) result = result * base;
    base = base * base;
    e >>= 1;
  }
  return result;
}

std::vector<RatVec> rat_kernel(const RatMat& m) {
  std::vector<RatVec> rows(m.rows, RatVec(m.cols));
  for (int i = 0; i < m.rows; ++i)
    for (int j = 0; j < m.cols; ++j) rows[i][j] = m.at(i, j);
  auto pivots = rat_rref(rows);
  std::vector<bool> is_pivot(m.cols, false);
  for (int c : pivots) is_pivot[c] = true;

  std::vector<RatVec> basis;
  for (int c = 0; c < m.cols; ++c) {
    if (is_pivot[c]) continue;
    RatVec v(m.cols);
    v[c] = 1;
    for (size_t r = 0; r < pivots.size(); ++r) v[pivots[r]] = -rows[r][c];
    basis.push_back(std::move(v));
  }
  return basis;
}

std::vector<RatVec> span_basis(std::vector<RatVec> vectors) {
  rat_rref(vectors);
  return vectors;
}

bool span_contains(const std::vector<RatVec>& rref_basis, const RatVec& v) {
  RatVec r = v;
  for (const auto& b : rref_basis) {
    int pivot = -1;
    for (size_t j = 0; j < b.size(); ++j)
      if (b[j] != 0) { pivot = static_cast<int>(j); break; }
    if (pivot < 0) continue;
    if (r[pivot] != 0) {
      const Rat f = r[pivot];  // basis rows are monic at their pivot
      for (size_t j = 0; j < b.size(); ++j) r[j] -= f * b[j];
    }
  }
  for (const auto& x : r)
    if (x != 0) return false;
  return true;
}

// --- polynomials ------------------------------------------------------------

int poly_deg(const RatPoly& p) {
  for (int i = static_cast<int>(p.size()) - 1; i >= 0; --i)
    if (p[i] != 0) return i;
  return -1;
}

RatPoly poly_trim(RatPoly p) {
  while (!p.empty() && p.back() == 0) p.pop_back();
  return p;
}

RatPoly poly_add(const RatPoly& a, const RatPoly& b) {
  RatPoly r(std::max(a.size(), b.size()));
  for (size_t i = 0; i < r.size(); ++i) {
    if (i < a.size()) r[i] += a[i];
    if (i < b.size()) r[i] += b[i];
  }
  return poly_trim(std::move(r));
}

RatPoly poly_sub(const RatPoly& a, const RatPoly& b) {
  RatPoly r(std::max(a.size(), b.size()));
  for (size_t i = 0; i < r.size(); ++i) {
    if (i < a.size()) r[i] += a[i];
    if (i < b.size()) r[i] -= b[i];
  }
  return poly_trim(std::move(r));
}

RatPoly poly_mul(const RatPoly& a, const RatPoly& b) {
  if (poly_deg(a) < 0 || poly_deg(b) < 0) return {};
  RatPoly r(a.size() + b.size() - 1);
  for (size_t i = 0; i < a.size(); ++i) {
    if (a[i] == 0) continue;
    for (size_t j = 0; j < b.size(); ++j)
      if (b[j] != 0) r[i + j] += a[i] * b[j];
  }
  return poly_trim(std::move(r));
}

std::pair<RatPoly, RatPoly> poly_divmod(const RatPoly& a, const RatPoly& b) {
  RatPoly rem = poly_trim(a);
  const RatPoly den = poly_trim(b);
  const int db = poly_deg(den);
  if (db < 0) throw Error("poly_divmod: division by zero polynomial");
  RatPoly quot;
  int dr = poly_deg(rem);
  if (dr >= db) quot.assign(dr - db + 1, Rat(0));
  while (dr >= db) {
    const Rat f = rem[dr] / den[db];
    quot[dr - db] = f;
    for (int i = 0; i <= db; ++i) rem[dr - db + i] -= f * den[i];
    rem = poly_trim(std::move(rem));
    dr = poly_deg(rem);
  }
  return {poly_trim(std::move(quot)), rem};
}

bool poly_divides(const RatPoly& divisor, const RatPoly& dividend) {
  return poly_deg(poly_divmod(dividend, divisor).second) < 0;
}

RatPoly poly_monic(RatPoly p) {
  p = poly_trim(std::move(p));
  const int d = poly_deg(p);
  if (d < 0) return p;
  const Rat inv = Rat(1) / p[d];
  for (auto& c : p) c *= inv;
  return p;
}

RatPoly poly_gcd(RatPoly a, RatPoly b) {
  a = poly_trim(std::move(a));
  b = poly_trim(std::move(b));
  while (poly_deg(b) >= 0) {
    RatPoly r = poly_divmod(a, b).second;
    a = std::move(b);
    b = std::move(r);
  }
  return poly_monic(std::move(a));
}

RatPoly poly_derivative(const RatPoly& p) {
  if (p.size() <= 1) return {};
  RatPoly r(p.size() - 1);
  for (size_t i = 1; i < p.size(); ++i) r[i - 1] = p[i] * Rat(static_cast<long>(i));
  return poly_trim(std::move(r));
}

Rat poly_eval(const RatPoly& p, const Rat& x) {
  Rat r = 0;
  for (int i = static_cast<int>(p.size()) - 1; i >= 0; --i) r = r * x + p[i];
  return r;
}

RatMat poly_at_matrix(const RatPoly& p, const RatMat& m) {
  if (m.rows != m.cols) throw DimensionMismatch("poly_at_matrix: square required");
  RatMat r(m.rows, m.rows);
  RatMat power = RatMat::identity(m.rows);
  for (size_t i = 0; i < p.size(); ++i) {
    if (p[i] != 0) r = r + rat_scale(power, p[i]);
    if (i + 1 < p.size()) power = power * m;
  }
  return r;
}

RatPoly char_poly(const RatMat& m) {
  if (m.rows != m.cols) throw DimensionMismatch("char_poly: square matrix required");
  const int n = m.rows;
  // Faddeev-LeVerrier: exact, no pivoting concerns.
  RatPoly c(n + 1);
  c[n] = 1;
  RatMat mk(n, n);  // zero
  for (int k = 1; k <= n; ++k) {
    mk = m * mk + rat_scale(RatMat::identity(n), c[n - k + 1]);
    RatMat am = m * mk;
    Rat tr = 0;
    for (int i = 0; i < n; ++i) tr += am.at(i, i);
    c[n - k] = -tr / k;
  }
  return c;
}

const RatPoly& cyclotomic(int k) {
  static std::map<int, RatPoly> cache;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(k);
  if (it != cache.end()) return it->second;
  if (k < 1) throw Error("cyclotomic: k must be >= 1");
  // x^k - 1 divided by all proper cyclotomic divisors
  RatPoly xk(k + 1);
  xk[0] = -1;
  xk[k] = 1;
  RatPoly result = xk;
  for (int d = 1; d < k; ++d) {
    if (k % d != 0) continue;
    // recursive fill of cache without re-locking: compute inline
    if (cache.find(d) == cache.end()) {
      RatPoly xd(d + 1);
      xd[0] = -1;
      xd[d] = 1;
      RatPoly rd = xd;
      for (int e = 1; e < d; ++e)
        if (d % e == 0) rd = poly_divmod(rd, cache.at(e)).first;
      cache[d] = rd;
    }
    result = poly_divmod(result, cache.at(d)).first;
  }
  return cache.emplace(k, std::move(result)).first->second;
}

// --- factorization ----------------------------------------------------------

namespace {

// primitive integer coefficients of a monic-over-Q polynomial
std::vector<BigInt> to_primitive_int(const RatPoly& p) {
  BigInt l = 1;
  for (const auto& c : p) l = boost::multiprecision::lcm(l, denominator(c));
  std::vector<BigInt> z(p.size());
  for (size_t i = 0; i < p.size(); ++i)
    z[i] = numerator(p[i]) * (l / denominator(p[i]));
  BigInt g = 0;
  for (const auto& c : z) g = boost::multiprecision::gcd(g, c);
  if (g > 1)
    for (auto& c : z) c /= g;
  return z;
}

std::vector<BigInt> int_divisors(BigInt v, bool& complete) {
  complete = true;
  if (v < 0) v = -v;
  std::vector<BigInt> divs;
  if (v == 0) { complete = false; return divs; }  // any integer divides 0
  BigInt i = 1;
  while (i * i <= v) {
    if (v % i == 0) {
      divs.push_back(i);
      if (i * i != v) divs.push_back(v / i);
    }
    ++i;
    if (i > 2000000) { complete = false; break; }  // give up on huge values
  }
  std::sort(divs.begin(), divs.end());
  return divs;
}

BigInt int_poly_eval(const std::vector<BigInt>& p, const BigInt& x) {
  BigInt r = 0;
  for (int i = static_cast<int>(p.size()) - 1; i >= 0; --i) r = r * x + p[i];
  return r;
}

// All rational roots of primitive integer polynomial (num, den) pairs.
std::vector<Rat> rational_roots(const std::vector<BigInt>& p) {
  std::vector<Rat> roots;
  const int d = static_cast<int>(p.size()) - 1;
  if (d < 1) return roots;
  bool c1 = true, c2 = true;
  auto nums = int_divisors(p[0], c1);
  auto dens = int_divisors(p[d], c2);
  if (p[0] == 0) roots.push_back(Rat(0));
  for (const auto& n : nums)
    for (const auto& den : dens)
      for (int s = -1; s <= 1; s += 2) {
        Rat cand(n * s, den);
        RatPoly rp(p.size());
        for (size_t i = 0; i < p.size(); ++i) rp[i] = Rat(p[i]);
        if (poly_eval(rp, cand) == 0) roots.push_back(cand);
      }
  std::sort(roots.begin(), roots.end());
  roots.erase(std::unique(roots.begin(), roots.end()), roots.end());
  return roots;
}

// Kronecker search for a monic rational factor of degree g. Returns empty on
// failure; sets budget_ok = false if the enumeration was truncated.
RatPoly kronecker_find(const RatPoly& w, int g, std::uint64_t& budget,
                       bool& budget_ok) {
  auto zp = to_primitive_int(w);
  std::vector<BigInt> pts;
  for (int j = 0; static_cast<int>(pts.size()) < g + 1; ++j) {
    BigInt x = (j % 2 == 0) ? BigInt(j / 2) : BigInt(-(j / 2 + 1));
    pts.push_back(x);
  }
  std::vector<std::vector<BigInt>> divs(g + 1);
  for (int j = 0; j <= g; ++j) {
    bool complete = true;
    BigInt v = int_poly_eval(zp, pts[j]);
    if (v == 0) { budget_ok = false; return {}; }  // roots peeled earlier
    divs[j] = int_divisors(v, complete);
    if (!complete || divs[j].empty()) { budget_ok = false; return {}; }
  }

  // iterate sign/divisor tuples; value at pts[j] of the candidate factor
  std::vector<size_t> idx(g + 1, 0);
  std::vector<int> sign(g + 1, 1);
  while (true) {
    if (budget-- == 0) { budget_ok = false; return {}; }
    // Lagrange interpolation of candidate values
    RatPoly cand{Rat(0)};
    for (int j = 0; j <= g; ++j) {
      RatPoly basis{Rat(1)};
      Rat denom = 1;
      for (int k2 = 0; k2 <= g; ++k2) {
        if (k2 == j) continue;
        basis = poly_mul(basis, RatPoly{Rat(-pts[k2]), Rat(1)});
        denom *= Rat(pts[j] - pts[k2]);
      }
      Rat val = Rat(divs[j][idx[j]] * sign[j]) / denom;
      RatPoly scaled = basis;
      for (auto& c : scaled) c *= val;
      cand = poly_add(cand, scaled);
    }
    if (poly_deg(cand) == g) {
      RatPoly mc = poly_monic(cand);
      if (poly_divides(mc, w)) return mc;
    }
    // advance sign/divisor odometer
    int j = 0;
    for (; j <= g; ++j) {
      if (sign[j] == 1) { sign[j] = -1; break; }
      sign[j] = 1;
      if (++idx[j] < divs[j].size()) break;
      idx[j] = 0;
    }
    if (j > g) break;
  }
  return {};
}

// Factor a squarefree monic rational polynomial.
void factor_squarefree(const RatPoly& w0, std::vector<RatPoly>& out,
                       std::vector<RatPoly>& uncertified, std::uint64_t& budget) {
  RatPoly w = poly_monic(w0);
  int d = poly_deg(w);
  if (d <= 0) return;

  // rational roots first
  auto roots = rational_roots(to_primitive_int(w));
  for (const auto& r : roots) {
    RatPoly lin{-r, Rat(1)};
    while (poly_divides(lin, w)) {  // squarefree, but be safe
      out.push_back(lin);
      w = poly_divmod(w, lin).first;
    }
  }
  d = poly_deg(w);
  if (d <= 0) return;
  if (d <= 3) {  // no rational root and degree <= 3 => irreducible
    out.push_back(w);
    return;
  }
  for (int g = 2; g <= d / 2; ++g) {
    bool ok = true;
    RatPoly f = kronecker_find(w, g, budget, ok);
    if (poly_deg(f) == g) {
      factor_squarefree(f, out, uncertified, budget);
      factor_squarefree(poly_divmod(w, f).first, out, uncertified, budget);
      return;
    }
    if (!ok) {  // enumeration truncated: cannot certify anything further
      uncertified.push_back(w);
      return;
    }
  }
  out.push_back(w);  // survived all degrees: irreducible
}

}  // namespace

std::vector<PolyFactor> factor_poly(const RatPoly& p, std::uint64_t budget) {
  RatPoly mp = poly_monic(p);
  if (poly_deg(mp) < 1) return {};

  // squarefree part, then per-factor multiplicities by exact division
  RatPoly sf = poly_divmod(mp, poly_gcd(mp, poly_derivative(mp))).first;
  std::vector<RatPoly> irr, uncertified;
  factor_squarefree(sf, irr, uncertified, budget);

  std::vector<PolyFactor> result;
  auto add = [&](const RatPoly& q, bool certified) {
    for (auto& pf : result)
      if (pf.factor == q) return;
    PolyFactor pf;
    pf.factor = q;
    pf.certified_irreducible = certified;
    RatPoly rem = mp;
    pf.multiplicity = 0;
    while (poly_deg(rem) >= poly_deg(q) && poly_divides(q, rem)) {
      rem = poly_divmod(rem, q).first;
      ++pf.multiplicity;
    }
    result.push_back(std::move(pf));
  };
  for (const auto& q : irr) add(q, true);
  for (const auto& q : uncertified) add(q, false);
  return result;
}

std::vector<PrimaryComponent> primary_decomposition(const RatMat& m) {
  const auto cp = char_poly(m);
  auto factors = factor_poly(cp);
  std::vector<PrimaryComponent> comps;
  int total = 0;
  for (const auto& f : factors) {
    PrimaryComponent pc;
    pc.factor = f.factor;
    pc.multiplicity = f.multiplicity;
    pc.certified_irreducible = f.certified_irreducible;
    RatMat qm = poly_at_matrix(f.factor, m);
    pc.basis = rat_kernel(rat_pow(qm, f.multiplicity));
    total += static_cast<int>(pc.basis.size());
    comps.push_back(std::move(pc));
  }
  if (total != m.rows)
    throw Error("primary_decomposition: components do not fill the space");
  return comps;
}

}  // namespace nilmix
