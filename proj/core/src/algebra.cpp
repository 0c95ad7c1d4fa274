#include "nilmix/algebra.hpp"

#include <map>
#include <string>

namespace nilmix {

VecD to_vecd(const RatVec& v) {
  VecD r(v.size());
  for (size_t i = 0; i < v.size(); ++i) r[i] = to_double(v[i]);
  return r;
}

namespace {

std::string ijk(int i, int j, int k) {
  return "(" + std::to_string(i + 1) + "," + std::to_string(j + 1) + "," +
         std::to_string(k + 1) + ")";
}

}  // namespace

NilpotentAlgebra NilpotentAlgebra::validate(int dim,
                                            const std::vector<Rat>& tensor,
                                            std::optional<int> declared_step) {
  if (dim < 1) throw DimensionMismatch("algebra dimension must be >= 1");
  if (tensor.size() != static_cast<size_t>(dim) * dim * dim)
    throw DimensionMismatch("structure tensor must have dim^3 entries");

  NilpotentAlgebra g;
  g.dim_ = dim;
  g.tensor_ = tensor;

  auto c = [&](int i, int j, int k) -> const Rat& {
    return tensor[(static_cast<size_t>(i) * dim + j) * dim + k];
  };

  for (int i = 0; i < dim; ++i)
    for (int j = 0; j <= i; ++j)
      for (int k = 0; k < dim; ++k)
        if (c(i, j, k) != -c(j, i, k))
          throw AntisymmetryViolation("antisymmetry fails at " + ijk(i, j, k) +
                                      ": c=" + to_string(c(i, j, k)) +
                                      " vs -c'=" + to_string(-c(j, i, k)));

  // Jacobi: [[ei,ej],ek] + [[ej,ek],ei] + [[ek,ei],ej] = 0, exactly.
  auto basis_bracket = [&](int i, int j) {
    RatVec v(dim);
    for (int k = 0; k < dim; ++k) v[k] = c(i, j, k);
    return v;
  };
  auto bracket_vec_basis = [&](const RatVec& x, int j) {
    RatVec r(dim);
    for (int i = 0; i < dim; ++i) {
      if (x[i] == 0) continue;
      for (int k = 0; k < dim; ++k)
        if (c(i, j, k) != 0) r[k] += x[i] * c(i, j, k);
    }
    return r;
  };
  for (int i = 0; i < dim; ++i)
    for (int j = i + 1; j < dim; ++j)
      for (int k = j + 1; k < dim; ++k) {
        RatVec s(dim);
        RatVec t1 = bracket_vec_basis(basis_bracket(i, j), k);
        RatVec t2 = bracket_vec_basis(basis_bracket(j, k), i);
        RatVec t3 = bracket_vec_basis(basis_bracket(k, i), j);
        for (int m = 0; m < dim; ++m) {
          s[m] = t1[m] + t2[m] + t3[m];
          if (s[m] != 0)
            throw JacobiViolation("Jacobi identity fails on triple " +
                                  ijk(i, j, k) + " (component " +
                                  std::to_string(m + 1) + ")");
        }
      }

  // Lower central series by exact span saturation.
  std::vector<RatVec> full;
  for (int i = 0; i < dim; ++i) {
    RatVec e(dim);
    e[i] = 1;
    full.push_back(e);
  }
  g.lcs_.push_back(span_basis(full));

  std::vector<RatVec> current = g.lcs_.back();
  while (true) {
    std::vector<RatVec> next;
    for (int i = 0; i < dim; ++i)
      for (const auto& v : current) next.push_back(bracket_vec_basis(v, i));
    next = span_basis(std::move(next));
    // span_basis leaves only nonzero rows followed by nothing
    size_t nz = 0;
    for (const auto& row : next) {
      bool zero = true;
      for (const auto& x : row)
        if (x != 0) { zero = false; break; }
      if (!zero) ++nz;
    }
    next.resize(nz);
    if (next.empty()) break;
    if (next.size() >= current.size())
      throw NotNilpotent("lower central series stalls at dimension " +
                         std::to_string(next.size()));
    g.lcs_.push_back(next);
    current = std::move(next);
    if (static_cast<int>(g.lcs_.size()) > dim)
      throw NotNilpotent("lower central series does not reach zero");
  }
  g.step_ = static_cast<int>(g.lcs_.size());
  if (declared_step && *declared_step != g.step_)
    throw ConfigError("declared step " + std::to_string(*declared_step) +
                      " but computed step " + std::to_string(g.step_));

  // Malcev ordering: every gamma_m must be a tail span of the basis.
  for (size_t m = 1; m < g.lcs_.size(); ++m) {
    const auto& basis = g.lcs_[m];
    const int dm = static_cast<int>(basis.size());
    const int j0 = dim - dm;  // expected first tail index
    for (int r = 0; r < dm; ++r)
      for (int col = 0; col < j0; ++col)
        if (basis[r][col] != 0)
          throw BasisNotMalcevOrdered(
              "gamma_" + std::to_string(m + 1) +
              " is not spanned by the tail basis segment (offending column " +
              std::to_string(col + 1) + ")");
  }
  g.abelian_dim_ = g.lcs_.size() > 1 ? dim - static_cast<int>(g.lcs_[1].size())
                                     : dim;

  g.tensor_d_.resize(g.tensor_.size());
  for (size_t i = 0; i < g.tensor_.size(); ++i)
    g.tensor_d_[i] = to_double(g.tensor_[i]);
  g.sparse_.assign(static_cast<size_t>(dim) * dim, {});
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j)
      for (int k = 0; k < dim; ++k)
        if (c(i, j, k) != 0)
          g.sparse_[static_cast<size_t>(i) * dim + j].push_back(
              {k, c(i, j, k), to_double(c(i, j, k))});

  g.build_bch_table();
  return g;
}

// Dynkin's commutator form of log(exp X exp Y), truncated at the nilpotency
// step. Terms are enumerated as compositions ((r_1,s_1),...,(r_n,s_n)) with
// coefficient (-1)^(n-1) / (n * m * prod r_i! s_i!), m = total weight, and
// the bracket word X^{r_1} Y^{s_1} ... evaluated right-nested. Identical
// words are collapsed; words ending in a repeated letter vanish identically.
void NilpotentAlgebra::build_bch_table() {
  const int maxw = step_;
  std::map<std::vector<std::uint8_t>, Rat> collapsed;

  std::vector<Rat> factorial(maxw + 1);
  factorial[0] = 1;
  for (int i = 1; i <= maxw; ++i) factorial[i] = factorial[i - 1] * i;

  struct Frame {
    std::vector<std::uint8_t> word;
    Rat fact_prod;  // prod r_i! s_i!
    int n;
    int weight;
  };
  // iterative DFS over compositions
  std::vector<Frame> stack;
  stack.push_back({{}, Rat(1), 0, 0});
  while (!stack.empty()) {
    Frame f = stack.back();
    stack.pop_back();
    if (f.n >= 1) {
      const int m = f.weight;
      Rat coef = Rat((f.n % 2 == 1) ? 1 : -1) /
                 (Rat(f.n) * Rat(m) * f.fact_prod);
      collapsed[f.word] += coef;
    }
    // extend with one more pair (r, s), r+s >= 1
    for (int r = 0; r + f.weight <= maxw; ++r)
      for (int s = (r == 0 ? 1 : 0); r + s + f.weight <= maxw; ++s) {
        Frame nf = f;
        nf.word.insert(nf.word.end(), r, std::uint8_t{0});
        nf.word.insert(nf.word.end(), s, std::uint8_t{1});
        nf.fact_prod *= factorial[r] * factorial[s];
        nf.n += 1;
        nf.weight += r + s;
        stack.push_back(std::move(nf));
      }
  }

  for (auto& [word, coef] : collapsed) {
    if (coef == 0) continue;
    if (word.size() < 2) continue;  // weight-1 part handled as x + y
    const size_t m = word.size();
    if (word[m - 1] == word[m - 2]) continue;  // ad(v)(v) = 0
    BchTerm t;
    t.word = word;
    t.coef = coef;
    t.coef_d = to_double(coef);
    bch_terms_.push_back(std::move(t));
  }
}

template <class S>
std::vector<S> NilpotentAlgebra::bracket_impl(const std::vector<S>& x,
                                              const std::vector<S>& y) const {
  if (static_cast<int>(x.size()) != dim_ || static_cast<int>(y.size()) != dim_)
    throw DimensionMismatch("bracket: vector length != dim");
  std::vector<S> r(dim_, S(0));
  for (int i = 0; i < dim_; ++i) {
    if (x[i] == S(0)) continue;
    for (int j = 0; j < dim_; ++j) {
      if (y[j] == S(0)) continue;
      const auto& entries = sparse_[static_cast<size_t>(i) * dim_ + j];
      for (const auto& e : entries) {
        if constexpr (std::is_same_v<S, Rat>)
          r[e.k] += x[i] * y[j] * e.q;
        else
          r[e.k] += x[i] * y[j] * e.d;
      }
    }
  }
  return r;
}

template <class S>
std::vector<S> NilpotentAlgebra::bch_impl(const std::vector<S>& x,
                                          const std::vector<S>& y) const {
  if (static_cast<int>(x.size()) != dim_ || static_cast<int>(y.size()) != dim_)
    throw DimensionMismatch("bch: vector length != dim");
  std::vector<S> r(dim_);
  for (int i = 0; i < dim_; ++i) r[i] = x[i] + y[i];
  if (step_ == 1) return r;

  for (const auto& term : bch_terms_) {
    const size_t m = term.word.size();
    std::vector<S> v = term.word[m - 1] ? y : x;
    bool zero = false;
    for (size_t p = m - 1; p-- > 0;) {
      v = bracket_impl<S>(term.word[p] ? y : x, v);
      zero = true;
      for (const auto& c : v)
        if (c != S(0)) { zero = false; break; }
      if (zero) break;
    }
    if (zero) continue;
    if constexpr (std::is_same_v<S, Rat>) {
      for (int i = 0; i < dim_; ++i)
        if (v[i] != 0) r[i] += term.coef * v[i];
    } else {
      for (int i = 0; i < dim_; ++i) r[i] += term.coef_d * v[i];
    }
  }
  return r;
}

RatVec NilpotentAlgebra::bracket(const RatVec& x, const RatVec& y) const {
  return bracket_impl<Rat>(x, y);
}
VecD NilpotentAlgebra::bracket(const VecD& x, const VecD& y) const {
  return bracket_impl<double>(x, y);
}
RatVec NilpotentAlgebra::bch(const RatVec& x, const RatVec& y) const {
  return bch_impl<Rat>(x, y);
}
VecD NilpotentAlgebra::bch(const VecD& x, const VecD& y) const {
  return bch_impl<double>(x, y);
}

RatVec NilpotentAlgebra::second_from_first(const RatVec& x) const {
  RatVec t(dim_);
  RatVec rem = x;
  for (int i = 0; i < dim_; ++i) {
    t[i] = rem[i];
    if (i + 1 == dim_) break;
    RatVec step(dim_);
    step[i] = -t[i];
    rem = bch(step, rem);
  }
  return t;
}

VecD NilpotentAlgebra::second_from_first(const VecD& x) const {
  VecD t(dim_);
  VecD rem = x;
  for (int i = 0; i < dim_; ++i) {
    t[i] = rem[i];
    if (i + 1 == dim_) break;
    VecD step(dim_, 0.0);
    step[i] = -t[i];
    rem = bch(step, rem);
  }
  return t;
}

RatVec NilpotentAlgebra::first_from_second(const RatVec& t) const {
  RatVec v(dim_);
  for (int i = 0; i < dim_; ++i) {
    if (t[i] == 0) continue;
    RatVec step(dim_);
    step[i] = t[i];
    v = bch(v, step);
  }
  return v;
}

VecD NilpotentAlgebra::first_from_second(const VecD& t) const {
  VecD v(dim_, 0.0);
  for (int i = 0; i < dim_; ++i) {
    if (t[i] == 0.0) continue;
    VecD step(dim_, 0.0);
    step[i] = t[i];
    v = bch(v, step);
  }
  return v;
}

RatVec NilpotentAlgebra::basis_vector(int i) const {
  RatVec e(dim_);
  e.at(i) = 1;
  return e;
}

}  // namespace nilmix
