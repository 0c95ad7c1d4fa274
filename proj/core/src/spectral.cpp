#include "nilmix/spectral.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <limits>
#include <numeric>
#include <thread>

#include "nilmix/rng.hpp"

namespace nilmix {

namespace {

Eigen::MatrixXd to_eigen(const RatMat& m) {
  Eigen::MatrixXd e(m.rows, m.cols);
  for (int i = 0; i < m.rows; ++i)
    for (int j = 0; j < m.cols; ++j) e(i, j) = to_double(m.at(i, j));
  return e;
}

// Solve B X = C exactly (consistent system, B full column rank).
RatMat rat_solve_columns(const RatMat& b, const RatMat& c) {
  const int d = b.rows, k = b.cols, k2 = c.cols;
  std::vector<RatVec> aug(d, RatVec(k + k2));
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < k; ++j) aug[i][j] = b.at(i, j);
    for (int j = 0; j < k2; ++j) aug[i][k + j] = c.at(i, j);
  }
  auto pivots = rat_rref(aug);
  RatMat x(k, k2);
  for (size_t r = 0; r < pivots.size(); ++r) {
    if (pivots[r] >= k)
      throw Error("rat_solve_columns: inconsistent system");
    for (int j = 0; j < k2; ++j) x.at(pivots[r], j) = aug[r][k + j];
  }
  if (static_cast<int>(pivots.size()) != k)
    throw Error("rat_solve_columns: rank-deficient basis");
  return x;
}

int euler_phi(int n) {
  int result = n;
  for (int p = 2; p * p <= n; ++p) {
    if (n % p == 0) {
      while (n % p == 0) n /= p;
      result -= result / p;
    }
  }
  if (n > 1) result -= result / n;
  return result;
}

}  // namespace

Automorphism::Automorphism(Nilmanifold m, RatMat d, RatMat dinv, RatMat ab)
    : manifold_(std::move(m)),
      d_alpha_(std::move(d)),
      d_alpha_inv_(std::move(dinv)),
      abelian_(std::move(ab)) {
  d_alpha_d_.resize(static_cast<size_t>(d_alpha_.rows) * d_alpha_.cols);
  for (int i = 0; i < d_alpha_.rows; ++i)
    for (int j = 0; j < d_alpha_.cols; ++j)
      d_alpha_d_[static_cast<size_t>(i) * d_alpha_.cols + j] =
          to_double(d_alpha_.at(i, j));
}

Automorphism Automorphism::validate(const Nilmanifold& m, const RatMat& d) {
  const auto& g = m.algebra();
  const int n = g.dim();
  if (d.rows != n || d.cols != n)
    throw DimensionMismatch("automorphism matrix must be " +
                            std::to_string(n) + "x" + std::to_string(n));

  const Rat det = rat_det(d);
  if (det != 1 && det != -1)
    throw NotUnimodular("|det| = " + to_string(det < 0 ? -det : det) +
                        ", expected 1");

  // columns as vectors
  auto column = [&](const RatMat& mat, int j) {
    RatVec v(n);
    for (int i = 0; i < n; ++i) v[i] = mat.at(i, j);
    return v;
  };

  // bracket preservation, exact on all basis pairs
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      RatVec eij(n);
      for (int k = 0; k < n; ++k) eij[k] = g.c(i, j, k);
      const RatVec lhs = d.apply(eij);
      const RatVec rhs = g.bracket(column(d, i), column(d, j));
      for (int k = 0; k < n; ++k)
        if (lhs[k] != rhs[k])
          throw BracketNotPreserved(
              "D[e_" + std::to_string(i + 1) + ", e_" + std::to_string(j + 1) +
              "] != [D e_" + std::to_string(i + 1) + ", D e_" +
              std::to_string(j + 1) + "]");
    }

  const RatMat dinv = rat_inverse(d);

  // lattice preservation: alpha(exp e_i) and alpha^{-1}(exp e_i) must have
  // integer second-kind coordinates
  for (const RatMat* mat : {&d, &dinv}) {
    for (int j = 0; j < n; ++j) {
      const RatVec t = g.second_from_first(column(*mat, j));
      for (int i = 0; i < n; ++i)
        if (!is_integer(t[i]))
          throw LatticeNotPreserved(
              std::string(mat == &d ? "alpha" : "alpha^-1") + "(exp e_" +
              std::to_string(j + 1) + ") has non-integer coordinate t_" +
              std::to_string(i + 1) + " = " + to_string(t[i]));
    }
  }

  // abelianization block; integrality is implied by lattice preservation
  const int l = g.abelianization_dim();
  RatMat ab(l, l);
  for (int i = 0; i < l; ++i)
    for (int j = 0; j < l; ++j) {
      ab.at(i, j) = d.at(i, j);
      if (!is_integer(ab.at(i, j)))
        throw Error("internal: abelianization block not integer");
    }

  return Automorphism(m, d, std::move(dinv), std::move(ab));
}

ErgodicityCertificate Automorphism::is_ergodic() const {
  ErgodicityCertificate cert;
  cert.abelian_char_poly = char_poly(abelian_);
  const int l = abelian_.rows;
  cert.ergodic = true;
  // phi(k) <= l forces k <= 2 l^2 + 2 (phi(k) >= sqrt(k/2))
  for (int k = 1; k <= 2 * l * l + 2; ++k) {
    if (euler_phi(k) > l) continue;
    cert.orders_checked.push_back(k);
    if (poly_divides(cyclotomic(k), cert.abelian_char_poly)) {
      cert.ergodic = false;
      cert.witness_order = k;
      break;
    }
  }
  return cert;
}

// --- jordan_split -----------------------------------------------------------

namespace {

template <class MatT>
int nullity(const MatT& m, double tol) {
  Eigen::JacobiSVD<MatT> svd(m);
  const auto& sv = svd.singularValues();
  const double thresh = tol * std::max(1.0, sv.size() ? sv(0) : 0.0);
  int n = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv(i) <= thresh) ++n;
  return n;
}

template <class MatT>
MatT null_space(const MatT& m, double tol) {
  Eigen::JacobiSVD<MatT> svd(m, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const double thresh = tol * std::max(1.0, sv.size() ? sv(0) : 0.0);
  int rank = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv(i) > thresh) ++rank;
  return svd.matrixV().rightCols(m.cols() - rank);
}

// Jordan chains for one eigenvalue given N = R - lambda I; each chain is
// v_1 (top) .. v_s with v_{i+1} = N v_i and N v_s ~ 0. Works for real and
// complex scalars; for a real matrix and real lambda the real instantiation
// keeps the chain vectors real (a complex SVD kernel basis would not).
template <class MatT>
std::vector<std::vector<Eigen::Matrix<typename MatT::Scalar, Eigen::Dynamic, 1>>>
eigen_chains(const MatT& nmat, int alg_mult, double tol) {
  using VecT = Eigen::Matrix<typename MatT::Scalar, Eigen::Dynamic, 1>;
  const int n = static_cast<int>(nmat.rows());

  std::vector<MatT> powers{MatT::Identity(n, n)};
  std::vector<int> nulls{0};
  int s = 0;
  for (int j = 1; j <= n; ++j) {
    powers.push_back(powers.back() * nmat);
    nulls.push_back(nullity(powers.back(), tol));
    if (nulls.back() >= alg_mult) { s = j; break; }
  }
  if (s == 0)
    throw IllConditioned("jordan chains: nullity never reaches multiplicity");

  // chains of length exactly len: (nulls[len]-nulls[len-1]) - (nulls[len+1]-nulls[len])
  std::vector<int> c(s + 2, 0);
  for (int j = 1; j <= s; ++j) c[j] = nulls[j] - nulls[j - 1];

  std::vector<std::vector<VecT>> chains;
  MatT bottoms(n, 0);  // eigenvectors of selected chains
  for (int len = s; len >= 1; --len) {
    const int want = c[len] - (len + 1 <= s ? c[len + 1] : 0);
    if (want <= 0) continue;
    const MatT kernel = null_space(powers[len], tol);
    int got = 0;
    for (int cand = 0; cand < kernel.cols() && got < want; ++cand) {
      VecT top = kernel.col(cand);
      VecT bottom = powers[len - 1] * top;
      if (bottom.norm() < tol) continue;  // lives in a shorter chain
      // accept iff the bottom eigenvector is independent of those taken
      MatT trial(n, bottoms.cols() + 1);
      if (bottoms.cols() > 0) trial.leftCols(bottoms.cols()) = bottoms;
      trial.col(bottoms.cols()) = bottom;
      Eigen::JacobiSVD<MatT> svd(trial);
      const auto& sv = svd.singularValues();
      if (sv(sv.size() - 1) < 1e-9 * sv(0)) continue;
      bottoms = trial;
      std::vector<VecT> chain;
      VecT v = top / top.norm();
      for (int i = 0; i < len; ++i) {
        chain.push_back(v);
        if (i + 1 < len) v = nmat * v;
      }
      chains.push_back(std::move(chain));
      ++got;
    }
    if (got != want)
      throw IllConditioned("jordan chains: could not complete chain set");
  }
  return chains;
}

}  // namespace

JordanSplit jordan_split(const Automorphism& a, double tol) {
  const int d = a.dim();
  const auto comps = primary_decomposition(a.matrix());

  struct Pending {
    JordanBlock block;
    int input_order;
  };
  std::vector<Pending> pending;
  int order_counter = 0;

  for (const auto& comp : comps) {
    const int k = static_cast<int>(comp.basis.size());
    RatMat b(d, k);
    for (int j = 0; j < k; ++j)
      for (int i = 0; i < d; ++i) b.at(i, j) = comp.basis[j][i];
    const RatMat restricted = rat_solve_columns(b, a.matrix() * b);
    const Eigen::MatrixXd bd = to_eigen(b);
    const Eigen::MatrixXd rd = to_eigen(restricted);

    // roots of the (squarefree) irreducible factor via its companion matrix
    const int dq = poly_deg(comp.factor);
    Eigen::VectorXcd roots(dq);
    if (dq == 1) {
      roots(0) = std::complex<double>(-to_double(comp.factor[0]), 0.0);
    } else {
      Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(dq, dq);
      for (int i = 1; i < dq; ++i) companion(i, i - 1) = 1.0;
      for (int i = 0; i < dq; ++i)
        companion(i, dq - 1) = -to_double(comp.factor[i]);
      Eigen::EigenSolver<Eigen::MatrixXd> es(companion);
      roots = es.eigenvalues();
    }
    std::sort(roots.data(), roots.data() + roots.size(),
              [](const std::complex<double>& x, const std::complex<double>& y) {
                if (x.real() != y.real()) return x.real() < y.real();
                return x.imag() < y.imag();
              });

    for (int ri = 0; ri < roots.size(); ++ri) {
      const std::complex<double> lambda = roots(ri);
      if (lambda.imag() < -1e-12) continue;  // conjugate handled with im >= 0
      const bool is_real = std::abs(lambda.imag()) <= 1e-10;

      if (is_real) {
        const Eigen::MatrixXd nmat =
            rd - lambda.real() * Eigen::MatrixXd::Identity(k, k);
        auto chains = eigen_chains(nmat, comp.multiplicity, tol);
        for (auto& ch : chains) {
          JordanBlock blk;
          blk.re = lambda.real();
          blk.im = 0.0;
          blk.complex_pair = false;
          blk.modulus = std::abs(lambda.real());
          blk.chain_length = static_cast<int>(ch.size());
          for (const auto& v : ch) {
            Eigen::VectorXd amb = bd * v;
            blk.vectors.push_back(VecD(amb.data(), amb.data() + amb.size()));
          }
          pending.push_back({std::move(blk), order_counter++});
        }
      } else {
        const Eigen::MatrixXcd nmat =
            rd.cast<std::complex<double>>() -
            lambda * Eigen::MatrixXcd::Identity(k, k);
        auto chains = eigen_chains(nmat, comp.multiplicity, tol);
        for (auto& ch : chains) {
          JordanBlock blk;
          blk.re = lambda.real();
          blk.im = lambda.imag();
          blk.complex_pair = true;
          blk.modulus = std::abs(lambda);
          blk.chain_length = static_cast<int>(ch.size());
          for (const auto& v : ch) {
            Eigen::VectorXcd amb = bd.cast<std::complex<double>>() * v;
            Eigen::VectorXd wre = amb.real();
            Eigen::VectorXd wim = (-amb.imag()).eval();
            blk.vectors.push_back(VecD(wre.data(), wre.data() + wre.size()));
            blk.vectors.push_back(VecD(wim.data(), wim.data() + wim.size()));
          }
          pending.push_back({std::move(blk), order_counter++});
        }
      }
    }
  }

  std::stable_sort(pending.begin(), pending.end(),
                   [](const Pending& x, const Pending& y) {
                     if (std::abs(x.block.modulus - y.block.modulus) > 1e-12)
                       return x.block.modulus < y.block.modulus;
                     const double ax = std::atan2(std::abs(x.block.im), x.block.re);
                     const double ay = std::atan2(std::abs(y.block.im), y.block.re);
                     if (std::abs(ax - ay) > 1e-12) return ax < ay;
                     return x.input_order < y.input_order;
                   });

  JordanSplit split;
  int total_dims = 0;
  for (auto& p : pending) {
    total_dims += static_cast<int>(p.block.vectors.size());
    split.blocks.push_back(std::move(p.block));
  }
  if (total_dims != d)
    throw IllConditioned("jordan split: chain vectors do not fill the space");

  // global conditioning check on the assembled basis
  Eigen::MatrixXd basis(d, d);
  int col = 0;
  for (const auto& blk : split.blocks)
    for (const auto& v : blk.vectors)
      basis.col(col++) = Eigen::Map<const Eigen::VectorXd>(v.data(), d);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(basis);
  if (svd.singularValues()(d - 1) < tol * svd.singularValues()(0))
    throw IllConditioned("jordan split: basis condition below tolerance");

  const double band = 1e-9;
  for (size_t bi = 0; bi < split.blocks.size(); ++bi) {
    const auto& blk = split.blocks[bi];
    auto push_all = [&](std::vector<VecD>& dst) {
      for (const auto& v : blk.vectors) dst.push_back(v);
    };
    if (blk.modulus > 1.0 + band) {
      split.unstable_blocks.push_back(static_cast<int>(bi));
      push_all(split.unstable);
    } else if (blk.modulus < 1.0 - band) {
      split.stable_blocks.push_back(static_cast<int>(bi));
      push_all(split.stable);
    } else {
      split.central_blocks.push_back(static_cast<int>(bi));
      push_all(split.central);
    }
  }
  return split;
}

// --- rational hull ------------------------------------------------------

std::vector<RatVec> rational_hull(const Automorphism& a,
                                  const std::vector<VecD>& w, double tol) {
  const int d = a.dim();
  if (w.empty()) return {};
  for (const auto& v : w)
    if (static_cast<int>(v.size()) != d)
      throw DimensionMismatch("rational_hull: vector length != dim");

  const auto comps = primary_decomposition(a.matrix());

  // ambient basis from all components; solve for coordinates of each w
  Eigen::MatrixXd p(d, d);
  std::vector<std::pair<int, int>> col_ranges;  // [begin, end) per component
  int col = 0;
  for (const auto& comp : comps) {
    const int begin = col;
    for (const auto& bv : comp.basis) {
      for (int i = 0; i < d; ++i) p(i, col) = to_double(bv[i]);
      ++col;
    }
    col_ranges.push_back({begin, col});
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(p);
  std::vector<bool> include(comps.size(), false);
  for (const auto& wv : w) {
    Eigen::VectorXd rhs = Eigen::Map<const Eigen::VectorXd>(wv.data(), d);
    const double scale = std::max(1.0, rhs.norm());
    Eigen::VectorXd coords = qr.solve(rhs);
    for (size_t ci = 0; ci < comps.size(); ++ci) {
      for (int j = col_ranges[ci].first; j < col_ranges[ci].second; ++j)
        if (std::abs(coords(j)) > tol * scale) include[ci] = true;
    }
  }

  std::vector<RatVec> m0;
  for (size_t ci = 0; ci < comps.size(); ++ci)
    if (include[ci])
      for (const auto& bv : comps[ci].basis) m0.push_back(bv);

  // saturate under bracketing with the whole algebra (ideal closure);
  // D-invariance is inherited: components are invariant and D preserves
  // brackets.
  const auto& g = a.algebra();
  std::vector<RatVec> basis = span_basis(std::move(m0));
  while (true) {
    std::vector<RatVec> next = basis;
    for (int i = 0; i < d; ++i) {
      RatVec ei(d);
      ei[i] = 1;
      for (const auto& b : basis) next.push_back(g.bracket(ei, b));
    }
    next = span_basis(std::move(next));
    size_t nz = 0;
    for (const auto& row : next) {
      bool zero = true;
      for (const auto& x : row)
        if (x != 0) { zero = false; break; }
      if (!zero) ++nz;
    }
    next.resize(nz);
    if (next.size() == basis.size()) break;
    basis = std::move(next);
  }
  return basis;
}

// --- diophantine -------------------------------------------------------

namespace {

// enumerate integer z with first nonzero coordinate positive,
// 0 < ||z||_inf <= zmax, leading index fixed; returns (min value^2 stand-in).
struct BoxScan {
  double best = std::numeric_limits<double>::infinity();
  std::vector<long long> argmin;
  double pairing = 0.0;
};

void scan_slice(const VecD& w, double c2, long long zmax, int lead,
                long long lo, long long hi, BoxScan& out) {
  const int l = static_cast<int>(w.size());
  std::vector<long long> z(l, 0);
  const bool fast_c2_1 = (c2 == 1.0);

  // odometer over trailing coordinates; z[lead] in [lo, hi], earlier zero
  for (long long zl = lo; zl <= hi; ++zl) {
    z[lead] = zl;
    for (int i = lead + 1; i < l; ++i) z[i] = -zmax;
    while (true) {
      double dot = 0.0, nn = 0.0;
      for (int i = lead; i < l; ++i) {
        dot += static_cast<double>(z[i]) * w[i];
        nn += static_cast<double>(z[i]) * static_cast<double>(z[i]);
      }
      double value;
      if (fast_c2_1) {
        value = dot * dot * nn;  // compare squares, sqrt at the end
      } else {
        value = std::abs(dot) * std::pow(nn, 0.5 * c2);
      }
      if (value < out.best ||
          (value == out.best &&
           std::lexicographical_compare(z.begin(), z.end(),
                                        out.argmin.begin(), out.argmin.end()))) {
        out.best = value;
        out.argmin = z;
        out.pairing = std::abs(dot);
      }
      int i = l - 1;
      for (; i > lead; --i) {
        if (++z[i] <= zmax) break;
        z[i] = -zmax;
      }
      if (i == lead) break;
    }
  }
}

}  // namespace

DiophantineReport diophantine_constant(const VecD& w, double c2,
                                       long long zmax, int workers) {
  const int l = static_cast<int>(w.size());
  if (l < 1) throw DimensionMismatch("diophantine_constant: empty direction");
  double nw = 0.0;
  for (double x : w) nw += x * x;
  if (!(nw > 0.0)) throw ZeroDirection("diophantine_constant: zero direction");
  if (zmax < 1) throw ConfigError("diophantine_constant: zmax must be >= 1");
  if (workers < 1) workers = 1;

  // slices: leading index j, z_j in 1..zmax, trailing coords full range
  struct Slice {
    int lead;
    long long lo, hi;
  };
  std::vector<Slice> slices;
  for (int j = 0; j < l; ++j) {
    const long long chunk =
        std::max<long long>(1, zmax / std::max(1, workers));
    for (long long lo = 1; lo <= zmax; lo += chunk)
      slices.push_back({j, lo, std::min(zmax, lo + chunk - 1)});
  }

  std::vector<BoxScan> partial(slices.size());
  std::atomic<size_t> cursor{0};
  auto run = [&]() {
    while (true) {
      const size_t i = cursor.fetch_add(1);
      if (i >= slices.size()) break;
      scan_slice(w, c2, zmax, slices[i].lead, slices[i].lo, slices[i].hi,
                 partial[i]);
    }
  };
  if (workers == 1) {
    run();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < workers; ++t) pool.emplace_back(run);
    for (auto& t : pool) t.join();
  }

  BoxScan total;
  for (const auto& p : partial) {  // deterministic merge order
    if (p.argmin.empty()) continue;
    if (p.best < total.best ||
        (p.best == total.best && !total.argmin.empty() &&
         std::lexicographical_compare(p.argmin.begin(), p.argmin.end(),
                                      total.argmin.begin(),
                                      total.argmin.end())) ||
        total.argmin.empty()) {
      total = p;
    }
  }

  DiophantineReport rep;
  rep.direction = w;
  rep.c2 = c2;
  rep.zmax = zmax;
  rep.witness_z = total.argmin;
  rep.witness_pairing = total.pairing;
  rep.c1_hat = (c2 == 1.0) ? std::sqrt(total.best) : total.best;
  if (rep.c1_hat < 1e-12) rep.flags.push_back("DiophantineFailure");
  return rep;
}

DiophantineReport generic_direction(const std::vector<VecD>& v_basis,
                                    int trials, double c2, long long zmax,
                                    std::uint64_t seed, int workers) {
  if (v_basis.empty())
    throw ZeroDirection("generic_direction: empty basis");
  const int l = static_cast<int>(v_basis[0].size());
  for (const auto& v : v_basis)
    if (static_cast<int>(v.size()) != l)
      throw DimensionMismatch("generic_direction: mixed vector lengths");
  double total_norm = 0.0;
  for (const auto& v : v_basis) total_norm += norm2(v);
  if (!(total_norm > 0.0))
    throw ZeroDirection("generic_direction: zero span");

  // rational-subspace pre-check: bounded search for an integer annihilator
  long long zr = 50;
  for (int i = 2; i < l; ++i) zr = std::max<long long>(4, zr / 3);
  {
    std::vector<long long> z(l, -zr);
    while (true) {
      bool nonzero = false;
      for (long long c : z)
        if (c != 0) { nonzero = true; break; }
      if (nonzero) {
        double zn = 0.0;
        for (long long c : z) zn += static_cast<double>(c) * c;
        zn = std::sqrt(zn);
        bool annihilates = true;
        for (const auto& v : v_basis) {
          double dot = 0.0;
          for (int i = 0; i < l; ++i) dot += z[i] * v[i];
          if (std::abs(dot) > 1e-10 * zn * std::max(1.0, norm2(v))) {
            annihilates = false;
            break;
          }
        }
        if (annihilates) {
          std::string zs = "(";
          for (int i = 0; i < l; ++i)
            zs += std::to_string(z[i]) + (i + 1 < l ? "," : ")");
          throw SubspaceRational(
              "span is annihilated by integer vector " + zs);
        }
      }
      int i = l - 1;
      for (; i >= 0; --i) {
        if (++z[i] <= zr) break;
        z[i] = -zr;
      }
      if (i < 0) break;
    }
  }

  RngStream rng(seed, stream_id(0xD10, 1));
  DiophantineReport best;
  best.c1_hat = -1.0;
  for (int t = 0; t < trials; ++t) {
    VecD cand(l, 0.0);
    if (t < static_cast<int>(v_basis.size())) {
      cand = v_basis[t];
    } else {
      for (const auto& v : v_basis) {
        const double gcoef = rng.normal();
        for (int i = 0; i < l; ++i) cand[i] += gcoef * v[i];
      }
    }
    const double cn = norm2(cand);
    if (!(cn > 0.0)) continue;
    for (auto& x : cand) x /= cn;  // unit sphere of V
    DiophantineReport rep = diophantine_constant(cand, c2, zmax, workers);
    if (rep.c1_hat > best.c1_hat) best = std::move(rep);
  }
  if (best.c1_hat < 0.0)
    throw ZeroDirection("generic_direction: no usable candidate");
  return best;
}

}  // namespace nilmix
