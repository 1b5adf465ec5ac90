#pragma once

// Multivariate orthonormal polynomial chaos bases (probabilists' Hermite for
// Gaussian inputs, normalized Legendre for uniform inputs) in graded
// lexicographic order, plus the triple-product coupling tensor
// h_{l,kj} = E[psi_l psi_k psi_j].

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "sgeig/linalg.hpp"
#include "sgeig/quadrature.hpp"

namespace sgeig {

struct MultiIndex {
  std::vector<int> degrees;

  int total() const {
    int s = 0;
    for (int d : degrees) s += d;
    return s;
  }
  bool operator==(const MultiIndex&) const = default;
};

namespace detail {

inline void enumerate_degree(int m, int total, std::vector<int>& cur,
                             std::vector<MultiIndex>& out) {
  if (int(cur.size()) == m - 1) {
    cur.push_back(total);
    out.push_back({cur});
    cur.pop_back();
    return;
  }
  for (int first = total; first >= 0; --first) {
    cur.push_back(first);
    enumerate_degree(m, total - first, cur, out);
    cur.pop_back();
  }
}

}  // namespace detail

// Graded order: ascending total degree; within a degree, lexicographic with
// the first variable's power decreasing (so (2,0,0) precedes (1,1,0)). The
// zero index comes first, and degree blocks are contiguous.
inline std::vector<MultiIndex> multi_indices(int m_xi, int p) {
  if (m_xi < 1 || p < 0) throw std::invalid_argument("multi_indices: bad arguments");
  std::vector<MultiIndex> out;
  std::vector<int> cur;
  for (int d = 0; d <= p; ++d) detail::enumerate_degree(m_xi, d, cur, out);
  return out;
}

// Values of the orthonormal 1D polynomials at x, degrees 0..p.
// Hermite (probabilists', standard Gaussian weight):
//   p_{n+1} = (x p_n - sqrt(n) p_{n-1}) / sqrt(n+1)
// Legendre (uniform(-1,1) weight), via its Jacobi recurrence coefficients
//   b_n = n / sqrt(4n^2 - 1):  p_{n+1} = (x p_n - b_n p_{n-1}) / b_{n+1}
inline void orthonormal_1d(Family family, int p, double x, double* out) {
  out[0] = 1.0;
  if (p == 0) return;
  out[1] = family == Family::hermite ? x : std::sqrt(3.0) * x;
  for (int n = 1; n < p; ++n) {
    if (family == Family::hermite) {
      out[n + 1] = (x * out[n] - std::sqrt(double(n)) * out[n - 1]) / std::sqrt(double(n + 1));
    } else {
      const double bn = n / std::sqrt(4.0 * n * n - 1.0);
      const double bn1 = (n + 1) / std::sqrt(4.0 * (n + 1.0) * (n + 1.0) - 1.0);
      out[n + 1] = (x * out[n] - bn * out[n - 1]) / bn1;
    }
  }
}

class GpcBasis {
 public:
  GpcBasis() = default;
  GpcBasis(Family family, int m_xi, int degree)
      : family_(family), m_xi_(m_xi), degree_(degree), indices_(multi_indices(m_xi, degree)) {
    degree_offsets_.assign(degree + 2, 0);
    for (const MultiIndex& mi : indices_) ++degree_offsets_[mi.total() + 1];
    for (int d = 0; d <= degree; ++d) degree_offsets_[d + 1] += degree_offsets_[d];
  }

  Family family() const { return family_; }
  int m_xi() const { return m_xi_; }
  int degree() const { return degree_; }
  int size() const { return int(indices_.size()); }
  const std::vector<MultiIndex>& indices() const { return indices_; }

  // Degree block d occupies [degree_begin(d), degree_end(d)).
  int degree_begin(int d) const { return degree_offsets_[d]; }
  int degree_end(int d) const { return degree_offsets_[d + 1]; }

  void eval(const double* xi, double* out) const {
    const int p = degree_;
    std::vector<double> table(std::size_t(m_xi_) * (p + 1));
    for (int v = 0; v < m_xi_; ++v)
      orthonormal_1d(family_, p, xi[v], table.data() + std::size_t(v) * (p + 1));
    for (int k = 0; k < size(); ++k) {
      double prod = 1.0;
      for (int v = 0; v < m_xi_; ++v)
        prod *= table[std::size_t(v) * (p + 1) + indices_[k].degrees[v]];
      out[k] = prod;
    }
  }

  Vec eval(const Vec& xi) const {
    if (int(xi.size()) != m_xi_) throw std::invalid_argument("eval_basis: dimension mismatch");
    Vec out(size());
    eval(xi.data(), out.data());
    return out;
  }

 private:
  Family family_ = Family::hermite;
  int m_xi_ = 0;
  int degree_ = 0;
  std::vector<MultiIndex> indices_;
  std::vector<int> degree_offsets_;
};

struct TripleEntry {
  int k, j;
  double value;
};

// h_{l,kj} for l over the coefficient basis (degree 2p) and k,j over the
// solution basis (degree p). Slices store every nonzero (k,j) pair.
struct TripleProductTensor {
  int n_a = 0;
  int n_xi = 0;
  std::vector<std::vector<TripleEntry>> slices;

  std::size_t nonzero_count() const {
    std::size_t n = 0;
    for (const auto& s : slices) n += s.size();
    return n;
  }
};

// Exact tensorized Gauss quadrature: the integrand degree is at most
// basis_a.degree + 2 * basis_sol.degree, and n nodes integrate degree 2n-1
// exactly.
inline TripleProductTensor triple_product_tensor(const GpcBasis& basis_a,
                                                 const GpcBasis& basis_sol,
                                                 double drop_tol = 1e-12) {
  if (basis_a.family() != basis_sol.family() || basis_a.m_xi() != basis_sol.m_xi())
    throw std::invalid_argument("triple_product_tensor: basis mismatch");
  const int m = basis_a.m_xi();
  const int pa = basis_a.degree();
  const int ps = basis_sol.degree();
  const int n1d = (pa + 2 * ps) / 2 + 2;
  const Rule1D rule = gauss_rule(basis_a.family(), n1d);

  // 1D values for every (variable point, degree).
  const int pmax = std::max(pa, ps);
  std::vector<double> va(std::size_t(n1d) * (pmax + 1));
  for (int q = 0; q < n1d; ++q)
    orthonormal_1d(basis_a.family(), pmax, rule.nodes[q],
                   va.data() + std::size_t(q) * (pmax + 1));
  auto val1d = [&](int q, int deg) { return va[std::size_t(q) * (pmax + 1) + deg]; };

  // 1D triple integrals e[i][j][k] = E[p_i p_j p_k], i <= pa, j,k <= ps.
  std::vector<double> e(std::size_t(pa + 1) * (ps + 1) * (ps + 1), 0.0);
  auto eref = [&](int i, int j, int k) -> double& {
    return e[(std::size_t(i) * (ps + 1) + j) * (ps + 1) + k];
  };
  for (int i = 0; i <= pa; ++i)
    for (int j = 0; j <= ps; ++j)
      for (int k = 0; k <= ps; ++k) {
        double s = 0.0;
        for (int q = 0; q < n1d; ++q)
          s += val1d(q, i) * val1d(q, j) * val1d(q, k) * rule.weights[q];
        eref(i, j, k) = s;
      }

  TripleProductTensor t;
  t.n_a = basis_a.size();
  t.n_xi = basis_sol.size();
  t.slices.resize(t.n_a);
  const auto& ia = basis_a.indices();
  const auto& is = basis_sol.indices();
  for (int l = 0; l < t.n_a; ++l) {
    const int dl = ia[l].total();
    for (int k = 0; k < t.n_xi; ++k) {
      const int dk = is[k].total();
      for (int j = k; j < t.n_xi; ++j) {  // j >= k, mirrored below: exact symmetry
        const int dj = is[j].total();
        // triangle inequality and parity of the total degree
        if (dl > dk + dj || dk > dl + dj || dj > dl + dk) continue;
        if ((dl + dk + dj) % 2) continue;
        double prod = 1.0;
        for (int v = 0; v < m; ++v) {
          prod *= eref(ia[l].degrees[v], is[k].degrees[v], is[j].degrees[v]);
          if (prod == 0.0) break;
        }
        if (std::fabs(prod) > drop_tol) {
          t.slices[l].push_back({k, j, prod});
          if (j != k) t.slices[l].push_back({j, k, prod});
        }
      }
    }
  }
  return t;
}

}  // namespace sgeig
