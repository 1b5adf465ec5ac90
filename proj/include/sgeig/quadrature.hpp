#pragma once

// 1D Gauss rules (Golub-Welsch on the Jacobi matrix) and Smolyak sparse
// grids. All weights are probability-normalized: Gauss-Hermite integrates
// against the standard Gaussian density, Gauss-Legendre against the uniform
// density on (-1,1).

#include <cmath>
#include <stdexcept>
#include <vector>

#include "sgeig/linalg.hpp"

namespace sgeig {

enum class Family { hermite, legendre };

struct Rule1D {
  Vec nodes;    // strictly increasing
  Vec weights;  // sum to 1
};

namespace detail {

// Eigen decomposition of the symmetric tridiagonal Jacobi matrix gives the
// nodes; squared first components of the normalized eigenvectors give the
// weights of the probability measure.
inline Rule1D golub_welsch(const Vec& offdiag) {
  const int n = int(offdiag.size()) + 1;
  Matrix j(n, n);
  for (int i = 0; i + 1 < n; ++i) {
    j(i, i + 1) = offdiag[i];
    j(i + 1, i) = offdiag[i];
  }
  SymEigen e = sym_eigen(j);
  Rule1D r;
  r.nodes = e.values;
  r.weights.resize(n);
  for (int k = 0; k < n; ++k) {
    const double v0 = e.vectors(0, k);
    r.weights[k] = v0 * v0;
  }
  return r;
}

}  // namespace detail

// Gauss rule for the standard Gaussian measure; exact to degree 2n-1.
inline Rule1D gauss_hermite(int n) {
  if (n < 1) throw std::invalid_argument("gauss_hermite: need n >= 1");
  if (n == 1) return {{0.0}, {1.0}};
  Vec off(n - 1);
  for (int i = 1; i < n; ++i) off[i - 1] = std::sqrt(double(i));
  return detail::golub_welsch(off);
}

// Gauss rule for the uniform measure on (-1,1); exact to degree 2n-1.
inline Rule1D gauss_legendre(int n) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: need n >= 1");
  if (n == 1) return {{0.0}, {1.0}};
  Vec off(n - 1);
  for (int i = 1; i < n; ++i) off[i - 1] = double(i) / std::sqrt(4.0 * i * i - 1.0);
  return detail::golub_welsch(off);
}

inline Rule1D gauss_rule(Family family, int n) {
  return family == Family::hermite ? gauss_hermite(n) : gauss_legendre(n);
}

struct SparseGrid {
  std::vector<Vec> points;  // each of dimension m_xi
  Vec weights;              // may contain negatives; sum to 1
  int level = 0;
  Family family = Family::hermite;

  std::size_t size() const { return points.size(); }
};

namespace detail {

inline long long binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  long long r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

// Compositions of `total` into `parts` positive integers, lexicographic.
inline void compositions(int total, int parts, std::vector<int>& cur,
                         std::vector<std::vector<int>>& out) {
  if (parts == 1) {
    cur.push_back(total);
    out.push_back(cur);
    cur.pop_back();
    return;
  }
  for (int first = 1; first <= total - parts + 1; ++first) {
    cur.push_back(first);
    compositions(total - first, parts - 1, cur, out);
    cur.pop_back();
  }
}

}  // namespace detail

// Standard Smolyak combination with linear growth (1D level i uses i nodes):
// multi-indices d <= |i| <= d+w with coefficient (-1)^{d+w-|i|} C(d-1, d+w-|i|).
// Coincident points (1e-12 in the max norm) are merged by summing weights.
inline SparseGrid smolyak(Family family, int m_xi, int w) {
  if (m_xi < 1) throw std::invalid_argument("smolyak: need m_xi >= 1");
  if (w < 0) throw std::invalid_argument("smolyak: need level >= 0");
  const int d = m_xi;
  SparseGrid grid;
  grid.level = w;
  grid.family = family;

  int max_nodes = 1 + w;
  std::vector<Rule1D> rules(max_nodes + 1);
  for (int n = 1; n <= max_nodes; ++n) rules[n] = gauss_rule(family, n);

  Vec pt(d);
  std::vector<int> combo(d);
  for (int q = d; q <= d + w; ++q) {
    const double coeff =
        ((d + w - q) % 2 ? -1.0 : 1.0) * double(detail::binomial(d - 1, d + w - q));
    std::vector<std::vector<int>> idxs;
    std::vector<int> cur;
    detail::compositions(q, d, cur, idxs);
    for (const auto& idx : idxs) {
      std::fill(combo.begin(), combo.end(), 0);
      while (true) {
        double wt = coeff;
        for (int k = 0; k < d; ++k) {
          const Rule1D& r = rules[idx[k]];
          pt[k] = r.nodes[combo[k]];
          wt *= r.weights[combo[k]];
        }
        // merge into existing point if within dedup tolerance
        bool merged = false;
        for (std::size_t j = 0; j < grid.points.size(); ++j) {
          double dist = 0.0;
          for (int k = 0; k < d; ++k)
            dist = std::max(dist, std::fabs(grid.points[j][k] - pt[k]));
          if (dist < 1e-12) {
            grid.weights[j] += wt;
            merged = true;
            break;
          }
        }
        if (!merged) {
          grid.points.push_back(pt);
          grid.weights.push_back(wt);
        }
        // odometer over tensor combinations
        int k = 0;
        for (; k < d; ++k) {
          if (++combo[k] < idx[k]) break;
          combo[k] = 0;
        }
        if (k == d) break;
      }
    }
  }
  return grid;
}

template <typename F>
double integrate(const SparseGrid& grid, F&& f) {
  double s = 0.0;
  for (std::size_t q = 0; q < grid.points.size(); ++q)
    s += f(grid.points[q]) * grid.weights[q];
  return s;
}

}  // namespace sgeig
