#pragma once

// Dense column-major matrices plus the factorizations the solver stack needs:
// Cholesky, pivoted LU, a Householder+QL symmetric eigensolver, and an
// eigendecomposition-based pseudoinverse solve. Self-contained on purpose so
// the library has no linear-algebra dependency.

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace sgeig {

using Vec = std::vector<double>;

inline double dot(const Vec& x, const Vec& y) {
  assert(x.size() == y.size());
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

inline double nrm2(const Vec& x) { return std::sqrt(dot(x, x)); }

// pointer variants for matrix columns
inline double dot(int n, const double* x, const double* y) {
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += x[i] * y[i];
  return s;
}

inline double nrm2(int n, const double* x) { return std::sqrt(dot(n, x, x)); }

inline void axpy(double a, const Vec& x, Vec& y) {
  assert(x.size() == y.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

inline void axpy(int n, double a, const double* x, double* y) {
  for (int i = 0; i < n; ++i) y[i] += a * x[i];
}

inline void scal(double a, Vec& x) {
  for (double& v : x) v *= a;
}

class Matrix {
 public:
  Matrix() = default;
  Matrix(int rows, int cols) : r_(rows), c_(cols), a_(std::size_t(rows) * cols, 0.0) {}

  static Matrix identity(int n) {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  int rows() const { return r_; }
  int cols() const { return c_; }

  double& operator()(int i, int j) { return a_[std::size_t(j) * r_ + i]; }
  double operator()(int i, int j) const { return a_[std::size_t(j) * r_ + i]; }

  double* col(int j) { return a_.data() + std::size_t(j) * r_; }
  const double* col(int j) const { return a_.data() + std::size_t(j) * r_; }

  double* data() { return a_.data(); }
  const double* data() const { return a_.data(); }
  std::size_t size() const { return a_.size(); }

  void fill(double v) { std::fill(a_.begin(), a_.end(), v); }

  Matrix transposed() const {
    Matrix t(c_, r_);
    for (int j = 0; j < c_; ++j)
      for (int i = 0; i < r_; ++i) t(j, i) = (*this)(i, j);
    return t;
  }

  double frobenius() const {
    double s = 0.0;
    for (double v : a_) s += v * v;
    return std::sqrt(s);
  }

  Matrix& operator+=(const Matrix& o) {
    assert(r_ == o.r_ && c_ == o.c_);
    for (std::size_t i = 0; i < a_.size(); ++i) a_[i] += o.a_[i];
    return *this;
  }
  Matrix& operator-=(const Matrix& o) {
    assert(r_ == o.r_ && c_ == o.c_);
    for (std::size_t i = 0; i < a_.size(); ++i) a_[i] -= o.a_[i];
    return *this;
  }
  Matrix& operator*=(double a) {
    for (double& v : a_) v *= a;
    return *this;
  }

 private:
  int r_ = 0, c_ = 0;
  Vec a_;
};

// trace(A^T B), the Frobenius inner product
inline double frob_inner(const Matrix& a, const Matrix& b) {
  assert(a.rows() == b.rows() && a.cols() == b.cols());
  const double* x = a.data();
  const double* y = b.data();
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += x[i] * y[i];
  return s;
}

// C = A * B
inline Matrix matmul(const Matrix& a, const Matrix& b) {
  assert(a.cols() == b.rows());
  Matrix c(a.rows(), b.cols());
  for (int j = 0; j < b.cols(); ++j) {
    double* cj = c.col(j);
    for (int k = 0; k < a.cols(); ++k) {
      const double bkj = b(k, j);
      if (bkj == 0.0) continue;
      const double* ak = a.col(k);
      for (int i = 0; i < a.rows(); ++i) cj[i] += ak[i] * bkj;
    }
  }
  return c;
}

// C = A^T * B
inline Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  assert(a.rows() == b.rows());
  Matrix c(a.cols(), b.cols());
  for (int j = 0; j < b.cols(); ++j)
    for (int i = 0; i < a.cols(); ++i) {
      const double* ai = a.col(i);
      const double* bj = b.col(j);
      double s = 0.0;
      for (int k = 0; k < a.rows(); ++k) s += ai[k] * bj[k];
      c(i, j) = s;
    }
  return c;
}

// y = A * x
inline void matvec(const Matrix& a, const double* x, double* y) {
  for (int i = 0; i < a.rows(); ++i) y[i] = 0.0;
  for (int k = 0; k < a.cols(); ++k) {
    const double xk = x[k];
    if (xk == 0.0) continue;
    const double* ak = a.col(k);
    for (int i = 0; i < a.rows(); ++i) y[i] += ak[i] * xk;
  }
}

inline void matvec(const Matrix& a, const Vec& x, Vec& y) {
  assert(int(x.size()) == a.cols());
  y.resize(a.rows());
  matvec(a, x.data(), y.data());
}

// Cholesky A = L L^T, lower triangle returned. Throws if A is not positive
// definite.
inline Matrix cholesky(const Matrix& a) {
  assert(a.rows() == a.cols());
  const int n = a.rows();
  Matrix l(n, n);
  for (int j = 0; j < n; ++j) {
    double d = a(j, j);
    for (int k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (d <= 0.0) throw std::runtime_error("cholesky: matrix not positive definite");
    const double ljj = std::sqrt(d);
    l(j, j) = ljj;
    for (int i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (int k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / ljj;
    }
  }
  return l;
}

// Solve L y = b in place (L lower triangular).
inline void solve_lower(const Matrix& l, double* b) {
  const int n = l.rows();
  for (int i = 0; i < n; ++i) {
    double s = b[i];
    for (int k = 0; k < i; ++k) s -= l(i, k) * b[k];
    b[i] = s / l(i, i);
  }
}

// Solve L^T x = b in place.
inline void solve_lower_transposed(const Matrix& l, double* b) {
  const int n = l.rows();
  for (int i = n - 1; i >= 0; --i) {
    double s = b[i];
    for (int k = i + 1; k < n; ++k) s -= l(k, i) * b[k];
    b[i] = s / l(i, i);
  }
}

// Solve (L L^T) x = b in place given the Cholesky factor.
inline void cholesky_solve(const Matrix& l, double* b) {
  solve_lower(l, b);
  solve_lower_transposed(l, b);
}

// LU with partial pivoting for general (possibly indefinite) systems.
struct LuFactors {
  Matrix lu;              // packed L (unit diagonal) and U
  std::vector<int> piv;   // row swaps applied at each step
};

inline LuFactors lu_factor(Matrix a) {
  const int n = a.rows();
  assert(n == a.cols());
  LuFactors f{Matrix(), std::vector<int>(n)};
  for (int k = 0; k < n; ++k) {
    int p = k;
    double best = std::fabs(a(k, k));
    for (int i = k + 1; i < n; ++i) {
      const double v = std::fabs(a(i, k));
      if (v > best) { best = v; p = i; }
    }
    if (best == 0.0) throw std::runtime_error("lu_factor: singular matrix");
    f.piv[k] = p;
    if (p != k)
      for (int j = 0; j < n; ++j) std::swap(a(k, j), a(p, j));
    const double inv = 1.0 / a(k, k);
    for (int i = k + 1; i < n; ++i) {
      const double m = a(i, k) * inv;
      a(i, k) = m;
      for (int j = k + 1; j < n; ++j) a(i, j) -= m * a(k, j);
    }
  }
  f.lu = std::move(a);
  return f;
}

inline void lu_solve(const LuFactors& f, double* b) {
  const int n = f.lu.rows();
  // All row swaps first: stored multipliers live in final row positions.
  for (int k = 0; k < n; ++k)
    if (f.piv[k] != k) std::swap(b[k], b[f.piv[k]]);
  for (int k = 0; k < n; ++k)
    for (int i = k + 1; i < n; ++i) b[i] -= f.lu(i, k) * b[k];
  for (int i = n - 1; i >= 0; --i) {
    double s = b[i];
    for (int k = i + 1; k < n; ++k) s -= f.lu(i, k) * b[k];
    b[i] = s / f.lu(i, i);
  }
}

namespace detail {

// Householder reduction of symmetric A to tridiagonal (d, e); if q is
// non-null it accumulates the orthogonal transform so that
// A = Q T Q^T. Only the lower triangle of A is referenced.
inline void sym_tridiagonalize(Matrix a, Vec& d, Vec& e, Matrix* q) {
  const int n = a.rows();
  d.assign(n, 0.0);
  e.assign(n, 0.0);
  if (q) *q = Matrix::identity(n);
  Vec v(n), p(n), w(n);
  for (int k = 0; k + 2 < n; ++k) {
    // Householder vector for column k below the diagonal.
    double scale = 0.0;
    for (int i = k + 1; i < n; ++i) scale += std::fabs(a(i, k));
    if (scale == 0.0) { e[k + 1] = 0.0; continue; }
    double h = 0.0;
    for (int i = k + 1; i < n; ++i) {
      v[i] = a(i, k) / scale;
      h += v[i] * v[i];
    }
    double f = v[k + 1];
    const double g = (f >= 0.0) ? -std::sqrt(h) : std::sqrt(h);
    e[k + 1] = scale * g;
    h -= f * g;          // h = v^T v / 2 after the update below
    v[k + 1] = f - g;
    const double beta = 1.0 / h;  // H = I - beta v v^T on the trailing block
    // p = beta * A22 * v  (lower triangle holds the symmetric data)
    for (int i = k + 1; i < n; ++i) {
      double s = 0.0;
      for (int j = k + 1; j <= i; ++j) s += a(i, j) * v[j];
      for (int j = i + 1; j < n; ++j) s += a(j, i) * v[j];
      p[i] = s * beta;
    }
    // w = p - (beta/2) (p^T v) v ; A22 <- A22 - v w^T - w v^T
    double pv = 0.0;
    for (int i = k + 1; i < n; ++i) pv += p[i] * v[i];
    const double half = 0.5 * beta * pv;
    for (int i = k + 1; i < n; ++i) w[i] = p[i] - half * v[i];
    for (int i = k + 1; i < n; ++i)
      for (int j = k + 1; j <= i; ++j)
        a(i, j) -= v[i] * w[j] + w[i] * v[j];
    if (q) {
      // Q <- Q H, applied to columns k+1..n-1
      for (int r = 0; r < n; ++r) {
        double s = 0.0;
        for (int j = k + 1; j < n; ++j) s += (*q)(r, j) * v[j];
        s *= beta;
        for (int j = k + 1; j < n; ++j) (*q)(r, j) -= s * v[j];
      }
    }
  }
  if (n >= 2) e[n - 1] = a(n - 1, n - 2);
  for (int i = 0; i < n; ++i) d[i] = a(i, i);
}

// Implicit-shift QL iteration on a tridiagonal (d, e); e[i] couples i-1 and i.
// Rotations are accumulated into the columns of q when non-null.
inline void tridiag_ql(Vec& d, Vec& e, Matrix* q) {
  const int n = int(d.size());
  if (n <= 1) return;
  const double eps = std::numeric_limits<double>::epsilon();
  for (int i = 1; i < n; ++i) e[i - 1] = e[i];
  e[n - 1] = 0.0;
  for (int l = 0; l < n; ++l) {
    int iter = 0;
    int m;
    do {
      for (m = l; m < n - 1; ++m) {
        const double dd = std::fabs(d[m]) + std::fabs(d[m + 1]);
        if (std::fabs(e[m]) <= eps * dd) break;
      }
      if (m == l) break;
      if (++iter > 60) throw std::runtime_error("tridiag_ql: no convergence");
      double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
      double r = std::hypot(g, 1.0);
      g = d[m] - d[l] + e[l] / (g + std::copysign(r, g));
      double s = 1.0, c = 1.0, p = 0.0;
      bool deflated = false;
      for (int i = m - 1; i >= l; --i) {
        double f = s * e[i];
        const double b = c * e[i];
        r = std::hypot(f, g);
        e[i + 1] = r;
        if (r == 0.0) {  // underflow: deflate and restart this eigenvalue
          d[i + 1] -= p;
          e[m] = 0.0;
          deflated = true;
          break;
        }
        s = f / r;
        c = g / r;
        g = d[i + 1] - p;
        r = (d[i] - g) * s + 2.0 * c * b;
        p = s * r;
        d[i + 1] = g + p;
        g = c * r - b;
        if (q) {
          for (int k = 0; k < q->rows(); ++k) {
            f = (*q)(k, i + 1);
            (*q)(k, i + 1) = s * (*q)(k, i) + c * f;
            (*q)(k, i) = c * (*q)(k, i) - s * f;
          }
        }
      }
      if (deflated) continue;
      d[l] -= p;
      e[l] = g;
      e[m] = 0.0;
    } while (true);
  }
}

}  // namespace detail

struct SymEigen {
  Vec values;       // ascending
  Matrix vectors;   // columns match values
};

// Full symmetric eigendecomposition A = V diag(values) V^T.
inline SymEigen sym_eigen(const Matrix& a) {
  assert(a.rows() == a.cols());
  SymEigen r;
  Vec e;
  detail::sym_tridiagonalize(a, r.values, e, &r.vectors);
  detail::tridiag_ql(r.values, e, &r.vectors);
  const int n = a.rows();
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int i, int j) { return r.values[i] < r.values[j]; });
  Vec vals(n);
  Matrix vecs(n, n);
  for (int j = 0; j < n; ++j) {
    vals[j] = r.values[order[j]];
    std::copy_n(r.vectors.col(order[j]), n, vecs.col(j));
  }
  r.values = std::move(vals);
  r.vectors = std::move(vecs);
  return r;
}

// Eigenvalues only (ascending); skips the transform accumulation.
inline Vec sym_eigenvalues(const Matrix& a) {
  assert(a.rows() == a.cols());
  Vec d, e;
  detail::sym_tridiagonalize(a, d, e, nullptr);
  detail::tridiag_ql(d, e, nullptr);
  std::sort(d.begin(), d.end());
  return d;
}

// Pseudoinverse solve for symmetric (possibly singular) A via its
// eigendecomposition: modes with |lambda| <= cut * max|lambda| are dropped.
struct SymPseudoSolver {
  explicit SymPseudoSolver(const Matrix& a, double relative_cut = 1e-10)
      : eig_(sym_eigen(a)) {
    double amax = 0.0;
    for (double v : eig_.values) amax = std::max(amax, std::fabs(v));
    const double cut = relative_cut * amax;
    inv_.resize(eig_.values.size());
    for (std::size_t i = 0; i < inv_.size(); ++i)
      inv_[i] = (std::fabs(eig_.values[i]) > cut) ? 1.0 / eig_.values[i] : 0.0;
  }

  void solve(double* b) const {
    const int n = int(inv_.size());
    Vec t(n);
    for (int j = 0; j < n; ++j) {
      const double* vj = eig_.vectors.col(j);
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += vj[i] * b[i];
      t[j] = s * inv_[j];
    }
    for (int i = 0; i < n; ++i) b[i] = 0.0;
    for (int j = 0; j < n; ++j) {
      const double* vj = eig_.vectors.col(j);
      for (int i = 0; i < n; ++i) b[i] += vj[i] * t[j];
    }
  }

  const SymEigen& eigen() const { return eig_; }

 private:
  SymEigen eig_;
  Vec inv_;
};

}  // namespace sgeig
