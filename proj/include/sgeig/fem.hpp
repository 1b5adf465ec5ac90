#pragma once

// Structured bilinear (Q4) finite elements on [-1,1]^2 with homogeneous
// Dirichlet boundary: stiffness per coefficient field, consistent mass, and
// the Cholesky congruence that turns the generalized eigenproblem
// K v = lambda M v into a standard symmetric one.

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "sgeig/linalg.hpp"
#include "sgeig/random_field.hpp"

namespace sgeig {

struct StructuredMesh {
  int elems_per_side = 0;
  double h = 0.0;
  std::vector<NodeXY> nodes;                    // (n+1)^2, x fastest, y slowest
  std::vector<std::array<int, 4>> elements;     // counter-clockwise corners
  std::vector<int> interior;                    // node ids with Dirichlet rows kept
  std::vector<int> node_to_interior;            // -1 on the boundary

  int n_interior() const { return int(interior.size()); }

  static StructuredMesh unit_square(int n_side) {
    if (n_side < 1) throw std::invalid_argument("mesh: need at least one element");
    StructuredMesh m;
    m.elems_per_side = n_side;
    m.h = 2.0 / n_side;
    const int nn = n_side + 1;
    m.nodes.reserve(std::size_t(nn) * nn);
    for (int j = 0; j < nn; ++j)
      for (int i = 0; i < nn; ++i)
        m.nodes.push_back({-1.0 + i * m.h, -1.0 + j * m.h});
    for (int j = 0; j < n_side; ++j)
      for (int i = 0; i < n_side; ++i) {
        const int n0 = j * nn + i;
        m.elements.push_back({n0, n0 + 1, n0 + nn + 1, n0 + nn});
      }
    m.node_to_interior.assign(m.nodes.size(), -1);
    for (int j = 1; j < n_side; ++j)
      for (int i = 1; i < n_side; ++i) {
        const int id = j * nn + i;
        m.node_to_interior[id] = int(m.interior.size());
        m.interior.push_back(id);
      }
    return m;
  }
};

namespace detail {

// Q4 shape values and reference gradients at (xi, eta); node order matches
// StructuredMesh::elements.
inline std::array<double, 4> q4_shape(double xi, double eta) {
  return {0.25 * (1 - xi) * (1 - eta), 0.25 * (1 + xi) * (1 - eta),
          0.25 * (1 + xi) * (1 + eta), 0.25 * (1 - xi) * (1 + eta)};
}

inline std::array<std::array<double, 2>, 4> q4_grad(double xi, double eta) {
  return {{{-0.25 * (1 - eta), -0.25 * (1 - xi)},
           {0.25 * (1 - eta), -0.25 * (1 + xi)},
           {0.25 * (1 + eta), 0.25 * (1 + xi)},
           {-0.25 * (1 + eta), 0.25 * (1 - xi)}}};
}

constexpr double kGauss2 = 0.57735026918962576;  // 1/sqrt(3)

}  // namespace detail

// Element stiffness for a square element of side h whose corner coefficient
// values are interpolated bilinearly; 2x2 Gauss points.
inline std::array<std::array<double, 4>, 4> element_stiffness(
    double h, const std::array<double, 4>& coeff_corners) {
  std::array<std::array<double, 4>, 4> ke{};
  (void)h;  // gradients scale as 2/h, the Jacobian as h^2/4: h cancels
  for (double eta : {-detail::kGauss2, detail::kGauss2})
    for (double xi : {-detail::kGauss2, detail::kGauss2}) {
      const auto n = detail::q4_shape(xi, eta);
      const auto g = detail::q4_grad(xi, eta);
      double a = 0.0;
      for (int c = 0; c < 4; ++c) a += n[c] * coeff_corners[c];
      for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
          ke[i][j] += a * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
    }
  return ke;
}

// Consistent element mass for a square element of side h (2x2 Gauss is exact
// for the biquadratic integrand).
inline std::array<std::array<double, 4>, 4> element_mass(double h) {
  std::array<std::array<double, 4>, 4> me{};
  const double jac = h * h / 4.0;
  for (double eta : {-detail::kGauss2, detail::kGauss2})
    for (double xi : {-detail::kGauss2, detail::kGauss2}) {
      const auto n = detail::q4_shape(xi, eta);
      for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) me[i][j] += n[i] * n[j] * jac;
    }
  return me;
}

// Dirichlet-eliminated stiffness for a nodal coefficient field.
inline Matrix assemble_stiffness(const StructuredMesh& mesh, const Vec& coeff_nodal) {
  if (coeff_nodal.size() != mesh.nodes.size())
    throw std::invalid_argument("assemble_stiffness: coefficient size mismatch");
  const int n = mesh.n_interior();
  Matrix k(n, n);
  for (const auto& el : mesh.elements) {
    const std::array<double, 4> a = {coeff_nodal[el[0]], coeff_nodal[el[1]],
                                     coeff_nodal[el[2]], coeff_nodal[el[3]]};
    const auto ke = element_stiffness(mesh.h, a);
    for (int i = 0; i < 4; ++i) {
      const int gi = mesh.node_to_interior[el[i]];
      if (gi < 0) continue;
      for (int j = 0; j < 4; ++j) {
        const int gj = mesh.node_to_interior[el[j]];
        if (gj >= 0) k(gi, gj) += ke[i][j];
      }
    }
  }
  return k;
}

// Consistent mass matrix; interior_only=false keeps every node (used for the
// partition-of-unity check and lumped node weights).
inline Matrix assemble_mass(const StructuredMesh& mesh, bool interior_only = true) {
  const int n = interior_only ? mesh.n_interior() : int(mesh.nodes.size());
  Matrix m(n, n);
  const auto me = element_mass(mesh.h);
  for (const auto& el : mesh.elements)
    for (int i = 0; i < 4; ++i) {
      const int gi = interior_only ? mesh.node_to_interior[el[i]] : el[i];
      if (gi < 0) continue;
      for (int j = 0; j < 4; ++j) {
        const int gj = interior_only ? mesh.node_to_interior[el[j]] : el[j];
        if (gj >= 0) m(gi, gj) += me[i][j];
      }
    }
  return m;
}

// Row sums of the full consistent mass: the lumped node quadrature weights
// used by the discrete KL.
inline Vec lumped_weights(const StructuredMesh& mesh) {
  Vec w(mesh.nodes.size(), 0.0);
  const auto me = element_mass(mesh.h);
  for (const auto& el : mesh.elements)
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) w[el[i]] += me[i][j];
  return w;
}

struct OperatorSet {
  std::vector<Matrix> A;  // symmetric, n_x x n_x
  int n_x = 0;

  int n_a() const { return int(A.size()); }
};

// A_l = L^{-1} K_l L^{-T} with M = L L^T; each product is symmetrized by
// averaging to remove rounding skew.
inline OperatorSet to_standard_form(const std::vector<Matrix>& k_set, const Matrix& m) {
  OperatorSet out;
  out.n_x = m.rows();
  Matrix l = cholesky(m);
  out.A.reserve(k_set.size());
  for (const Matrix& k : k_set) {
    Matrix a = k;
    // columns: L^{-1} K
    for (int j = 0; j < a.cols(); ++j) solve_lower(l, a.col(j));
    // rows: (L^{-1} (L^{-1} K)^T)^T = L^{-1} K L^{-T}
    a = a.transposed();
    for (int j = 0; j < a.cols(); ++j) solve_lower(l, a.col(j));
    Matrix at = a.transposed();
    a += at;
    a *= 0.5;
    out.A.push_back(std::move(a));
  }
  return out;
}

struct MeanEigenpairs {
  Vec values;                // ascending, n_s smallest
  Matrix vectors;            // n_x x n_s, unit columns, largest entry positive
  std::vector<int> cluster;  // repeated-eigenvalue group id per pair
};

// Smallest eigenpairs of the (symmetric) mean matrix. Eigenvalues whose
// relative gap is below 1e-6 share a cluster id; callers use that to treat
// repeated eigenvalues as one invariant subspace.
inline MeanEigenpairs mean_eigenpairs(const Matrix& a1, int n_s) {
  if (n_s < 1 || n_s > a1.rows()) throw std::invalid_argument("mean_eigenpairs: bad count");
  SymEigen e = sym_eigen(a1);
  MeanEigenpairs out;
  out.values.assign(e.values.begin(), e.values.begin() + n_s);
  out.vectors = Matrix(a1.rows(), n_s);
  out.cluster.resize(n_s);
  double scale = std::max(std::fabs(e.values[0]), std::fabs(e.values[a1.rows() - 1]));
  if (scale == 0.0) scale = 1.0;
  int cluster = 0;
  for (int s = 0; s < n_s; ++s) {
    if (s > 0 && std::fabs(out.values[s] - out.values[s - 1]) > 1e-6 * scale) ++cluster;
    out.cluster[s] = cluster;
    const double* src = e.vectors.col(s);
    double* dst = out.vectors.col(s);
    int imax = 0;
    for (int i = 1; i < a1.rows(); ++i)
      if (std::fabs(src[i]) > std::fabs(src[imax])) imax = i;
    const double flip = src[imax] < 0.0 ? -1.0 : 1.0;
    for (int i = 0; i < a1.rows(); ++i) dst[i] = flip * src[i];
  }
  return out;
}

}  // namespace sgeig
