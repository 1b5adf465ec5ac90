#pragma once

// Discrete Karhunen-Loeve expansion of the separable exponential covariance
// on mesh nodes, and the coefficient expansions built from it: the lognormal
// diffusion coefficient (Hermite chaos) and the linear uniform expansion
// (Legendre chaos).

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "sgeig/gpc.hpp"
#include "sgeig/linalg.hpp"

namespace sgeig {

struct CovarianceSpec {
  double sigma;  // pointwise standard deviation of the underlying field
  double Lx;
  double Ly;
};

struct KLExpansion {
  double g0 = 0.0;          // mean of the underlying Gaussian field
  double sigma = 0.0;       // pointwise std of the (untruncated) field
  Vec eigenvalues;          // non-increasing
  std::vector<Vec> modes;   // g_j over nodes; ||g_j||_W^2 = eigenvalue j
};

using NodeXY = std::array<double, 2>;

// Discrete KL with lumped node weights: eigenpairs of W^{1/2} C W^{1/2},
// modes scaled so g_j = sqrt(lambda_j) * (unit-W-norm eigenvector). The sign
// of each mode is fixed by a non-negative node sum (tie: first entry of
// magnitude above rounding is made positive).
inline KLExpansion kl_expand(const CovarianceSpec& cov, const std::vector<NodeXY>& nodes,
                             const Vec& weights, int m_xi) {
  const int n = int(nodes.size());
  if (m_xi < 1 || m_xi > n) throw std::invalid_argument("kl_expand: bad mode count");
  if (cov.sigma <= 0.0 || cov.Lx <= 0.0 || cov.Ly <= 0.0)
    throw std::invalid_argument("kl_expand: covariance parameters must be positive");

  Vec sqw(n);
  for (int i = 0; i < n; ++i) sqw[i] = std::sqrt(weights[i]);
  Matrix s(n, n);
  const double var = cov.sigma * cov.sigma;
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      const double c = var * std::exp(-std::fabs(nodes[i][0] - nodes[j][0]) / cov.Lx -
                                      std::fabs(nodes[i][1] - nodes[j][1]) / cov.Ly);
      s(i, j) = sqw[i] * c * sqw[j];
    }

  SymEigen e = sym_eigen(s);  // ascending
  const double lmax = e.values[n - 1];
  if (e.values[0] < -1e-8 * lmax)
    throw std::runtime_error("kl_expand: covariance is numerically indefinite");

  KLExpansion kl;
  kl.sigma = cov.sigma;
  kl.eigenvalues.resize(m_xi);
  kl.modes.resize(m_xi);
  for (int j = 0; j < m_xi; ++j) {
    const int col = n - 1 - j;
    const double lambda = e.values[col];
    kl.eigenvalues[j] = lambda;
    Vec g(n);
    for (int i = 0; i < n; ++i) g[i] = std::sqrt(lambda) * e.vectors(i, col) / sqw[i];
    double sum = 0.0, amax = 0.0;
    for (double v : g) {
      sum += v;
      amax = std::max(amax, std::fabs(v));
    }
    bool flip = false;
    if (std::fabs(sum) > 1e-10 * n * amax) {
      flip = sum < 0.0;
    } else {
      for (double v : g)
        if (std::fabs(v) > 1e-10 * amax) {
          flip = v < 0.0;
          break;
        }
    }
    if (flip)
      for (double& v : g) v = -v;
    kl.modes[j] = std::move(g);
  }
  return kl;
}

// Pointwise lognormal moment matching: mean_a = exp(g0 + sigma^2/2) and
// CoV^2 = exp(sigma^2) - 1.
struct LognormalCalibration {
  double g0;
  double sigma;
};

inline LognormalCalibration calibrate_lognormal(double cov_ratio, double mean_a) {
  if (cov_ratio < 0.0 || mean_a <= 0.0)
    throw std::invalid_argument("calibrate_lognormal: bad arguments");
  const double sigma = std::sqrt(std::log1p(cov_ratio * cov_ratio));
  return {std::log(mean_a) - 0.5 * sigma * sigma, sigma};
}

struct CoefficientExpansion {
  std::vector<Vec> fields;  // one nodal field per basis function
};

// Chaos coefficients of the lognormal field exp(g0 + sum_j g_j(x) xi_j),
// taking the expectation over the modes beyond the retained m_xi (stationary
// prefactor): a_alpha(x) = exp(g0 + sigma^2/2) * prod_j g_j(x)^{alpha_j} /
// sqrt(alpha_j!). Summed against the Hermite basis this reproduces
// exp(g0 + sigma^2/2) * exp(g(x).xi - |g(x)|^2/2), the conditional mean of
// the full field given the retained variables.
inline CoefficientExpansion lognormal_coefficients(const KLExpansion& kl,
                                                   const GpcBasis& basis_a) {
  if (basis_a.family() != Family::hermite)
    throw std::invalid_argument("lognormal_coefficients: Hermite basis required");
  const int m = basis_a.m_xi();
  if (m != int(kl.modes.size()))
    throw std::invalid_argument("lognormal_coefficients: mode count mismatch");
  const std::size_t n = kl.modes.empty() ? 0 : kl.modes[0].size();
  const double mean_a = std::exp(kl.g0 + 0.5 * kl.sigma * kl.sigma);

  CoefficientExpansion out;
  out.fields.resize(basis_a.size());
  for (int l = 0; l < basis_a.size(); ++l) {
    const MultiIndex& alpha = basis_a.indices()[l];
    double invnorm = 1.0;
    for (int v = 0; v < m; ++v) {
      double f = 1.0;
      for (int q = 2; q <= alpha.degrees[v]; ++q) f *= q;
      invnorm /= std::sqrt(f);
    }
    Vec field(n);
    for (std::size_t i = 0; i < n; ++i) {
      double prod = 1.0;
      for (int v = 0; v < m; ++v)
        for (int q = 0; q < alpha.degrees[v]; ++q) prod *= kl.modes[v][i];
      field[i] = mean_a * invnorm * prod;
    }
    out.fields[l] = std::move(field);
  }
  return out;
}

// Linear expansion for uniform inputs: field 1 is the mean, fields 2..m+1 are
// the KL modes taken verbatim (the caller pre-scales the covariance).
inline CoefficientExpansion linear_coefficients(const KLExpansion& kl, const Vec& mean_field) {
  CoefficientExpansion out;
  out.fields.reserve(kl.modes.size() + 1);
  out.fields.push_back(mean_field);
  for (const Vec& g : kl.modes) out.fields.push_back(g);
  return out;
}

}  // namespace sgeig
