#pragma once

// Inexact inverse subspace iteration for the stochastic Galerkin eigenproblem.
// Each step solves the Galerkin system against the previous iterate with PCG,
// then renormalizes in the quadrature sense; eigenvalue expansions come from
// the stochastic Rayleigh quotient.

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "sgeig/fem.hpp"
#include "sgeig/gpc.hpp"
#include "sgeig/krylov.hpp"
#include "sgeig/preconditioners.hpp"
#include "sgeig/quadrature.hpp"
#include "sgeig/sg_operator.hpp"

namespace sgeig {

enum class SisiPrecond { mean, hierarchical_gs };

struct SisiConfig {
  int n_s = 1;
  int steps = 20;
  double tau = 1e-2;  // inner tolerance factor against the outer residual
  int p_t = 1;        // truncation degree of the hierarchical preconditioner
  SisiPrecond precond = SisiPrecond::hierarchical_gs;
  bool early_exit = false;  // stop once both indicators stagnate over 3 steps
  int pcg_maxit = 1000;
};

struct EigenpairExpansion {
  Vec lambda;  // eigenvalue coefficients, length n_xi
  Matrix u;    // eigenvector coefficients, n_x by n_xi
  std::vector<double> eps_mean;     // mean-residual indicator per step
  std::vector<double> eps_var;      // variance indicator per step
  std::vector<int> pcg_iterations;  // inner iterations per step
};

// lambda_k = sum_ij h_k(i,j) (U^T V)_ij with V the operator image of U.
// Coefficients beyond the stored expansion length are identically zero.
inline Vec rayleigh_quotient(const GalerkinOperator& op, const Matrix& u) {
  Matrix v = op.matvec(u);
  Matrix g = matmul_tn(u, v);
  Vec lambda(op.n_xi(), 0.0);
  const int k_max = std::min(op.n_xi(), op.n_terms());
  for (int k = 0; k < k_max; ++k) {
    double s = 0.0;
    for (const TripleEntry& en : op.tensor().slices[k]) s += en.value * g(en.k, en.j);
    lambda[k] = s;
  }
  return lambda;
}

// Quadrature projection of the pointwise-normalized field:
//   u_k = sum_q v(xi_q)/||v(xi_q)|| psi_k(xi_q) w_q
inline Matrix normalize(const Matrix& v, const GpcBasis& basis, const SparseGrid& grid,
                        double min_norm = 1e-300) {
  const int n_x = v.rows();
  const int n_xi = v.cols();
  if (n_xi != basis.size())
    throw std::invalid_argument("normalize: coefficient count does not match basis");
  if (grid.points.empty() || int(grid.points[0].size()) != basis.m_xi())
    throw std::invalid_argument("normalize: grid dimension does not match basis");
  Matrix out(n_x, n_xi);
  Vec psi(n_xi), val(n_x);
  for (std::size_t q = 0; q < grid.size(); ++q) {
    basis.eval(grid.points[q].data(), psi.data());
    std::fill(val.begin(), val.end(), 0.0);
    for (int k = 0; k < n_xi; ++k) axpy(n_x, psi[k], v.col(k), val.data());
    const double nn = nrm2(n_x, val.data());
    if (!(nn > min_norm))
      throw std::runtime_error("normalize: vector vanishes at a quadrature point");
    const double base = grid.weights[q] / nn;
    for (int k = 0; k < n_xi; ++k) axpy(n_x, base * psi[k], val.data(), out.col(k));
  }
  return out;
}

// Stochastic modified Gram-Schmidt: orthogonalize pointwise against the
// already-accepted vectors via discrete projection, then renormalize.
inline std::vector<Matrix> gram_schmidt(const std::vector<Matrix>& vs,
                                        const GpcBasis& basis, const SparseGrid& grid) {
  std::vector<Matrix> us;
  us.reserve(vs.size());
  for (std::size_t s = 0; s < vs.size(); ++s) {
    Matrix work = vs[s];
    const int n_x = work.rows();
    const int n_xi = work.cols();
    Vec psi(n_xi), vw(n_x), ut(n_x);
    for (std::size_t t = 0; t < s; ++t) {
      Matrix chi(n_x, n_xi);
      for (std::size_t q = 0; q < grid.size(); ++q) {
        basis.eval(grid.points[q].data(), psi.data());
        std::fill(vw.begin(), vw.end(), 0.0);
        std::fill(ut.begin(), ut.end(), 0.0);
        for (int k = 0; k < n_xi; ++k) {
          axpy(n_x, psi[k], work.col(k), vw.data());
          axpy(n_x, psi[k], us[t].col(k), ut.data());
        }
        const double denom = dot(n_x, ut.data(), ut.data());
        if (denom < 1e-24)
          throw std::runtime_error("gram_schmidt: basis vector vanishes at a point");
        const double coef = dot(n_x, vw.data(), ut.data()) / denom;
        const double base = grid.weights[q] * coef;
        for (int k = 0; k < n_xi; ++k) axpy(n_x, base * psi[k], ut.data(), chi.col(k));
      }
      work -= chi;
    }
    us.push_back(normalize(work, basis, grid, 1e-12));
  }
  return us;
}

inline std::vector<EigenpairExpansion> run_sisi(const GalerkinOperator& op,
                                                const GpcBasis& basis,
                                                const SparseGrid& grid,
                                                const SisiConfig& cfg) {
  if (cfg.steps < 1) throw std::invalid_argument("run_sisi: steps must be positive");
  if (!(cfg.tau > 0.0)) throw std::invalid_argument("run_sisi: tau must be positive");
  if (cfg.n_s < 1 || cfg.n_s > op.n_x())
    throw std::invalid_argument("run_sisi: eigenpair count out of range");
  if (basis.size() != op.n_xi())
    throw std::invalid_argument("run_sisi: basis does not match operator");

  const int n_x = op.n_x();
  const int n_xi = op.n_xi();
  const std::size_t n_flat = std::size_t(n_x) * n_xi;

  MeanEigenpairs mean = mean_eigenpairs(op.ops().A[0], cfg.n_s);

  // The mean block must be definite for the inner solves; a nonpositive
  // smallest eigenvalue is cured by a diagonal shift removed at the end.
  double rho = 0.0;
  std::optional<GalerkinOperator> shifted;
  const GalerkinOperator* work = &op;
  if (mean.values[0] <= 0.0) {
    rho = std::fabs(mean.values[0]) + 1.0;
    OperatorSet ops_copy = op.ops();
    for (int i = 0; i < n_x; ++i) ops_copy.A[0](i, i) += rho;
    shifted.emplace(std::move(ops_copy), op.tensor());
    work = &*shifted;
  }

  std::optional<MeanPreconditioner> mb;
  std::optional<HierarchicalGsPreconditioner> hgs;
  if (cfg.precond == SisiPrecond::mean)
    mb.emplace(*work);
  else
    hgs.emplace(*work, basis, cfg.p_t);

  LinearMap apply_map = [&](const Vec& x, Vec& y) {
    Matrix xm(n_x, n_xi);
    std::copy(x.begin(), x.end(), xm.data());
    Matrix ym = work->matvec(xm);
    y.assign(ym.data(), ym.data() + n_flat);
  };
  LinearMap precond_map = [&](const Vec& x, Vec& y) {
    Matrix xm(n_x, n_xi);
    std::copy(x.begin(), x.end(), xm.data());
    Matrix ym = mb ? mb->apply(xm) : hgs->apply(xm);
    y.assign(ym.data(), ym.data() + n_flat);
  };

  std::vector<EigenpairExpansion> out(cfg.n_s);
  std::vector<Matrix> u(cfg.n_s, Matrix(n_x, n_xi));
  std::vector<double> res_norm(cfg.n_s);
  for (int s = 0; s < cfg.n_s; ++s) {
    std::copy(mean.vectors.col(s), mean.vectors.col(s) + n_x, u[s].col(0));
    Vec lambda = rayleigh_quotient(*work, u[s]);
    res_norm[s] = work->apply_shifted(u[s], lambda).frobenius();
  }

  for (int step = 1; step <= cfg.steps; ++step) {
    std::vector<Matrix> v(cfg.n_s, Matrix(n_x, n_xi));
    for (int s = 0; s < cfg.n_s; ++s) {
      Vec b(u[s].data(), u[s].data() + n_flat);
      KrylovResult kr =
          pcg(apply_map, precond_map, b, cfg.tau * res_norm[s], cfg.pcg_maxit);
      if (kr.stats.breakdown)
        throw std::runtime_error("run_sisi: PCG breakdown in the inner solve");
      std::copy(kr.x.begin(), kr.x.end(), v[s].data());
      out[s].pcg_iterations.push_back(kr.stats.iterations);
    }

    if (cfg.n_s == 1)
      u[0] = normalize(v[0], basis, grid);
    else
      u = gram_schmidt(v, basis, grid);

    for (int s = 0; s < cfg.n_s; ++s) {
      Vec lambda = rayleigh_quotient(*work, u[s]);
      Matrix resid = work->apply_shifted(u[s], lambda);
      auto [e1, ev] = residual_indicators(resid);
      out[s].eps_mean.push_back(e1);
      out[s].eps_var.push_back(ev);
      res_norm[s] = resid.frobenius();
      if (!std::isfinite(res_norm[s]) || !std::isfinite(lambda[0]))
        throw std::runtime_error("run_sisi: iteration produced non-finite values");
      out[s].lambda = std::move(lambda);
    }

    if (cfg.early_exit && int(out[0].eps_mean.size()) >= 4) {
      bool stalled = true;
      for (int s = 0; s < cfg.n_s && stalled; ++s) {
        const auto& em = out[s].eps_mean;
        const auto& evh = out[s].eps_var;
        const std::size_t n = em.size();
        stalled = std::fabs(em[n - 1] - em[n - 4]) < 1e-3 * std::fabs(em[n - 4]) &&
                  std::fabs(evh[n - 1] - evh[n - 4]) < 1e-3 * std::fabs(evh[n - 4]);
      }
      if (stalled) break;
    }
  }

  for (int s = 0; s < cfg.n_s; ++s) {
    out[s].u = std::move(u[s]);
    if (rho > 0.0) out[s].lambda[0] -= rho;
  }
  if (shifted) op.counters().add(work->counters().snapshot());
  return out;
}

}  // namespace sgeig
