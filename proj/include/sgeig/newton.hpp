#pragma once

// Inexact line-search Newton iteration on the coupled system
//   F(u, lambda) = 0 (Galerkin eigen-residual),  G(u, lambda) = 0 (norm
// constraint), using the symmetrized saddle Jacobian so that Krylov solvers
// and the merit gradient share one operator.  The Krylov side is matrix-free.

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
#include "sgeig/sg_operator.hpp"

namespace sgeig {

enum class NewtonSolver { gmres, minres };
enum class NewtonPrecond {
  mean_block,          // block-diagonal shifted mean solve
  constraint_fixed,    // per-index saddle blocks, anchor frozen at the mean
  constraint_updated,  // saddle blocks rebuilt from the current iterate
  constraint_hgs       // hierarchical sweep with updated saddle blocks
};

struct NewtonConfig {
  double rho = 0.9;  // backtracking factor
  double c = 0.05;   // sufficient-decrease constant
  int max_backtracks = 25;
  double tol = 1e-10;  // stop when the residual 2-norm falls below this
  double tau = 1e-1;   // inner tolerance factor against the previous residual
  NewtonSolver solver = NewtonSolver::gmres;
  NewtonPrecond precond = NewtonPrecond::constraint_hgs;
  int p_t = 2;
  int max_steps = 50;
  int krylov_maxit = 500;
  double eps_m_fixed = 0.95;   // mean-block shift weight with a frozen anchor
  double eps_m_updated = 1.0;  // and with the iterate anchor
};

struct NewtonResidual {
  Matrix f;  // eigen-residual coefficients, n_x by n_xi
  Vec g;     // raw constraint residuals, length n_xi
};

struct NewtonResult {
  Vec lambda;
  Matrix u;
  std::vector<double> residual_history;  // includes the initial residual
  std::vector<int> krylov_iterations;    // per accepted step
  std::vector<double> step_lengths;
  int backtrack_exhaustions = 0;
  bool converged = false;
};

namespace detail {

inline double contract_slice(const TripleProductTensor& t, int i, const Matrix& m) {
  double s = 0.0;
  for (const TripleEntry& en : t.slices[i]) s += en.value * m(en.k, en.j);
  return s;
}

inline void require_full_expansion(const GalerkinOperator& op, const char* who) {
  if (op.n_terms() < op.n_xi())
    throw std::invalid_argument(std::string(who) +
                                ": operator stores fewer terms than the basis");
}

}  // namespace detail

// F = A(.)u - sum_i lambda_i H_i u,  G_i = trace(U^T U H_i) - delta_{i0}
inline NewtonResidual newton_residual(const Matrix& u, const Vec& lambda,
                                      const GalerkinOperator& op) {
  detail::require_full_expansion(op, "newton_residual");
  if (u.rows() != op.n_x() || u.cols() != op.n_xi() || int(lambda.size()) != op.n_xi())
    throw std::invalid_argument("newton_residual: shape mismatch");
  NewtonResidual r;
  r.f = op.apply_shifted(u, lambda);
  Matrix gram = matmul_tn(u, u);
  r.g.resize(op.n_xi());
  for (int i = 0; i < op.n_xi(); ++i)
    r.g[i] = detail::contract_slice(op.tensor(), i, gram) - (i == 0 ? 1.0 : 0.0);
  return r;
}

// Action of the symmetrized Jacobian [[A(lambda), -B], [-B^T, 0]] where
// column i of B holds the coefficients of U H_i^T.
inline std::pair<Matrix, Vec> jacobian_matvec(const GalerkinOperator& op,
                                              const Matrix& u, const Vec& lambda,
                                              const Matrix& du, const Vec& dlambda) {
  detail::require_full_expansion(op, "jacobian_matvec");
  if (du.rows() != op.n_x() || du.cols() != op.n_xi() ||
      int(dlambda.size()) != op.n_xi())
    throw std::invalid_argument("jacobian_matvec: shape mismatch");
  Matrix top = op.apply_shifted(du, lambda);
  const int n_x = op.n_x();
  for (int i = 0; i < op.n_xi(); ++i) {
    if (dlambda[i] == 0.0) continue;
    for (const TripleEntry& en : op.tensor().slices[i])
      axpy(n_x, -dlambda[i] * en.value, u.col(en.j), top.col(en.k));
  }
  Matrix gram = matmul_tn(u, du);
  Vec bottom(op.n_xi());
  for (int i = 0; i < op.n_xi(); ++i)
    bottom[i] = -detail::contract_slice(op.tensor(), i, gram);
  return {std::move(top), std::move(bottom)};
}

struct CostReport {
  long long krylov_iterations = 0;
  long long matvecs = 0;
  long long precond_applies = 0;
  long long mean_solves = 0;
  double matvec_factor = 0.0;   // relative cost of one operator application
  double precond_factor = 0.0;  // relative cost of one preconditioner pass
  double estimate = 0.0;        // iterations * (matvec + preconditioner)
};

inline CostReport cost_report(const CostCounters::Snapshot& snap,
                              long long krylov_iterations, double matvec_factor,
                              double precond_factor) {
  CostReport r;
  r.krylov_iterations = krylov_iterations;
  r.matvecs = snap.full_matvecs;
  r.precond_applies = snap.precond_applies;
  r.mean_solves = snap.mean_solves;
  r.matvec_factor = matvec_factor;
  r.precond_factor = precond_factor;
  r.estimate = double(krylov_iterations) * (matvec_factor + precond_factor);
  return r;
}

inline NewtonResult run_newton(const GalerkinOperator& op, const GpcBasis& basis,
                               int s, const NewtonConfig& cfg) {
  if (!(cfg.rho > 0.0 && cfg.rho < 1.0))
    throw std::invalid_argument("run_newton: backtracking factor must be in (0,1)");
  if (!(cfg.c > 0.0 && cfg.c < 1.0))
    throw std::invalid_argument("run_newton: sufficient-decrease constant in (0,1)");
  if (!(cfg.tol > 0.0) || !(cfg.tau > 0.0))
    throw std::invalid_argument("run_newton: tolerances must be positive");
  if (s < 0 || s >= op.n_x())
    throw std::invalid_argument("run_newton: eigenpair index out of range");
  if (basis.size() != op.n_xi())
    throw std::invalid_argument("run_newton: basis does not match operator");
  detail::require_full_expansion(op, "run_newton");
  const bool constraint = cfg.precond != NewtonPrecond::mean_block;
  if (cfg.solver == NewtonSolver::minres && (constraint || s != 0))
    throw std::invalid_argument(
        "run_newton: MINRES needs the positive definite mean-block "
        "preconditioner and the smallest eigenpair");

  const int n_x = op.n_x();
  const int n_xi = op.n_xi();
  const std::size_t n_u = std::size_t(n_x) * n_xi;
  const std::size_t n_all = n_u + n_xi;

  MeanEigenpairs mean = mean_eigenpairs(op.ops().A[0], s + 1);
  Vec anchor(mean.vectors.col(s), mean.vectors.col(s) + n_x);
  const double mu_s = mean.values[s];

  Matrix u(n_x, n_xi);
  std::copy(anchor.begin(), anchor.end(), u.col(0));
  Vec lambda(n_xi, 0.0);
  lambda[0] = mu_s;

  std::optional<NewtonMeanPreconditioner> nmb;
  std::optional<ConstraintMeanPreconditioner> cmb;
  std::optional<ConstraintHierarchicalGsPreconditioner> chgs;
  if (cfg.precond == NewtonPrecond::mean_block)
    nmb.emplace(op, anchor, mu_s, cfg.eps_m_fixed);
  else if (cfg.precond == NewtonPrecond::constraint_fixed)
    cmb.emplace(op, anchor, mu_s, AnchorMode::fixed, cfg.eps_m_fixed);
  auto refresh_precond = [&]() {
    if (cfg.precond == NewtonPrecond::constraint_updated) {
      Vec a(u.col(0), u.col(0) + n_x);
      cmb.emplace(op, a, lambda[0], AnchorMode::updated, cfg.eps_m_updated);
    } else if (cfg.precond == NewtonPrecond::constraint_hgs) {
      chgs.emplace(op, basis, cfg.p_t, u, lambda, cfg.eps_m_updated);
    }
  };

  auto pack = [&](const Matrix& m, const Vec& v) {
    Vec z(n_all);
    std::copy(m.data(), m.data() + n_u, z.begin());
    std::copy(v.begin(), v.end(), z.begin() + n_u);
    return z;
  };
  auto unpack = [&](const Vec& z, Matrix& m, Vec& v) {
    m = Matrix(n_x, n_xi);
    std::copy(z.begin(), z.begin() + n_u, m.data());
    v.assign(z.begin() + n_u, z.end());
  };

  LinearMap apply_map = [&](const Vec& x, Vec& y) {
    Matrix dx;
    Vec dl;
    unpack(x, dx, dl);
    auto [top, bottom] = jacobian_matvec(op, u, lambda, dx, dl);
    y = pack(top, bottom);
  };
  LinearMap precond_map = [&](const Vec& x, Vec& y) {
    Matrix rx;
    Vec rl;
    unpack(x, rx, rl);
    Matrix vx;
    Vec vl;
    if (nmb)
      nmb->apply(rx, rl, vx, vl);
    else if (chgs)
      chgs->apply(rx, rl, vx, vl);
    else
      cmb->apply(rx, rl, vx, vl);
    y = pack(vx, vl);
  };

  // the tracked residual halves the constraint row so its Jacobian is the
  // symmetrized saddle operator above
  auto eval = [&](const Matrix& uu, const Vec& ll, Matrix& f, Vec& gh) {
    NewtonResidual rr = newton_residual(uu, ll, op);
    f = std::move(rr.f);
    gh.resize(n_xi);
    for (int i = 0; i < n_xi; ++i) gh[i] = -0.5 * rr.g[i];
  };
  auto norm_of = [&](const Matrix& f, const Vec& gh) {
    return std::sqrt(f.frobenius() * f.frobenius() + dot(gh, gh));
  };

  NewtonResult out;
  Matrix f_mat;
  Vec gh;
  eval(u, lambda, f_mat, gh);
  double rnorm = norm_of(f_mat, gh);
  out.residual_history.push_back(rnorm);
  double prev_rnorm = rnorm;

  int step = 0;
  while (rnorm >= cfg.tol && step < cfg.max_steps) {
    refresh_precond();

    Vec rhs = pack(f_mat, gh);
    scal(-1.0, rhs);
    // adaptive forcing: the solver tolerance is relative to the current
    // residual, so the inner target tightens with the previous outer one.
    // The cap keeps the first solves meaningful when the initial residual
    // exceeds one.
    const double inner_tol = std::min(cfg.tau * prev_rnorm, 0.5);
    KrylovResult kr = cfg.solver == NewtonSolver::gmres
                          ? gmres(apply_map, precond_map, rhs, inner_tol,
                                  cfg.krylov_maxit)
                          : minres(apply_map, precond_map, rhs, inner_tol,
                                   cfg.krylov_maxit);
    if (!kr.stats.converged)
      throw std::runtime_error("run_newton: inner Krylov solve did not converge");

    Matrix du;
    Vec dl;
    unpack(kr.x, du, dl);

    // exact merit gradient J r for the sufficient-decrease test
    auto [gtop, gbot] = jacobian_matvec(op, u, lambda, f_mat, gh);
    const double slope = frob_inner(gtop, du) + dot(gbot, dl);

    const double f0 = 0.5 * rnorm * rnorm;
    double alpha = 1.0;
    bool accepted = false;
    Matrix u_trial, f_trial;
    Vec l_trial, gh_trial;
    double rnorm_trial = 0.0;
    for (int bt = 0; bt <= cfg.max_backtracks; ++bt) {
      u_trial = du;
      u_trial *= alpha;
      u_trial += u;
      l_trial = lambda;
      axpy(alpha, dl, l_trial);
      eval(u_trial, l_trial, f_trial, gh_trial);
      rnorm_trial = norm_of(f_trial, gh_trial);
      if (0.5 * rnorm_trial * rnorm_trial <= f0 + cfg.c * alpha * slope) {
        accepted = true;
        break;
      }
      if (bt < cfg.max_backtracks) alpha *= cfg.rho;
    }
    if (!accepted) ++out.backtrack_exhaustions;
    if (!std::isfinite(rnorm_trial))
      throw std::runtime_error("run_newton: iteration produced non-finite values");

    u = std::move(u_trial);
    lambda = std::move(l_trial);
    f_mat = std::move(f_trial);
    gh = std::move(gh_trial);
    prev_rnorm = rnorm;
    rnorm = rnorm_trial;
    out.residual_history.push_back(rnorm);
    out.krylov_iterations.push_back(kr.stats.iterations);
    out.step_lengths.push_back(alpha);
    ++step;
  }

  out.converged = rnorm < cfg.tol;
  out.lambda = std::move(lambda);
  out.u = std::move(u);
  return out;
}

}  // namespace sgeig
