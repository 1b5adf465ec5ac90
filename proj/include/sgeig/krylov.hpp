#pragma once

// Matrix-free Krylov solvers: PCG, full GMRES (left-preconditioned, modified
// Gram-Schmidt), and preconditioned MINRES. Operators and preconditioners are
// callbacks; every solve starts from a zero initial guess and owns its
// workspace, so concurrent solves on shared immutable operators are safe.

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "sgeig/linalg.hpp"

namespace sgeig {

// y = op(x); y is sized by the callee or assumed preallocated to x.size().
using LinearMap = std::function<void(const Vec&, Vec&)>;

inline LinearMap identity_preconditioner() {
  return [](const Vec& r, Vec& z) { z = r; };
}

struct SolveStats {
  int iterations = 0;
  double final_relres = 0.0;
  bool converged = false;
  bool breakdown = false;
  // monitored relative residual after each iteration; PCG monitors the true
  // residual 2-norm, GMRES and MINRES the preconditioned residual norm
  std::vector<double> residual_history;
};

struct KrylovResult {
  Vec x;
  SolveStats stats;
};

// Conjugate gradients with an SPD preconditioner. Stops on the true residual
// 2-norm relative to ‖b‖. Nonpositive curvature in either inner product sets
// the breakdown flag and returns the current iterate.
inline KrylovResult pcg(const LinearMap& apply, const LinearMap& precond, const Vec& b,
                        double tol, int maxit = 500) {
  const std::size_t n = b.size();
  KrylovResult out;
  out.x.assign(n, 0.0);
  const double bnorm = nrm2(b);
  if (bnorm == 0.0) {
    out.stats.converged = true;
    return out;
  }
  Vec r = b, z(n), p(n), ap(n);
  precond(r, z);
  double rz = dot(r, z);
  if (rz <= 0.0) {
    out.stats.breakdown = true;
    out.stats.final_relres = 1.0;
    return out;
  }
  p = z;
  for (int it = 1; it <= maxit; ++it) {
    apply(p, ap);
    const double pap = dot(p, ap);
    if (pap <= 0.0) {
      out.stats.breakdown = true;
      break;
    }
    const double alpha = rz / pap;
    axpy(alpha, p, out.x);
    axpy(-alpha, ap, r);
    const double relres = nrm2(r) / bnorm;
    out.stats.iterations = it;
    out.stats.final_relres = relres;
    out.stats.residual_history.push_back(relres);
    if (relres <= tol) {
      out.stats.converged = true;
      break;
    }
    precond(r, z);
    const double rz_next = dot(r, z);
    if (rz_next <= 0.0) {
      out.stats.breakdown = true;
      break;
    }
    const double beta = rz_next / rz;
    rz = rz_next;
    for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }
  return out;
}

// Full GMRES, left preconditioning: builds the Krylov space of M^{-1}A and
// monitors ‖M^{-1}(b - Ax)‖ relative to ‖M^{-1}b‖. No restarts; a vanishing
// new basis vector is the exact-solution case and counts as convergence.
inline KrylovResult gmres(const LinearMap& apply, const LinearMap& precond, const Vec& b,
                          double tol, int maxit = 500) {
  const std::size_t n = b.size();
  KrylovResult out;
  out.x.assign(n, 0.0);
  if (nrm2(b) == 0.0) {
    out.stats.converged = true;
    return out;
  }
  Vec z(n);
  precond(b, z);
  const double beta = nrm2(z);
  if (beta == 0.0) {
    out.stats.breakdown = true;  // preconditioner annihilated the right-hand side
    out.stats.final_relres = 1.0;
    return out;
  }
  std::vector<Vec> basis;
  basis.push_back(z);
  scal(1.0 / beta, basis[0]);
  std::vector<Vec> hcols;          // Hessenberg columns after Givens rotations
  std::vector<double> gc, gs, g;   // rotation cosines/sines, transformed rhs
  g.push_back(beta);
  Vec t(n), w(n);
  int k = 0;
  for (int j = 0; j < maxit; ++j) {
    apply(basis[j], t);
    precond(t, w);
    const double wnorm0 = nrm2(w);
    Vec h(j + 2, 0.0);
    for (int i = 0; i <= j; ++i) {
      h[i] = dot(w, basis[i]);
      axpy(-h[i], basis[i], w);
    }
    const double hlast = nrm2(w);
    h[j + 1] = hlast;
    for (int i = 0; i < j; ++i) {
      const double tmp = gc[i] * h[i] + gs[i] * h[i + 1];
      h[i + 1] = -gs[i] * h[i] + gc[i] * h[i + 1];
      h[i] = tmp;
    }
    const double denom = std::hypot(h[j], h[j + 1]);
    const double c = (denom == 0.0) ? 1.0 : h[j] / denom;
    const double s = (denom == 0.0) ? 0.0 : h[j + 1] / denom;
    gc.push_back(c);
    gs.push_back(s);
    h[j] = denom;
    h[j + 1] = 0.0;
    g.push_back(-s * g[j]);
    g[j] = c * g[j];
    hcols.push_back(std::move(h));
    k = j + 1;
    const double relres = std::fabs(g[j + 1]) / beta;
    out.stats.iterations = k;
    out.stats.final_relres = relres;
    out.stats.residual_history.push_back(relres);
    if (relres <= tol || hlast <= 1e-14 * std::max(wnorm0, 1e-300)) {
      out.stats.converged = true;
      break;
    }
    if (j + 1 < maxit) {
      scal(1.0 / hlast, w);
      basis.push_back(w);
    }
  }
  // back substitution on the triangularized Hessenberg system
  Vec y(k, 0.0);
  for (int i = k - 1; i >= 0; --i) {
    double s = g[i];
    for (int l = i + 1; l < k; ++l) s -= hcols[l][i] * y[l];
    y[i] = s / hcols[i][i];
  }
  for (int i = 0; i < k; ++i) axpy(y[i], basis[i], out.x);
  return out;
}

// Preconditioned MINRES for symmetric (possibly indefinite) systems. The
// preconditioner must be SPD; a nonpositive Lanczos inner product is a hard
// error, not a flag, because it means the caller wired an invalid pairing.
// Monitors the residual norm induced by the preconditioner.
inline KrylovResult minres(const LinearMap& apply, const LinearMap& precond, const Vec& b,
                           double tol, int maxit = 500) {
  const std::size_t n = b.size();
  KrylovResult out;
  out.x.assign(n, 0.0);
  if (nrm2(b) == 0.0) {
    out.stats.converged = true;
    return out;
  }
  Vec r1 = b, r2 = b, y(n);
  precond(r1, y);
  double beta1 = dot(r1, y);
  if (beta1 < 0.0) throw std::runtime_error("minres: preconditioner is not positive definite");
  if (beta1 == 0.0) {
    out.stats.converged = true;
    return out;
  }
  beta1 = std::sqrt(beta1);
  double oldb = 0.0, beta = beta1, dbar = 0.0, epsln = 0.0, phibar = beta1;
  double cs = -1.0, sn = 0.0;
  Vec v(n), t(n), w(n, 0.0), w1(n, 0.0), w2(n, 0.0);
  for (int it = 1; it <= maxit; ++it) {
    const double s = 1.0 / beta;
    for (std::size_t i = 0; i < n; ++i) v[i] = s * y[i];
    apply(v, t);
    if (it >= 2) axpy(-beta / oldb, r1, t);
    const double alfa = dot(v, t);
    axpy(-alfa / beta, r2, t);
    r1 = r2;
    r2 = t;
    precond(r2, y);
    oldb = beta;
    const double betasq = dot(r2, y);
    if (betasq < 0.0)
      throw std::runtime_error("minres: preconditioner is not positive definite");
    beta = std::sqrt(betasq);
    const double oldeps = epsln;
    const double delta = cs * dbar + sn * alfa;
    const double gbar = sn * dbar - cs * alfa;
    epsln = sn * beta;
    dbar = -cs * beta;
    double gamma = std::hypot(gbar, beta);
    gamma = std::max(gamma, 1e-300);
    cs = gbar / gamma;
    sn = beta / gamma;
    const double phi = cs * phibar;
    phibar = sn * phibar;
    std::swap(w1, w2);
    std::swap(w2, w);
    for (std::size_t i = 0; i < n; ++i) w[i] = (v[i] - oldeps * w1[i] - delta * w2[i]) / gamma;
    axpy(phi, w, out.x);
    const double relres = phibar / beta1;
    out.stats.iterations = it;
    out.stats.final_relres = relres;
    out.stats.residual_history.push_back(relres);
    if (relres <= tol) {
      out.stats.converged = true;
      break;
    }
    if (beta == 0.0) {  // invariant subspace reached: the iterate is exact
      out.stats.converged = true;
      break;
    }
  }
  return out;
}

}  // namespace sgeig
