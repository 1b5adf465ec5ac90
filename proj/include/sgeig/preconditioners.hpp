#pragma once

// Preconditioners for the Galerkin systems. Two families:
//   - inverse-iteration systems: mean-based (MB) and hierarchical
//     Gauss-Seidel (hGS) sweeps over basis degree blocks;
//   - Newton saddle systems: mean-based (NMB), constraint mean-based (cMB)
//     and constraint hierarchical Gauss-Seidel (chGS), built around the
//     shifted mean block M1s = A1 - eps_m * mu * I and an anchor vector.
// Every apply is a linear map for a frozen state; factorizations are cached
// at construction and instances are safe to use concurrently on the shared
// immutable operator.

#include <cmath>
#include <memory>
#include <stdexcept>
#include <vector>

#include "sgeig/gpc.hpp"
#include "sgeig/linalg.hpp"
#include "sgeig/sg_operator.hpp"

namespace sgeig {

// (I (x) A1)^{-1}: one Cholesky of the mean matrix, applied columnwise.
class MeanPreconditioner {
 public:
  explicit MeanPreconditioner(const GalerkinOperator& op)
      : op_(op), chol_(cholesky(op.ops().A[0])) {}

  Matrix apply(const Matrix& r) const {
    Matrix v = r;
    for (int k = 0; k < v.cols(); ++k) cholesky_solve(chol_, v.col(k));
    op_.counters().precond_applies.fetch_add(1, std::memory_order_relaxed);
    op_.counters().mean_solves.fetch_add(v.cols(), std::memory_order_relaxed);
    return v;
  }

 private:
  const GalerkinOperator& op_;
  Matrix chol_;
};

// Symmetric block Gauss-Seidel over the degree blocks of the solution basis:
// forward then backward sweep sharing the top solve, diagonal blocks solved
// with the mean matrix, couplings truncated to the first n_t expansion terms.
// The induced matrix is (D + L) D^{-1} (D + L^T) with D = I (x) A1, hence
// symmetric positive definite. With p_t = 0 there are no couplings and the
// apply degenerates to the mean-based preconditioner.
class HierarchicalGsPreconditioner {
 public:
  HierarchicalGsPreconditioner(const GalerkinOperator& op, const GpcBasis& basis, int p_t)
      : op_(op), chol_(cholesky(op.ops().A[0])) {
    if (basis.size() != op.n_xi())
      throw std::invalid_argument("hgs: basis does not match the operator");
    if (p_t < 0 || p_t > basis.degree())
      throw std::invalid_argument("hgs: truncation degree out of range");
    for (int d = 0; d <= basis.degree(); ++d) edges_.push_back(basis.degree_begin(d));
    edges_.push_back(basis.size());
    n_t_ = basis.degree_end(p_t);
    if (n_t_ > op.n_terms()) n_t_ = op.n_terms();
  }

  int n_t() const { return n_t_; }

  Matrix apply(const Matrix& r) const {
    const int nx = op_.n_x();
    const int blocks = int(edges_.size()) - 1;
    Matrix v(nx, op_.n_xi());
    Matrix rhs;
    auto solve_block = [&](int d, const Matrix& rhs_d) {
      const int b = edges_[d], e = edges_[d + 1];
      for (int k = b; k < e; ++k) {
        double* vk = v.col(k);
        const double* rk = rhs_d.col(k - b);
        std::copy(rk, rk + nx, vk);
        cholesky_solve(chol_, vk);
      }
      op_.counters().mean_solves.fetch_add(e - b, std::memory_order_relaxed);
    };
    auto block_of = [&](const Matrix& src, int d) {
      const int b = edges_[d], e = edges_[d + 1];
      Matrix out(nx, e - b);
      for (int k = b; k < e; ++k) std::copy(src.col(k), src.col(k) + nx, out.col(k - b));
      return out;
    };
    // forward: couplings from higher blocks vanish on a zero initial solution
    for (int d = 0; d < blocks; ++d) {
      rhs = block_of(r, d);
      if (n_t_ > 1 && d > 0)
        rhs -= op_.block_matvec(v, edges_[d], edges_[d + 1], 0, edges_[d], n_t_);
      solve_block(d, rhs);
    }
    // backward: both lower and higher couplings, top block shared
    for (int d = blocks - 2; d >= 0; --d) {
      rhs = block_of(r, d);
      if (n_t_ > 1) {
        if (d > 0)
          rhs -= op_.block_matvec(v, edges_[d], edges_[d + 1], 0, edges_[d], n_t_);
        rhs -= op_.block_matvec(v, edges_[d], edges_[d + 1], edges_[d + 1], op_.n_xi(), n_t_);
      }
      solve_block(d, rhs);
    }
    op_.counters().precond_applies.fetch_add(1, std::memory_order_relaxed);
    return v;
  }

 private:
  const GalerkinOperator& op_;
  Matrix chol_;
  std::vector<int> edges_;
  int n_t_ = 1;
};

namespace detail {

// Shared core of the Newton-side preconditioners: the shifted mean block
// M = A1 - eps_m * mu * I paired with an anchor w in the saddle block
// [[M, -w], [-w^T, 0]]. The fixed path factors M with LU; the pseudoinverse
// path eigendecomposes M, drops modes below the rank cut, and solves the
// saddle block aware of a one-dimensional null space. A wider null space
// leaves the saddle block singular and is rejected.
class SaddleCore {
 public:
  SaddleCore(const Matrix& a1, Vec anchor, double mu, double eps_m, bool pseudo,
             double rank_cut)
      : n_(a1.rows()), w_(std::move(anchor)), pseudo_(pseudo) {
    if (int(w_.size()) != n_) throw std::invalid_argument("saddle: anchor size mismatch");
    Matrix m = a1;
    for (int i = 0; i < n_; ++i) m(i, i) -= eps_m * mu;
    if (pseudo_) {
      solver_ = std::make_unique<SymPseudoSolver>(m, rank_cut);
      const SymEigen& eig = solver_->eigen();
      double amax = 0.0;
      for (double v : eig.values) amax = std::max(amax, std::fabs(v));
      const double cut = rank_cut * amax;
      for (int i = 0; i < n_; ++i) {
        if (std::fabs(eig.values[i]) > cut) continue;
        if (null_dim_ == 0) null_vec_.assign(eig.vectors.col(i), eig.vectors.col(i) + n_);
        ++null_dim_;
      }
      if (null_dim_ > 1)
        throw std::runtime_error("saddle: mean block null space is not one-dimensional");
      if (null_dim_ == 1) {
        w_dot_null_ = dot(w_, null_vec_);
        if (std::fabs(w_dot_null_) < 1e-12 * std::max(1.0, nrm2(w_)))
          throw std::runtime_error("saddle: anchor orthogonal to the null space");
      }
    } else {
      lu_ = lu_factor(m);
    }
    if (null_dim_ == 0) {
      minv_w_ = w_;
      mean_solve(minv_w_.data());
      kappa_ = dot(w_, minv_w_);
      if (std::fabs(kappa_) < 1e-14 * std::max(1.0, dot(w_, w_)))
        throw std::runtime_error("saddle: anchor has zero mean-block energy");
    }
  }

  int n() const { return n_; }
  const Vec& anchor() const { return w_; }
  double kappa() const { return kappa_; }

  void mean_solve(double* b) const {
    if (pseudo_)
      solver_->solve(b);
    else
      lu_solve(lu_, b);
  }

  // [[M, -w], [-w^T, 0]] [v_u; v_l] = [r_u; r_l]
  void solve(const double* r_u, double r_l, double* v_u, double& v_l) const {
    if (null_dim_ == 0) {
      Vec t(r_u, r_u + n_);
      mean_solve(t.data());
      v_l = -(r_l + dot_ptr(w_.data(), t.data())) / kappa_;
      for (int i = 0; i < n_; ++i) v_u[i] = t[i] + v_l * minv_w_[i];
    } else {
      // solvability of the first row fixes v_l, the constraint row fixes the
      // null-space component
      double zr = 0.0;
      for (int i = 0; i < n_; ++i) zr += null_vec_[i] * r_u[i];
      v_l = -zr / w_dot_null_;
      Vec t(n_);
      for (int i = 0; i < n_; ++i) t[i] = r_u[i] + v_l * w_[i];
      mean_solve(t.data());
      const double gamma = -(r_l + dot_ptr(w_.data(), t.data())) / w_dot_null_;
      for (int i = 0; i < n_; ++i) v_u[i] = t[i] + gamma * null_vec_[i];
    }
  }

 private:
  double dot_ptr(const double* a, const double* b) const {
    double s = 0.0;
    for (int i = 0; i < n_; ++i) s += a[i] * b[i];
    return s;
  }

  int n_ = 0;
  Vec w_;
  bool pseudo_ = false;
  LuFactors lu_;
  std::unique_ptr<SymPseudoSolver> solver_;
  Vec minv_w_;
  double kappa_ = 0.0;
  Vec null_vec_;
  double w_dot_null_ = 0.0;
  int null_dim_ = 0;
};

}  // namespace detail

enum class AnchorMode { fixed, updated };

// Block-diagonal Newton preconditioner: per-column solves with the shifted
// mean block, and the multiplier block scaled by (w^T M^{-1} w)^{-1}.
class NewtonMeanPreconditioner {
 public:
  NewtonMeanPreconditioner(const GalerkinOperator& op, Vec anchor, double mu,
                           double eps_m = 0.95)
      : op_(op), core_(op.ops().A[0], std::move(anchor), mu, eps_m, false, 0.0) {}

  void apply(const Matrix& r_u, const Vec& r_lambda, Matrix& v_u, Vec& v_lambda) const {
    check(op_, r_u, r_lambda);
    v_u = r_u;
    for (int k = 0; k < v_u.cols(); ++k) core_.mean_solve(v_u.col(k));
    v_lambda.resize(r_lambda.size());
    for (std::size_t i = 0; i < r_lambda.size(); ++i) v_lambda[i] = r_lambda[i] / core_.kappa();
    op_.counters().precond_applies.fetch_add(1, std::memory_order_relaxed);
    op_.counters().mean_solves.fetch_add(v_u.cols(), std::memory_order_relaxed);
  }

  static void check(const GalerkinOperator& op, const Matrix& r_u, const Vec& r_lambda) {
    if (r_u.rows() != op.n_x() || r_u.cols() != op.n_xi() ||
        int(r_lambda.size()) != op.n_xi())
      throw std::invalid_argument("newton preconditioner: residual shape mismatch");
  }

 private:
  const GalerkinOperator& op_;
  detail::SaddleCore core_;
};

// Constraint mean-based preconditioner: one saddle block [[M1s, -w], [-w^T, 0]]
// solved independently for every basis index. Fixed mode factors M1s by LU;
// updated mode (eps_m = 1) goes through the pseudoinverse-aware saddle solve.
class ConstraintMeanPreconditioner {
 public:
  ConstraintMeanPreconditioner(const GalerkinOperator& op, Vec anchor, double mu,
                               AnchorMode mode, double eps_m, double rank_cut = 1e-10)
      : op_(op),
        core_(op.ops().A[0], std::move(anchor), mu, eps_m, mode == AnchorMode::updated,
              rank_cut) {}

  void apply(const Matrix& r_u, const Vec& r_lambda, Matrix& v_u, Vec& v_lambda) const {
    NewtonMeanPreconditioner::check(op_, r_u, r_lambda);
    v_u = Matrix(r_u.rows(), r_u.cols());
    v_lambda.assign(r_lambda.size(), 0.0);
    for (int k = 0; k < r_u.cols(); ++k)
      core_.solve(r_u.col(k), r_lambda[k], v_u.col(k), v_lambda[k]);
    op_.counters().precond_applies.fetch_add(1, std::memory_order_relaxed);
    op_.counters().mean_solves.fetch_add(r_u.cols(), std::memory_order_relaxed);
  }

  const detail::SaddleCore& core() const { return core_; }

 private:
  const GalerkinOperator& op_;
  detail::SaddleCore core_;
};

// Constraint hierarchical Gauss-Seidel: the hGS sweep on the Newton saddle
// system. Diagonal solves are the cMB saddle blocks; couplings between degree
// blocks take the truncated operator terms, the truncated eigenvalue shift,
// and the rank couplings through the truncated eigenvector coefficients, all
// with the signs of the Jacobian [[A(lambda), -B], [-B^T, 0]]. With p_t = 0
// every coupling vanishes and the apply equals the updated cMB.
class ConstraintHierarchicalGsPreconditioner {
 public:
  ConstraintHierarchicalGsPreconditioner(const GalerkinOperator& op, const GpcBasis& basis,
                                         int p_t, const Matrix& u_current,
                                         const Vec& lambda_current, double eps_m = 1.0,
                                         double rank_cut = 1e-10)
      : op_(op),
        core_(make_core(op, u_current, lambda_current, eps_m, rank_cut)),
        lambda_(lambda_current) {
    if (basis.size() != op.n_xi())
      throw std::invalid_argument("chgs: basis does not match the operator");
    if (p_t < 0 || p_t > basis.degree())
      throw std::invalid_argument("chgs: truncation degree out of range");
    if (op.n_terms() < op.n_xi())
      throw std::invalid_argument("chgs: operator lacks the shift expansion terms");
    for (int d = 0; d <= basis.degree(); ++d) edges_.push_back(basis.degree_begin(d));
    edges_.push_back(basis.size());
    n_t_ = basis.degree_end(p_t);
    if (n_t_ > op.n_terms()) n_t_ = op.n_terms();
    // truncated eigenvector coefficients and truncated eigenvalue shift
    w_trunc_ = Matrix(op.n_x(), n_t_);
    for (int j = 0; j < n_t_; ++j)
      std::copy(u_current.col(j), u_current.col(j) + op.n_x(), w_trunc_.col(j));
    shift_ = Matrix(op.n_xi(), op.n_xi());
    for (int t = 0; t < n_t_; ++t) {
      if (lambda_[t] == 0.0) continue;
      for (const TripleEntry& en : op.tensor().slices[t])
        shift_(en.k, en.j) += lambda_[t] * en.value;
    }
  }

  int n_t() const { return n_t_; }

  void apply(const Matrix& r_u, const Vec& r_lambda, Matrix& v_u, Vec& v_lambda) const {
    NewtonMeanPreconditioner::check(op_, r_u, r_lambda);
    const int nx = op_.n_x();
    const int blocks = int(edges_.size()) - 1;
    v_u = Matrix(nx, op_.n_xi());
    v_lambda.assign(op_.n_xi(), 0.0);
    Vec rhs_l(op_.n_xi());
    auto sweep_block = [&](int d, bool include_upper) {
      const int b = edges_[d], e = edges_[d + 1];
      Matrix rhs(nx, e - b);
      for (int k = b; k < e; ++k) {
        std::copy(r_u.col(k), r_u.col(k) + nx, rhs.col(k - b));
        rhs_l[k] = r_lambda[k];
      }
      if (n_t_ > 1) {
        if (d > 0) accumulate_coupling(rhs, rhs_l, v_u, v_lambda, b, e, 0, edges_[d]);
        if (include_upper && e < op_.n_xi())
          accumulate_coupling(rhs, rhs_l, v_u, v_lambda, b, e, e, op_.n_xi());
      }
      for (int k = b; k < e; ++k) core_.solve(rhs.col(k - b), rhs_l[k], v_u.col(k), v_lambda[k]);
      op_.counters().mean_solves.fetch_add(e - b, std::memory_order_relaxed);
    };
    for (int d = 0; d < blocks; ++d) sweep_block(d, false);
    for (int d = blocks - 2; d >= 0; --d) sweep_block(d, true);
    op_.counters().precond_applies.fetch_add(1, std::memory_order_relaxed);
  }

 private:
  static detail::SaddleCore make_core(const GalerkinOperator& op, const Matrix& u_current,
                                      const Vec& lambda_current, double eps_m,
                                      double rank_cut) {
    if (u_current.rows() != op.n_x() || u_current.cols() != op.n_xi() ||
        int(lambda_current.size()) != op.n_xi())
      throw std::invalid_argument("chgs: iterate shape mismatch");
    return detail::SaddleCore(op.ops().A[0],
                              Vec(u_current.col(0), u_current.col(0) + op.n_x()),
                              lambda_current[0], eps_m, true, rank_cut);
  }

  // rhs -= J(rows, cols) * current iterate, for the truncated Jacobian
  // approximation: operator terms minus eigenvalue shift in the (u,u) block,
  // rank couplings through w_trunc in the (u,lambda) blocks.
  void accumulate_coupling(Matrix& rhs, Vec& rhs_l, const Matrix& v_u, const Vec& v_lambda,
                           int row_begin, int row_end, int col_begin, int col_end) const {
    const int nx = op_.n_x();
    rhs -= op_.block_matvec(v_u, row_begin, row_end, col_begin, col_end, n_t_);
    for (int k = row_begin; k < row_end; ++k) {
      double* out = rhs.col(k - row_begin);
      for (int j = col_begin; j < col_end; ++j) {
        const double g = shift_(k, j);
        if (g == 0.0) continue;
        const double* vj = v_u.col(j);
        for (int i = 0; i < nx; ++i) out[i] += g * vj[i];
      }
    }
    // rank couplings: rhs_u += B v_lambda, rhs_l += B^T v_u on this block pair
    for (int i = col_begin; i < col_end; ++i) {
      if (v_lambda[i] == 0.0) continue;
      for (const TripleEntry& en : op_.tensor().slices[i]) {
        if (en.j >= n_t_ || en.k < row_begin || en.k >= row_end) continue;
        const double c = v_lambda[i] * en.value;
        const double* wj = w_trunc_.col(en.j);
        double* out = rhs.col(en.k - row_begin);
        for (int r = 0; r < nx; ++r) out[r] += c * wj[r];
      }
    }
    for (int i = row_begin; i < row_end; ++i) {
      double acc = 0.0;
      for (const TripleEntry& en : op_.tensor().slices[i]) {
        if (en.j >= n_t_ || en.k < col_begin || en.k >= col_end) continue;
        const double* wj = w_trunc_.col(en.j);
        const double* vk = v_u.col(en.k);
        double s = 0.0;
        for (int r = 0; r < nx; ++r) s += wj[r] * vk[r];
        acc += en.value * s;
      }
      rhs_l[i] += acc;
    }
  }

  const GalerkinOperator& op_;
  detail::SaddleCore core_;
  Vec lambda_;
  Matrix w_trunc_;
  Matrix shift_;
  std::vector<int> edges_;
  int n_t_ = 1;
};

}  // namespace sgeig
