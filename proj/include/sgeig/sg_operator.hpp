#pragma once

// Implicit stochastic Galerkin operator sum_l H_l (x) A_l. All kernels work
// on the matricized coefficients U (n_x rows, one column per solution basis
// function) and never assemble the Kronecker matrix; explicit assembly exists
// only in the tests as an oracle.

#include <atomic>
#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "sgeig/fem.hpp"
#include "sgeig/gpc.hpp"
#include "sgeig/linalg.hpp"

namespace sgeig {

// Work tallies for the cost report. One instance is shared by every solver
// component touching the same operator, possibly from several threads, so the
// fields are atomic. block_columns counts single-column A_t products inside
// truncated block applies; one full matvec costs `matvec_columns()` of those.
struct CostCounters {
  std::atomic<long long> full_matvecs{0};
  std::atomic<long long> block_columns{0};
  std::atomic<long long> precond_applies{0};
  std::atomic<long long> mean_solves{0};

  struct Snapshot {
    long long full_matvecs = 0;
    long long block_columns = 0;
    long long precond_applies = 0;
    long long mean_solves = 0;
  };

  Snapshot snapshot() const {
    return {full_matvecs.load(), block_columns.load(), precond_applies.load(),
            mean_solves.load()};
  }

  void reset() {
    full_matvecs = 0;
    block_columns = 0;
    precond_applies = 0;
    mean_solves = 0;
  }

  // folds counts gathered on a temporary operator back into this one
  void add(const Snapshot& s) {
    full_matvecs += s.full_matvecs;
    block_columns += s.block_columns;
    precond_applies += s.precond_applies;
    mean_solves += s.mean_solves;
  }
};

class GalerkinOperator {
 public:
  GalerkinOperator(OperatorSet ops, TripleProductTensor tensor)
      : ops_(std::move(ops)), tensor_(std::move(tensor)) {
    if (tensor_.n_a != ops_.n_a())
      throw std::invalid_argument("GalerkinOperator: term count mismatch");
    if (tensor_.n_xi < 1) throw std::invalid_argument("GalerkinOperator: empty basis");
    // Per-slice apply plan: the distinct input columns touched by the slice,
    // and each nonzero rewritten against its local column slot.
    plan_.resize(tensor_.n_a);
    for (int l = 0; l < tensor_.n_a; ++l) {
      SlicePlan& p = plan_[l];
      std::vector<int> local(tensor_.n_xi, -1);
      for (const TripleEntry& en : tensor_.slices[l]) {
        if (local[en.j] < 0) {
          local[en.j] = int(p.cols.size());
          p.cols.push_back(en.j);
        }
        p.terms.push_back({en.k, local[en.j], en.value});
      }
      max_cols_ = std::max(max_cols_, int(p.cols.size()));
    }
  }

  GalerkinOperator(const GalerkinOperator&) = delete;
  GalerkinOperator& operator=(const GalerkinOperator&) = delete;

  int n_x() const { return ops_.n_x; }
  int n_xi() const { return tensor_.n_xi; }
  int n_terms() const { return ops_.n_a(); }

  const OperatorSet& ops() const { return ops_; }
  const TripleProductTensor& tensor() const { return tensor_; }
  CostCounters& counters() const { return counters_; }

  // Dense column products one full matvec performs.
  long long matvec_columns() const {
    long long n = 0;
    for (const SlicePlan& p : plan_) n += static_cast<long long>(p.cols.size());
    return n;
  }

  // V = sum_l A_l U H_l^T
  Matrix matvec(const Matrix& u) const {
    check_shape(u);
    Matrix v(n_x(), n_xi());
    Matrix scratch(n_x(), max_cols_);
    const int nx = n_x();
    for (int l = 0; l < n_terms(); ++l) {
      const SlicePlan& p = plan_[l];
      if (p.terms.empty()) continue;
      const Matrix& a = ops_.A[l];
      for (std::size_t c = 0; c < p.cols.size(); ++c)
        sgeig::matvec(a, u.col(p.cols[c]), scratch.col(int(c)));
      for (const PlanTerm& t : p.terms) {
        const double* w = scratch.col(t.local_col);
        double* vk = v.col(t.out_col);
        for (int i = 0; i < nx; ++i) vk[i] += t.value * w[i];
      }
    }
    counters_.full_matvecs.fetch_add(1, std::memory_order_relaxed);
    return v;
  }

  // Block-restricted truncated apply: columns [row_begin, row_end) of the
  // result, reading columns [col_begin, col_end) of u, using only the first
  // n_t expansion terms. Result column i corresponds to basis index
  // row_begin + i.
  Matrix block_matvec(const Matrix& u, int row_begin, int row_end,
                      int col_begin, int col_end, int n_t) const {
    check_shape(u);
    if (row_begin < 0 || row_begin >= row_end || row_end > n_xi() ||
        col_begin < 0 || col_begin >= col_end || col_end > n_xi())
      throw std::invalid_argument("block_matvec: empty or out-of-range block");
    if (n_t < 1 || n_t > n_terms())
      throw std::invalid_argument("block_matvec: bad term count");
    const int nx = n_x();
    Matrix v(nx, row_end - row_begin);
    Matrix scratch(nx, col_end - col_begin);
    std::vector<int> local(n_xi());
    long long products = 0;
    for (int l = 0; l < n_t; ++l) {
      std::fill(local.begin(), local.end(), -1);
      int used = 0;
      for (const TripleEntry& en : tensor_.slices[l]) {
        if (en.k < row_begin || en.k >= row_end) continue;
        if (en.j < col_begin || en.j >= col_end) continue;
        if (local[en.j] < 0) {
          local[en.j] = used;
          sgeig::matvec(ops_.A[l], u.col(en.j), scratch.col(used));
          ++used;
          ++products;
        }
        const double* w = scratch.col(local[en.j]);
        double* vk = v.col(en.k - row_begin);
        for (int i = 0; i < nx; ++i) vk[i] += en.value * w[i];
      }
    }
    counters_.block_columns.fetch_add(products, std::memory_order_relaxed);
    return v;
  }

  // matvec(u) - sum_i lambda_i U H_i^T, the residual operator for a scalar
  // expansion lambda. The shift slices are the leading slices of the tensor
  // (the solution basis is the leading block of the coefficient basis), so
  // any shift term beyond the stored expansion must vanish.
  Matrix apply_shifted(const Matrix& u, const Vec& lambda) const {
    check_shape(u);
    if (int(lambda.size()) != n_xi())
      throw std::invalid_argument("apply_shifted: shift length mismatch");
    for (int i = n_terms(); i < n_xi(); ++i)
      if (lambda[i] != 0.0)
        throw std::invalid_argument("apply_shifted: shift term beyond stored expansion");
    Matrix v = matvec(u);
    Matrix g(n_xi(), n_xi());
    const int ni = std::min(n_terms(), n_xi());
    for (int i = 0; i < ni; ++i) {
      if (lambda[i] == 0.0) continue;
      for (const TripleEntry& en : tensor_.slices[i]) g(en.k, en.j) += lambda[i] * en.value;
    }
    v -= matmul(u, g);  // g is symmetric: both orderings of every pair are stored
    return v;
  }

 private:
  struct PlanTerm {
    int out_col;
    int local_col;
    double value;
  };
  struct SlicePlan {
    std::vector<int> cols;
    std::vector<PlanTerm> terms;
  };

  void check_shape(const Matrix& u) const {
    if (u.rows() != n_x() || u.cols() != n_xi())
      throw std::invalid_argument("GalerkinOperator: coefficient shape mismatch");
  }

  OperatorSet ops_;
  TripleProductTensor tensor_;
  std::vector<SlicePlan> plan_;
  int max_cols_ = 0;
  mutable CostCounters counters_;
};

// Convergence indicators of a residual expansion: the 2-norm of the mean
// column, and the 2-norm of the columnwise sum of squares over the
// higher-order columns (a variance-like magnitude).
inline std::pair<double, double> residual_indicators(const Matrix& r) {
  double mean_sq = 0.0;
  const double* c0 = r.col(0);
  for (int i = 0; i < r.rows(); ++i) mean_sq += c0[i] * c0[i];
  Vec s(r.rows(), 0.0);
  for (int k = 1; k < r.cols(); ++k) {
    const double* ck = r.col(k);
    for (int i = 0; i < r.rows(); ++i) s[i] += ck[i] * ck[i];
  }
  return {std::sqrt(mean_sq), nrm2(s)};
}

}  // namespace sgeig
