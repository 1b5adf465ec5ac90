#pragma once

// Sampling baselines for the stochastic eigenproblem: plain Monte Carlo over
// the input distribution (eigenvalue ensembles only) and sparse-grid
// stochastic collocation with chaos-coefficient projection. Both evaluate
// A(xi) = sum_l A_l psi_l(xi) and run dense symmetric eigensolves per sample.

#include <atomic>
#include <cstdint>
#include <mutex>
#include <random>
#include <stdexcept>
#include <thread>
#include <vector>

#include "sgeig/fem.hpp"
#include "sgeig/gpc.hpp"
#include "sgeig/linalg.hpp"
#include "sgeig/quadrature.hpp"

namespace sgeig {

enum class SampleMethod { monte_carlo, collocation };

struct SampleRun {
  SampleMethod method = SampleMethod::monte_carlo;
  int n_s = 0;
  Matrix points;       // one sample per row
  Vec weights;         // quadrature weights (collocation only)
  Matrix eigenvalues;  // n_points x n_s, ascending within each row
  Vec mean;            // per eigenpair
  Vec variance;        // per eigenpair

  // Collocation only: projected chaos coefficients.
  Matrix lambda_coeffs;               // n_xi x n_s
  std::vector<Matrix> vector_coeffs;  // per eigenpair, n_x x n_xi

  int n_points() const { return eigenvalues.rows(); }
};

inline Matrix sample_operator(const OperatorSet& ops, const GpcBasis& basis_a,
                              const double* xi) {
  if (ops.n_a() != basis_a.size())
    throw std::invalid_argument("sample_operator: term count does not match basis");
  Vec psi(basis_a.size());
  basis_a.eval(xi, psi.data());
  Matrix a(ops.n_x, ops.n_x);
  double* dst = a.data();
  for (int l = 0; l < ops.n_a(); ++l) {
    const double w = psi[l];
    if (w == 0.0) continue;
    const double* src = ops.A[l].data();
    for (std::size_t i = 0; i < a.size(); ++i) dst[i] += w * src[i];
  }
  return a;
}

inline Matrix sample_operator(const OperatorSet& ops, const GpcBasis& basis_a, const Vec& xi) {
  if (int(xi.size()) != basis_a.m_xi())
    throw std::invalid_argument("sample_operator: point dimension does not match basis");
  return sample_operator(ops, basis_a, xi.data());
}

namespace detail {

// splitmix-style finalizer; every sample gets its own engine so the ensemble
// does not depend on how samples are scheduled across workers.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Runs body(0..n-1) on up to `jobs` threads. The first exception thrown by
// any worker is rethrown here after all of them join.
template <class F>
inline void parallel_for(int n, int jobs, F&& body) {
  if (jobs <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  const int workers = std::min(jobs, n);
  std::atomic<int> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int t = 0; t < workers; ++t)
    pool.emplace_back([&] {
      try {
        for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    });
  for (std::thread& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

// Orthogonal polar factor of a small square matrix: the Procrustes rotation
// R maximizing trace(R^T m). Requires m nonsingular.
inline Matrix polar_orthogonal(const Matrix& m) {
  SymEigen e = sym_eigen(matmul_tn(m, m));
  const int k = m.cols();
  if (e.values[0] <= 1e-12 * std::max(e.values[k - 1], 1e-300))
    throw std::runtime_error(
        "collocation_run: sampled eigenspace is nearly orthogonal to the mean one");
  Matrix inv_root(k, k);  // (m^T m)^{-1/2}
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) {
      double s = 0.0;
      for (int l = 0; l < k; ++l)
        s += e.vectors(i, l) * e.vectors(j, l) / std::sqrt(e.values[l]);
      inv_root(i, j) = s;
    }
  return matmul(m, inv_root);
}

}  // namespace detail

// Gauge fixing of sampled eigenvectors against the mean eigenvectors: a sign
// flip for simple eigenvalues, an orthogonal Procrustes rotation within the
// sampled eigenspace for a repeated cluster. Spans are unchanged.
inline void align_to_mean(Matrix& u, const MeanEigenpairs& mean) {
  const int n_x = u.rows();
  const int n_s = u.cols();
  int s = 0;
  while (s < n_s) {
    int e = s + 1;
    while (e < n_s && mean.cluster[e] == mean.cluster[s]) ++e;
    const int k = e - s;
    if (k == 1) {
      if (dot(n_x, u.col(s), mean.vectors.col(s)) < 0.0)
        for (int i = 0; i < n_x; ++i) u.col(s)[i] = -u.col(s)[i];
    } else {
      Matrix uc(n_x, k), wc(n_x, k);
      for (int j = 0; j < k; ++j) {
        std::copy_n(u.col(s + j), n_x, uc.col(j));
        std::copy_n(mean.vectors.col(s + j), n_x, wc.col(j));
      }
      Matrix rotated = matmul(uc, detail::polar_orthogonal(matmul_tn(uc, wc)));
      for (int j = 0; j < k; ++j) std::copy_n(rotated.col(j), n_x, u.col(s + j));
    }
    s = e;
  }
}

namespace detail {

inline void sampling_checks(const OperatorSet& ops, const GpcBasis& basis_a, int n_s,
                            const char* where) {
  if (ops.n_a() != basis_a.size())
    throw std::invalid_argument(std::string(where) + ": term count does not match basis");
  if (n_s < 1 || n_s > ops.n_x)
    throw std::invalid_argument(std::string(where) + ": eigenpair count out of range");
}

}  // namespace detail

// Eigenvalue ensemble over random draws of the input variables. No chaos
// projections: the raw samples are the product. Per-sample seeding keeps the
// result independent of the worker count; the reductions run in index order,
// so a (seed, n_samples) pair fully determines every output bit.
inline SampleRun monte_carlo_run(const OperatorSet& ops, const GpcBasis& basis_a,
                                 int n_samples, std::uint64_t seed, int n_s, int jobs = 1) {
  detail::sampling_checks(ops, basis_a, n_s, "monte_carlo_run");
  if (n_samples < 1) throw std::invalid_argument("monte_carlo_run: need at least one sample");

  const int m = basis_a.m_xi();
  SampleRun run;
  run.method = SampleMethod::monte_carlo;
  run.n_s = n_s;
  run.points = Matrix(n_samples, m);
  run.eigenvalues = Matrix(n_samples, n_s);

  detail::parallel_for(n_samples, jobs, [&](int q) {
    std::mt19937_64 engine(detail::mix_seed(seed, std::uint64_t(q)));
    Vec xi(m);
    if (basis_a.family() == Family::hermite) {
      std::normal_distribution<double> draw(0.0, 1.0);
      for (int v = 0; v < m; ++v) xi[v] = draw(engine);
    } else {
      std::uniform_real_distribution<double> draw(-1.0, 1.0);
      for (int v = 0; v < m; ++v) xi[v] = draw(engine);
    }
    for (int v = 0; v < m; ++v) run.points(q, v) = xi[v];
    Vec values = sym_eigenvalues(sample_operator(ops, basis_a, xi.data()));
    for (int s = 0; s < n_s; ++s) run.eigenvalues(q, s) = values[s];
  });

  run.mean.assign(n_s, 0.0);
  run.variance.assign(n_s, 0.0);
  for (int s = 0; s < n_s; ++s) {
    double m1 = 0.0;
    for (int q = 0; q < n_samples; ++q) m1 += run.eigenvalues(q, s);
    m1 /= n_samples;
    double m2 = 0.0;
    for (int q = 0; q < n_samples; ++q) {
      const double d = run.eigenvalues(q, s) - m1;
      m2 += d * d;
    }
    run.mean[s] = m1;
    run.variance[s] = n_samples > 1 ? m2 / (n_samples - 1) : 0.0;
  }
  return run;
}

// Dense eigensolve at every grid point, eigenpairs matched by sorted order
// and gauge-aligned to the mean eigenvectors, then projected onto the
// solution basis by the grid quadrature. The projection sums over points in
// index order regardless of the worker count.
inline SampleRun collocation_run(const OperatorSet& ops, const GpcBasis& basis_a,
                                 const GpcBasis& basis_sol, const SparseGrid& grid, int n_s,
                                 int jobs = 1) {
  detail::sampling_checks(ops, basis_a, n_s, "collocation_run");
  if (basis_a.family() != basis_sol.family() || basis_a.m_xi() != basis_sol.m_xi())
    throw std::invalid_argument("collocation_run: coefficient and solution bases disagree");
  if (grid.family != basis_a.family())
    throw std::invalid_argument("collocation_run: grid family does not match basis");
  if (grid.size() == 0) throw std::invalid_argument("collocation_run: empty grid");
  if (int(grid.points[0].size()) != basis_a.m_xi())
    throw std::invalid_argument("collocation_run: grid dimension does not match basis");

  const int n_q = int(grid.size());
  const int n_x = ops.n_x;
  const int n_xi = basis_sol.size();
  const MeanEigenpairs mean = mean_eigenpairs(ops.A[0], n_s);

  SampleRun run;
  run.method = SampleMethod::collocation;
  run.n_s = n_s;
  run.points = Matrix(n_q, basis_a.m_xi());
  run.weights = grid.weights;
  run.eigenvalues = Matrix(n_q, n_s);

  std::vector<Matrix> vectors(n_q);
  detail::parallel_for(n_q, jobs, [&](int q) {
    const Vec& xi = grid.points[q];
    for (int v = 0; v < int(xi.size()); ++v) run.points(q, v) = xi[v];
    SymEigen e = sym_eigen(sample_operator(ops, basis_a, xi.data()));
    Matrix u(n_x, n_s);
    for (int s = 0; s < n_s; ++s) {
      run.eigenvalues(q, s) = e.values[s];
      std::copy_n(e.vectors.col(s), n_x, u.col(s));
    }
    align_to_mean(u, mean);
    vectors[q] = std::move(u);
  });

  run.lambda_coeffs = Matrix(n_xi, n_s);
  run.vector_coeffs.assign(n_s, Matrix(n_x, n_xi));
  Vec psi(n_xi);
  for (int q = 0; q < n_q; ++q) {
    basis_sol.eval(grid.points[q].data(), psi.data());
    const double w = grid.weights[q];
    for (int s = 0; s < n_s; ++s)
      for (int k = 0; k < n_xi; ++k) {
        run.lambda_coeffs(k, s) += w * psi[k] * run.eigenvalues(q, s);
        axpy(n_x, w * psi[k], vectors[q].col(s), run.vector_coeffs[s].col(k));
      }
  }

  run.mean.assign(n_s, 0.0);
  run.variance.assign(n_s, 0.0);
  for (int s = 0; s < n_s; ++s) {
    run.mean[s] = run.lambda_coeffs(0, s);
    double v = 0.0;
    for (int k = 1; k < n_xi; ++k) v += run.lambda_coeffs(k, s) * run.lambda_coeffs(k, s);
    run.variance[s] = v;
  }
  return run;
}

}  // namespace sgeig
