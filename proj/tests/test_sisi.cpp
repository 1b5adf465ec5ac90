#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numeric>
#include <random>

#include "sgeig/sisi.hpp"
#include "test_helpers.hpp"

using namespace sgeig;
using namespace sgeig::testing;

namespace {

struct Instance {
  GalerkinOperator op;
  GpcBasis basis_a;
  GpcBasis basis_sol;
  SparseGrid grid;
};

Instance make_instance(int m_xi, int p, int n_x, unsigned seed, double diag_shift = 4.0,
                       double decay = 0.3) {
  GpcBasis basis_a(Family::hermite, m_xi, 2 * p);
  GpcBasis basis_sol(Family::hermite, m_xi, p);
  std::mt19937 rng(seed);
  OperatorSet ops = random_operator_set(n_x, basis_a.size(), rng, diag_shift, decay);
  TripleProductTensor t = triple_product_tensor(basis_a, basis_sol);
  SparseGrid grid = smolyak(Family::hermite, m_xi, 3);
  return {GalerkinOperator(std::move(ops), std::move(t)), std::move(basis_a),
          std::move(basis_sol), std::move(grid)};
}

Instance make_deterministic(int m_xi, int p, int n_x, unsigned seed) {
  GpcBasis basis_a(Family::hermite, m_xi, 0);
  GpcBasis basis_sol(Family::hermite, m_xi, p);
  std::mt19937 rng(seed);
  OperatorSet ops;
  ops.n_x = n_x;
  ops.A.push_back(random_symmetric(n_x, rng, 4.0));
  TripleProductTensor t = triple_product_tensor(basis_a, basis_sol);
  SparseGrid grid = smolyak(Family::hermite, m_xi, 3);
  return {GalerkinOperator(std::move(ops), std::move(t)), std::move(basis_a),
          std::move(basis_sol), std::move(grid)};
}

// well-separated mean spectrum with a mild stochastic part, so the iteration
// contracts fast and its truncation floor sits well below the thresholds
Instance make_gapped(int m_xi, int p, int n_x, unsigned seed, double decay = 0.05) {
  GpcBasis basis_a(Family::hermite, m_xi, 2 * p);
  GpcBasis basis_sol(Family::hermite, m_xi, p);
  std::mt19937 rng(seed);
  OperatorSet ops;
  ops.n_x = n_x;
  Matrix a1 = random_symmetric(n_x, rng);
  a1 *= 0.05;
  for (int i = 0; i < n_x; ++i) a1(i, i) += 1.0 + 1.5 * i + (i > 0 ? 1.0 : 0.0);
  ops.A.push_back(a1);
  for (int l = 1; l < basis_a.size(); ++l) {
    Matrix m = random_symmetric(n_x, rng);
    m *= decay / double(l);
    ops.A.push_back(m);
  }
  TripleProductTensor t = triple_product_tensor(basis_a, basis_sol);
  SparseGrid grid = smolyak(Family::hermite, m_xi, 3);
  return {GalerkinOperator(std::move(ops), std::move(t)), std::move(basis_a),
          std::move(basis_sol), std::move(grid)};
}

// evaluate a coefficient matrix at a parameter point
Vec eval_field(const Matrix& u, const GpcBasis& basis, const double* xi) {
  Vec psi(basis.size());
  basis.eval(xi, psi.data());
  Vec val(u.rows(), 0.0);
  for (int k = 0; k < u.cols(); ++k) axpy(u.rows(), psi[k], u.col(k), val.data());
  return val;
}

double rel_diff(const Matrix& a, const Matrix& b) {
  Matrix d = a;
  d -= b;
  return d.frobenius() / std::max(1e-300, b.frobenius());
}

}  // namespace

TEST_CASE("rayleigh quotient mean coefficient is the trace identity") {
  Instance inst = make_instance(2, 2, 4, 40);
  std::mt19937 rng(41);
  Matrix u = random_matrix(4, inst.op.n_xi(), rng);
  Vec lambda = rayleigh_quotient(inst.op, u);
  Matrix v = inst.op.matvec(u);
  double tr = 0.0;
  for (int k = 0; k < inst.op.n_xi(); ++k) tr += dot(4, u.col(k), v.col(k));
  REQUIRE(lambda[0] == Catch::Approx(tr).epsilon(1e-13));
}

TEST_CASE("rayleigh quotient of a deterministic eigenvector") {
  Instance inst = make_deterministic(2, 2, 5, 42);
  SymEigen eig = sym_eigen(inst.op.ops().A[0]);
  Matrix u(5, inst.op.n_xi());
  std::copy(eig.vectors.col(0), eig.vectors.col(0) + 5, u.col(0));
  Vec lambda = rayleigh_quotient(inst.op, u);
  REQUIRE(lambda[0] == Catch::Approx(eig.values[0]).epsilon(1e-13));
  for (int k = 1; k < inst.op.n_xi(); ++k) REQUIRE(std::fabs(lambda[k]) < 1e-14);
}

namespace {

// dense tensor Gauss-Hermite projection of u(xi)^T A(xi) u(xi) onto psi_k
Vec quadrature_rq(const Instance& inst, const Matrix& u) {
  Rule1D r1 = gauss_rule(Family::hermite, 10);
  const int n_x = u.rows();
  const int n_xi = inst.op.n_xi();
  Vec proj(n_xi, 0.0);
  Vec psi_s(n_xi), psi_a(inst.basis_a.size());
  for (std::size_t qa = 0; qa < r1.nodes.size(); ++qa)
    for (std::size_t qb = 0; qb < r1.nodes.size(); ++qb) {
      const double xi[2] = {r1.nodes[qa], r1.nodes[qb]};
      const double w = r1.weights[qa] * r1.weights[qb];
      inst.basis_sol.eval(xi, psi_s.data());
      inst.basis_a.eval(xi, psi_a.data());
      Vec uval = eval_field(u, inst.basis_sol, xi);
      Matrix a_at(n_x, n_x);
      for (int l = 0; l < inst.basis_a.size(); ++l) {
        Matrix term = inst.op.ops().A[l];
        term *= psi_a[l];
        a_at += term;
      }
      Vec av;
      matvec(a_at, uval, av);
      const double quad = dot(n_x, uval.data(), av.data());
      for (int k = 0; k < n_xi; ++k) proj[k] += w * quad * psi_s[k];
    }
  return proj;
}

}  // namespace

TEST_CASE("rayleigh quotient equals the quadrature projection") {
  Instance inst = make_instance(2, 1, 3, 43);
  std::mt19937 rng(44);

  // a parameter-independent vector: projection and Galerkin contraction agree
  // exactly because no product of fluctuating factors gets truncated
  Matrix u0(3, inst.op.n_xi());
  u0(0, 0) = 0.6;
  u0(1, 0) = -1.1;
  u0(2, 0) = 0.25;
  Vec lam0 = rayleigh_quotient(inst.op, u0);
  Vec ref0 = quadrature_rq(inst, u0);
  for (int k = 0; k < inst.op.n_xi(); ++k)
    REQUIRE(lam0[k] == Catch::Approx(ref0[k]).margin(1e-12));

  // a mildly fluctuating vector agrees to the truncation tolerance
  Matrix u = u0;
  std::uniform_real_distribution<double> pert(-1e-6, 1e-6);
  for (int k = 1; k < inst.op.n_xi(); ++k)
    for (int i = 0; i < 3; ++i) u(i, k) = pert(rng);
  Vec lam = rayleigh_quotient(inst.op, u);
  Vec ref = quadrature_rq(inst, u);
  for (int k = 0; k < inst.op.n_xi(); ++k)
    REQUIRE(lam[k] == Catch::Approx(ref[k]).margin(1e-6));
}

TEST_CASE("normalize keeps a constant field and scales it to unit length") {
  GpcBasis basis(Family::hermite, 2, 2);
  SparseGrid grid = smolyak(Family::hermite, 2, 3);
  Matrix v(3, basis.size());
  v(0, 0) = 3.0;
  v(1, 0) = 4.0;
  Matrix u = normalize(v, basis, grid);
  REQUIRE(u(0, 0) == Catch::Approx(0.6).margin(1e-12));
  REQUIRE(u(1, 0) == Catch::Approx(0.8).margin(1e-12));
  for (int k = 1; k < basis.size(); ++k)
    for (int i = 0; i < 3; ++i) REQUIRE(std::fabs(u(i, k)) < 1e-10);
}

TEST_CASE("normalized fields have unit norm at every grid point") {
  GpcBasis basis(Family::hermite, 2, 2);
  SparseGrid grid = smolyak(Family::hermite, 2, 3);
  std::mt19937 rng(45);
  Matrix v(4, basis.size());
  for (int i = 0; i < 4; ++i) v(i, 0) = 1.0 + 0.1 * i;
  std::uniform_real_distribution<double> pert(-1e-5, 1e-5);
  for (int k = 1; k < basis.size(); ++k)
    for (int i = 0; i < 4; ++i) v(i, k) = pert(rng);
  Matrix u = normalize(v, basis, grid);
  for (std::size_t q = 0; q < grid.size(); ++q) {
    Vec val = eval_field(u, basis, grid.points[q].data());
    REQUIRE(std::fabs(nrm2(val) - 1.0) < 1e-8);
  }
}

TEST_CASE("normalize is scale invariant") {
  GpcBasis basis(Family::hermite, 2, 1);
  SparseGrid grid = smolyak(Family::hermite, 2, 2);
  std::mt19937 rng(46);
  Matrix v(3, basis.size());
  for (int i = 0; i < 3; ++i) v(i, 0) = 2.0 + i;
  v(0, 1) = 0.3;
  v(2, 2) = -0.2;
  Matrix a = normalize(v, basis, grid);
  Matrix scaled = v;
  scaled *= 7.5;
  Matrix b = normalize(scaled, basis, grid);
  REQUIRE(rel_diff(b, a) < 1e-12);
}

TEST_CASE("normalize rejects a field vanishing at a grid point") {
  GpcBasis basis(Family::hermite, 2, 1);
  SparseGrid grid = smolyak(Family::hermite, 2, 2);  // contains the origin
  Matrix v(2, basis.size());
  v(0, 1) = 1.0;  // field = xi_1 * e_1, zero at xi = 0
  REQUIRE_THROWS_AS(normalize(v, basis, grid), std::runtime_error);
}

TEST_CASE("gram schmidt leaves orthogonal deterministic inputs unchanged") {
  GpcBasis basis(Family::hermite, 2, 1);
  SparseGrid grid = smolyak(Family::hermite, 2, 2);
  Matrix v1(3, basis.size()), v2(3, basis.size());
  v1(0, 0) = 2.0;
  v2(1, 0) = -3.0;
  auto us = gram_schmidt({v1, v2}, basis, grid);
  REQUIRE(us[0](0, 0) == Catch::Approx(1.0).margin(1e-12));
  REQUIRE(us[1](1, 0) == Catch::Approx(-1.0).margin(1e-12));
  for (int k = 1; k < basis.size(); ++k) {
    REQUIRE(std::fabs(us[0](1, k)) < 1e-12);
    REQUIRE(std::fabs(us[1](0, k)) < 1e-12);
  }
}

TEST_CASE("gram schmidt rejects pointwise dependent inputs") {
  GpcBasis basis(Family::hermite, 2, 1);
  SparseGrid grid = smolyak(Family::hermite, 2, 2);
  Matrix v(3, basis.size());
  v(0, 0) = 1.0;
  v(1, 0) = 0.2;  // constant in the parameter: dependence is exact
  REQUIRE_THROWS_AS(gram_schmidt({v, v}, basis, grid), std::runtime_error);
}

TEST_CASE("gram schmidt output is pointwise orthonormal") {
  GpcBasis basis(Family::hermite, 2, 2);
  SparseGrid grid = smolyak(Family::hermite, 2, 3);
  std::mt19937 rng(47);
  std::uniform_real_distribution<double> pert(-1e-4, 1e-4);
  std::vector<Matrix> vs;
  for (int s = 0; s < 3; ++s) {
    Matrix v(5, basis.size());
    v(s, 0) = 1.0;
    v((s + 2) % 5, 0) = 0.4;
    for (int k = 1; k < basis.size(); ++k)
      for (int i = 0; i < 5; ++i) v(i, k) = pert(rng);
    vs.push_back(std::move(v));
  }
  auto us = gram_schmidt(vs, basis, grid);
  for (std::size_t q = 0; q < grid.size(); ++q) {
    std::vector<Vec> vals;
    for (const Matrix& u : us) vals.push_back(eval_field(u, basis, grid.points[q].data()));
    for (std::size_t a = 0; a < vals.size(); ++a)
      for (std::size_t b = 0; b <= a; ++b) {
        const double g = dot(5, vals[a].data(), vals[b].data());
        REQUIRE(std::fabs(g - (a == b ? 1.0 : 0.0)) < 1e-6);
      }
  }
}

TEST_CASE("subspace iteration solves the deterministic limit exactly") {
  Instance inst = make_deterministic(2, 2, 6, 48);
  SymEigen eig = sym_eigen(inst.op.ops().A[0]);
  SisiConfig cfg;
  cfg.precond = SisiPrecond::mean;
  auto res = run_sisi(inst.op, inst.basis_sol, inst.grid, cfg);
  REQUIRE(res.size() == 1);
  REQUIRE(res[0].lambda[0] == Catch::Approx(eig.values[0]).margin(1e-10));
  for (int k = 1; k < inst.op.n_xi(); ++k) REQUIRE(std::fabs(res[0].lambda[k]) < 1e-10);
  REQUIRE(res[0].eps_mean.back() < 1e-8);
  // eigenvector matches up to sign
  double s = dot(6, res[0].u.col(0), eig.vectors.col(0)) > 0 ? 1.0 : -1.0;
  for (int i = 0; i < 6; ++i)
    REQUIRE(res[0].u(i, 0) == Catch::Approx(s * eig.vectors(i, 0)).margin(1e-8));
}

TEST_CASE("subspace iteration converges on a stochastic instance") {
  Instance inst = make_gapped(2, 2, 5, 49);
  SisiConfig cfg;
  cfg.precond = SisiPrecond::hierarchical_gs;
  cfg.p_t = 1;
  auto res = run_sisi(inst.op, inst.basis_sol, inst.grid, cfg);
  const auto& e = res[0];
  REQUIRE(int(e.eps_mean.size()) == cfg.steps);
  REQUIRE(int(e.pcg_iterations.size()) == cfg.steps);
  REQUIRE(e.eps_mean.back() < 1e-4);
  REQUIRE(e.eps_mean.back() < e.eps_mean.front());

  // recomputing the residual from the returned expansion matches the history
  Matrix resid = inst.op.apply_shifted(e.u, e.lambda);
  auto [e1, ev] = residual_indicators(resid);
  REQUIRE(e1 == Catch::Approx(e.eps_mean.back()).margin(1e-13));
  REQUIRE(ev == Catch::Approx(e.eps_var.back()).margin(1e-13));

  // quadrature normalization holds at the grid points
  for (std::size_t q = 0; q < inst.grid.size(); ++q) {
    Vec val = eval_field(e.u, inst.basis_sol, inst.grid.points[q].data());
    REQUIRE(std::fabs(nrm2(val) - 1.0) < 1e-3);
  }
}

TEST_CASE("an indefinite mean block is handled by the automatic shift") {
  // very mild fluctuation: the two runs share a fixed point to below 1e-8
  Instance base = make_gapped(2, 2, 5, 50, 0.01);
  SymEigen eig = sym_eigen(base.op.ops().A[0]);
  const double c = eig.values[0] + 0.5;  // pushes the smallest eigenvalue to -0.5

  OperatorSet ops_shifted = base.op.ops();
  for (int i = 0; i < 5; ++i) ops_shifted.A[0](i, i) -= c;
  GalerkinOperator op2(std::move(ops_shifted),
                       triple_product_tensor(base.basis_a, base.basis_sol));

  SisiConfig cfg;
  cfg.precond = SisiPrecond::mean;
  cfg.tau = 1e-6;  // near-exact inner solves so both runs reach the same point
  auto r1 = run_sisi(base.op, base.basis_sol, base.grid, cfg);
  auto r2 = run_sisi(op2, base.basis_sol, base.grid, cfg);

  REQUIRE(r2[0].lambda[0] + c == Catch::Approx(r1[0].lambda[0]).margin(1e-8));
  for (int k = 1; k < base.op.n_xi(); ++k)
    REQUIRE(r2[0].lambda[k] == Catch::Approx(r1[0].lambda[k]).margin(1e-8));
  double s = dot(5, r1[0].u.col(0), r2[0].u.col(0)) > 0 ? 1.0 : -1.0;
  Matrix aligned = r2[0].u;
  aligned *= s;
  REQUIRE(rel_diff(aligned, r1[0].u) < 1e-4);
}

TEST_CASE("a three-vector subspace stays orthonormal and ordered") {
  Instance inst = make_gapped(2, 2, 6, 51);
  SisiConfig cfg;
  cfg.n_s = 3;
  cfg.precond = SisiPrecond::hierarchical_gs;
  cfg.p_t = 2;
  auto res = run_sisi(inst.op, inst.basis_sol, inst.grid, cfg);
  REQUIRE(res.size() == 3);
  REQUIRE(res[0].lambda[0] < res[1].lambda[0]);
  REQUIRE(res[1].lambda[0] < res[2].lambda[0]);
  for (const auto& e : res) {
    REQUIRE(e.eps_mean.back() < 1e-4);
    REQUIRE(e.eps_mean.back() < e.eps_mean.front());
  }
  for (std::size_t q = 0; q < inst.grid.size(); ++q) {
    std::vector<Vec> vals;
    for (const auto& e : res)
      vals.push_back(eval_field(e.u, inst.basis_sol, inst.grid.points[q].data()));
    for (std::size_t a = 0; a < vals.size(); ++a)
      for (std::size_t b = 0; b <= a; ++b) {
        const double g = dot(6, vals[a].data(), vals[b].data());
        REQUIRE(std::fabs(g - (a == b ? 1.0 : 0.0)) < 1e-3);
      }
  }
}

TEST_CASE("early exit stops once the indicators stagnate") {
  Instance inst = make_gapped(2, 2, 5, 52);
  SisiConfig cfg;
  cfg.steps = 40;
  cfg.early_exit = true;
  cfg.precond = SisiPrecond::mean;
  auto res = run_sisi(inst.op, inst.basis_sol, inst.grid, cfg);
  REQUIRE(res[0].eps_mean.size() >= 4);
  REQUIRE(res[0].eps_mean.size() < 30);
  REQUIRE(res[0].eps_mean.back() < 1e-4);
}

TEST_CASE("hierarchical preconditioning does not cost more inner iterations") {
  Instance inst = make_gapped(2, 2, 5, 53, 0.1);
  SisiConfig mean_cfg;
  mean_cfg.precond = SisiPrecond::mean;
  SisiConfig hgs_cfg;
  hgs_cfg.precond = SisiPrecond::hierarchical_gs;
  hgs_cfg.p_t = 2;
  auto rm = run_sisi(inst.op, inst.basis_sol, inst.grid, mean_cfg);
  auto rh = run_sisi(inst.op, inst.basis_sol, inst.grid, hgs_cfg);
  const int total_mean =
      std::accumulate(rm[0].pcg_iterations.begin(), rm[0].pcg_iterations.end(), 0);
  const int total_hgs =
      std::accumulate(rh[0].pcg_iterations.begin(), rh[0].pcg_iterations.end(), 0);
  REQUIRE(total_hgs <= total_mean);
  REQUIRE(rh[0].lambda[0] == Catch::Approx(rm[0].lambda[0]).margin(1e-6));
}

TEST_CASE("subspace iteration validates its configuration") {
  Instance inst = make_instance(2, 1, 3, 54);
  SisiConfig cfg;
  cfg.steps = 0;
  REQUIRE_THROWS_AS(run_sisi(inst.op, inst.basis_sol, inst.grid, cfg),
                    std::invalid_argument);
  cfg.steps = 5;
  cfg.tau = 0.0;
  REQUIRE_THROWS_AS(run_sisi(inst.op, inst.basis_sol, inst.grid, cfg),
                    std::invalid_argument);
  cfg.tau = 1e-2;
  cfg.n_s = 99;
  REQUIRE_THROWS_AS(run_sisi(inst.op, inst.basis_sol, inst.grid, cfg),
                    std::invalid_argument);
}
