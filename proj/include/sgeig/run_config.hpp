#pragma once

// JSON run configuration: schema validation with explicit defaults, problem
// construction (diffusion benchmarks and synthetic instances), and the
// canonical problem hash that guards cross-run comparisons.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <random>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "sgeig/fem.hpp"
#include "sgeig/gpc.hpp"
#include "sgeig/newton.hpp"
#include "sgeig/quadrature.hpp"
#include "sgeig/random_field.hpp"
#include "sgeig/sisi.hpp"

namespace sgeig {

inline constexpr const char* kVersion = "0.1.0";

enum class ProblemKind { lognormal_diffusion, uniform_diffusion, synthetic };
enum class MethodKind { sisi, newton, mc, sc };

struct SyntheticSpec {
  int n_x = 8;
  double noise = 0.05;           // off-diagonal scale of the mean matrix
  double decay = 0.05;           // scale of the fluctuation terms
  double degree_falloff = 1.0;   // extra geometric factor per basis degree
  unsigned seed = 1;
  Family family = Family::hermite;
};

struct RunConfig {
  ProblemKind problem = ProblemKind::lognormal_diffusion;
  MethodKind method = MethodKind::sisi;

  int mesh = 16;  // elements per side
  int m_xi = 3;
  int p = 3;  // solution degree; the coefficient basis carries 2p (linear fields: 1)
  double cov = 0.1;
  double corr_x = 2.0;
  double corr_y = 2.0;
  double mean_a = 1.0;
  SyntheticSpec synthetic;

  int n_s = 1;
  int grid_level = 3;  // sparse-grid level for normalization and collocation

  int steps = 20;        // subspace-iteration step count
  int max_steps = 50;    // Newton cap
  double tau = 1e-2;     // inner tolerance factor (method-dependent default)
  double tol = 1e-10;    // Newton outer tolerance
  int p_t = 1;           // preconditioner truncation degree (method-dependent default)
  bool early_exit = false;
  SisiPrecond sisi_precond = SisiPrecond::hierarchical_gs;
  NewtonSolver solver = NewtonSolver::gmres;
  NewtonPrecond newton_precond = NewtonPrecond::constraint_hgs;

  int n_samples = 10000;
  std::uint64_t seed = 2025;

  std::string output;  // may be empty; the tool resolves --out against it
};

namespace detail {

inline std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline const char* to_string(ProblemKind p) {
  switch (p) {
    case ProblemKind::lognormal_diffusion: return "lognormal-diffusion";
    case ProblemKind::uniform_diffusion: return "uniform-diffusion";
    default: return "synthetic";
  }
}

inline const char* to_string(MethodKind m) {
  switch (m) {
    case MethodKind::sisi: return "sisi";
    case MethodKind::newton: return "newton";
    case MethodKind::mc: return "mc";
    default: return "sc";
  }
}

inline const char* to_string(SisiPrecond p) {
  return p == SisiPrecond::mean ? "mean" : "hierarchical-gs";
}

inline const char* to_string(NewtonPrecond p) {
  switch (p) {
    case NewtonPrecond::mean_block: return "mean-block";
    case NewtonPrecond::constraint_fixed: return "constraint-fixed";
    case NewtonPrecond::constraint_updated: return "constraint-updated";
    default: return "constraint-hgs";
  }
}

inline const char* to_string(NewtonSolver s) {
  return s == NewtonSolver::gmres ? "gmres" : "minres";
}

inline const char* to_string(Family f) {
  return f == Family::hermite ? "hermite" : "legendre";
}

template <class T>
T parse_enum(const std::string& text, std::initializer_list<std::pair<const char*, T>> table,
             const char* what) {
  for (const auto& [name, value] : table)
    if (text == name) return value;
  throw std::invalid_argument(std::string("config: unknown ") + what + " '" + text + "'");
}

inline void check_keys(const nlohmann::json& j, std::initializer_list<const char*> known,
                       const char* where) {
  for (const auto& item : j.items()) {
    bool found = false;
    for (const char* k : known)
      if (item.key() == k) {
        found = true;
        break;
      }
    if (!found)
      throw std::invalid_argument(std::string("config: unknown key '") + item.key() + "' in " +
                                  where);
  }
}

}  // namespace detail

inline RunConfig parse_run_config(const nlohmann::json& root) {
  const nlohmann::json& j = root.contains("config") ? root.at("config") : root;
  if (!j.is_object()) throw std::invalid_argument("config: expected a JSON object");
  detail::check_keys(j,
                     {"problem", "method", "mesh", "m_xi", "p", "cov", "corr_x", "corr_y",
                      "mean_a", "synthetic", "n_s", "grid_level", "steps", "max_steps", "tau",
                      "tol", "p_t", "early_exit", "precond", "solver", "n_samples", "seed",
                      "output"},
                     "the run configuration");

  RunConfig c;
  if (j.contains("problem"))
    c.problem = detail::parse_enum<ProblemKind>(
        j.at("problem").get<std::string>(),
        {{"lognormal-diffusion", ProblemKind::lognormal_diffusion},
         {"uniform-diffusion", ProblemKind::uniform_diffusion},
         {"synthetic", ProblemKind::synthetic}},
        "problem");
  if (j.contains("method"))
    c.method = detail::parse_enum<MethodKind>(j.at("method").get<std::string>(),
                                              {{"sisi", MethodKind::sisi},
                                               {"newton", MethodKind::newton},
                                               {"mc", MethodKind::mc},
                                               {"sc", MethodKind::sc}},
                                              "method");

  c.mesh = j.value("mesh", c.mesh);
  c.m_xi = j.value("m_xi", c.m_xi);
  c.p = j.value("p", c.p);
  c.cov = j.value("cov", c.cov);
  c.corr_x = j.value("corr_x", c.corr_x);
  c.corr_y = j.value("corr_y", c.corr_y);
  c.mean_a = j.value("mean_a", c.mean_a);
  c.n_s = j.value("n_s", c.n_s);
  c.grid_level = j.value("grid_level", c.grid_level);
  c.steps = j.value("steps", c.steps);
  c.max_steps = j.value("max_steps", c.max_steps);
  c.tol = j.value("tol", c.tol);
  c.early_exit = j.value("early_exit", c.early_exit);
  c.n_samples = j.value("n_samples", c.n_samples);
  c.seed = j.value("seed", c.seed);
  c.output = j.value("output", c.output);

  c.tau = j.value("tau", c.method == MethodKind::newton ? 1e-1 : 1e-2);
  c.p_t = j.value("p_t", c.method == MethodKind::newton ? 2 : 1);

  if (j.contains("precond")) {
    const std::string name = j.at("precond").get<std::string>();
    if (c.method == MethodKind::sisi)
      c.sisi_precond = detail::parse_enum<SisiPrecond>(
          name, {{"mean", SisiPrecond::mean}, {"hierarchical-gs", SisiPrecond::hierarchical_gs}},
          "subspace-iteration preconditioner");
    else if (c.method == MethodKind::newton)
      c.newton_precond = detail::parse_enum<NewtonPrecond>(
          name,
          {{"mean-block", NewtonPrecond::mean_block},
           {"constraint-fixed", NewtonPrecond::constraint_fixed},
           {"constraint-updated", NewtonPrecond::constraint_updated},
           {"constraint-hgs", NewtonPrecond::constraint_hgs}},
          "Newton preconditioner");
    else
      throw std::invalid_argument("config: 'precond' does not apply to sampling methods");
  }
  if (j.contains("solver")) {
    if (c.method != MethodKind::newton)
      throw std::invalid_argument("config: 'solver' applies to the Newton method only");
    c.solver = detail::parse_enum<NewtonSolver>(
        j.at("solver").get<std::string>(),
        {{"gmres", NewtonSolver::gmres}, {"minres", NewtonSolver::minres}}, "solver");
  }

  if (j.contains("synthetic")) {
    if (c.problem != ProblemKind::synthetic)
      throw std::invalid_argument("config: 'synthetic' block needs problem = synthetic");
    const nlohmann::json& s = j.at("synthetic");
    detail::check_keys(s, {"n_x", "noise", "decay", "degree_falloff", "seed", "family"},
                       "the synthetic block");
    c.synthetic.n_x = s.value("n_x", c.synthetic.n_x);
    c.synthetic.noise = s.value("noise", c.synthetic.noise);
    c.synthetic.decay = s.value("decay", c.synthetic.decay);
    c.synthetic.degree_falloff = s.value("degree_falloff", c.synthetic.degree_falloff);
    c.synthetic.seed = s.value("seed", c.synthetic.seed);
    if (s.contains("family"))
      c.synthetic.family = detail::parse_enum<Family>(
          s.at("family").get<std::string>(),
          {{"hermite", Family::hermite}, {"legendre", Family::legendre}}, "family");
  }

  if (c.mesh < 2) throw std::invalid_argument("config: mesh needs at least 2 elements per side");
  if (c.m_xi < 1) throw std::invalid_argument("config: m_xi must be positive");
  if (c.p < 0) throw std::invalid_argument("config: p must be nonnegative");
  if (c.p_t < 0 || c.p_t > c.p)
    throw std::invalid_argument("config: p_t must lie between 0 and p");
  if (c.cov <= 0.0) throw std::invalid_argument("config: cov must be positive");
  if (c.corr_x <= 0.0 || c.corr_y <= 0.0)
    throw std::invalid_argument("config: correlation lengths must be positive");
  if (c.mean_a <= 0.0) throw std::invalid_argument("config: mean_a must be positive");
  if (c.n_s < 1) throw std::invalid_argument("config: n_s must be positive");
  if (c.grid_level < 0) throw std::invalid_argument("config: grid_level must be nonnegative");
  if (c.steps < 1 || c.max_steps < 1)
    throw std::invalid_argument("config: step counts must be positive");
  if ((c.method == MethodKind::sisi || c.method == MethodKind::newton) && !(c.tau > 0.0))
    throw std::invalid_argument("config: tau must be positive");
  if (!(c.tol > 0.0)) throw std::invalid_argument("config: tol must be positive");
  if (c.n_samples < 1) throw std::invalid_argument("config: n_samples must be positive");
  if (c.synthetic.n_x < 2) throw std::invalid_argument("config: synthetic n_x too small");
  if (c.synthetic.noise < 0.0 || c.synthetic.decay < 0.0)
    throw std::invalid_argument("config: synthetic scales must be nonnegative");
  if (!(c.synthetic.degree_falloff > 0.0 && c.synthetic.degree_falloff <= 1.0))
    throw std::invalid_argument("config: degree_falloff must lie in (0, 1]");
  return c;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file '" + path + "'");
  nlohmann::json j;
  in >> j;
  return parse_run_config(j);
}

// Full resolved configuration; parsing this back yields the same RunConfig.
inline nlohmann::json resolved_config(const RunConfig& c) {
  nlohmann::json j;
  j["problem"] = detail::to_string(c.problem);
  j["method"] = detail::to_string(c.method);
  if (c.problem == ProblemKind::synthetic) {
    j["synthetic"] = {{"n_x", c.synthetic.n_x},
                      {"noise", c.synthetic.noise},
                      {"decay", c.synthetic.decay},
                      {"degree_falloff", c.synthetic.degree_falloff},
                      {"seed", c.synthetic.seed},
                      {"family", detail::to_string(c.synthetic.family)}};
  } else {
    j["mesh"] = c.mesh;
    j["cov"] = c.cov;
    j["corr_x"] = c.corr_x;
    j["corr_y"] = c.corr_y;
    j["mean_a"] = c.mean_a;
  }
  j["m_xi"] = c.m_xi;
  j["p"] = c.p;
  j["n_s"] = c.n_s;
  j["grid_level"] = c.grid_level;
  if (c.method == MethodKind::sisi) {
    j["steps"] = c.steps;
    j["tau"] = c.tau;
    j["p_t"] = c.p_t;
    j["precond"] = detail::to_string(c.sisi_precond);
    j["early_exit"] = c.early_exit;
  } else if (c.method == MethodKind::newton) {
    j["max_steps"] = c.max_steps;
    j["tau"] = c.tau;
    j["tol"] = c.tol;
    j["p_t"] = c.p_t;
    j["precond"] = detail::to_string(c.newton_precond);
    j["solver"] = detail::to_string(c.solver);
  } else if (c.method == MethodKind::mc) {
    j["n_samples"] = c.n_samples;
    j["seed"] = c.seed;
  }
  if (!c.output.empty()) j["output"] = c.output;
  return j;
}

// Hash over the fields that define the problem (not the method), so runs of
// different methods on the same problem compare while anything else refuses.
inline std::string problem_hash(const RunConfig& c) {
  std::string s = std::string("problem=") + detail::to_string(c.problem) + ";";
  if (c.problem == ProblemKind::synthetic) {
    s += "n_x=" + std::to_string(c.synthetic.n_x) + ";noise=" +
         detail::fmt_double(c.synthetic.noise) + ";decay=" +
         detail::fmt_double(c.synthetic.decay) + ";falloff=" +
         detail::fmt_double(c.synthetic.degree_falloff) + ";seed=" +
         std::to_string(c.synthetic.seed) + ";family=" + detail::to_string(c.synthetic.family) +
         ";";
  } else {
    s += "mesh=" + std::to_string(c.mesh) + ";cov=" + detail::fmt_double(c.cov) + ";corr_x=" +
         detail::fmt_double(c.corr_x) + ";corr_y=" + detail::fmt_double(c.corr_y) + ";mean_a=" +
         detail::fmt_double(c.mean_a) + ";";
  }
  s += "m_xi=" + std::to_string(c.m_xi) + ";p=" + std::to_string(c.p) + ";grid_level=" +
       std::to_string(c.grid_level) + ";";
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

struct ProblemData {
  GpcBasis basis_a;
  GpcBasis basis_sol;
  OperatorSet ops;  // standard symmetric form
  SparseGrid grid;
};

inline ProblemData build_problem(const RunConfig& c) {
  ProblemData d;
  if (c.problem == ProblemKind::synthetic) {
    const Family family = c.synthetic.family;
    d.basis_a = GpcBasis(family, c.m_xi, 2 * c.p);
    d.basis_sol = GpcBasis(family, c.m_xi, c.p);
    std::mt19937 rng(c.synthetic.seed);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    auto symmetric = [&](double scale) {
      Matrix m(c.synthetic.n_x, c.synthetic.n_x);
      for (int i = 0; i < c.synthetic.n_x; ++i)
        for (int j = 0; j <= i; ++j) {
          const double v = scale * unif(rng);
          m(i, j) = v;
          m(j, i) = v;
        }
      return m;
    };
    d.ops.n_x = c.synthetic.n_x;
    Matrix a1 = symmetric(c.synthetic.noise);
    for (int i = 0; i < c.synthetic.n_x; ++i) a1(i, i) += 1.0 + 1.5 * i + (i > 0 ? 1.0 : 0.0);
    d.ops.A.push_back(std::move(a1));
    for (int l = 1; l < d.basis_a.size(); ++l) {
      const int deg = d.basis_a.indices()[l].total();
      d.ops.A.push_back(
          symmetric(c.synthetic.decay * std::pow(c.synthetic.degree_falloff, deg - 1)));
    }
    d.grid = smolyak(family, c.m_xi, c.grid_level);
    return d;
  }

  StructuredMesh mesh = StructuredMesh::unit_square(c.mesh);
  const Vec weights = lumped_weights(mesh);
  std::vector<Matrix> k_set;
  if (c.problem == ProblemKind::lognormal_diffusion) {
    const LognormalCalibration calib = calibrate_lognormal(c.cov, c.mean_a);
    KLExpansion kl = kl_expand({calib.sigma, c.corr_x, c.corr_y}, mesh.nodes, weights, c.m_xi);
    kl.g0 = calib.g0;
    d.basis_a = GpcBasis(Family::hermite, c.m_xi, 2 * c.p);
    d.basis_sol = GpcBasis(Family::hermite, c.m_xi, c.p);
    CoefficientExpansion coeffs = lognormal_coefficients(kl, d.basis_a);
    for (const Vec& f : coeffs.fields) k_set.push_back(assemble_stiffness(mesh, f));
    d.grid = smolyak(Family::hermite, c.m_xi, c.grid_level);
  } else {
    // linear field mean_a + sum_j g_j xi_j with uniform xi; the verbatim KL
    // modes pair with the degree-one normalized Legendre value sqrt(3) xi_j,
    // hence the pre-scaled covariance.
    KLExpansion kl = kl_expand({c.cov * c.mean_a / std::sqrt(3.0), c.corr_x, c.corr_y},
                               mesh.nodes, weights, c.m_xi);
    // The coefficient field is linear in xi, but the eigenvalue shift inside
    // the Newton Jacobian and the constraint preconditioners is expanded over
    // the full solution basis, so the coefficient basis must reach degree p.
    // Terms past degree one are zero matrices.
    d.basis_a = GpcBasis(Family::legendre, c.m_xi, std::max(1, c.p));
    d.basis_sol = GpcBasis(Family::legendre, c.m_xi, c.p);
    CoefficientExpansion coeffs = linear_coefficients(kl, Vec(mesh.nodes.size(), c.mean_a));
    for (const Vec& f : coeffs.fields) k_set.push_back(assemble_stiffness(mesh, f));
    d.grid = smolyak(Family::legendre, c.m_xi, c.grid_level);
  }
  d.ops = to_standard_form(k_set, assemble_mass(mesh));
  while (d.ops.n_a() < d.basis_a.size()) d.ops.A.emplace_back(d.ops.n_x, d.ops.n_x);
  return d;
}

}  // namespace sgeig
