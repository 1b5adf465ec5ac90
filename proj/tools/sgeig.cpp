// Command-line driver: executes JSON-configured runs of the stochastic
// Galerkin eigensolvers and their sampling baselines, writes diff-able CSV
// artifacts plus JSON metadata into a run directory, and renders comparison
// and report tables from completed runs.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sgeig/newton.hpp"
#include "sgeig/run_config.hpp"
#include "sgeig/sampling.hpp"
#include "sgeig/sisi.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace sgeig;

namespace {

std::string fmt17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// six significant digits, the print format of the comparison report
std::string fmt6(double v) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%.5e", v);
  return buf;
}

void write_text(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);  // LF always
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << content;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("missing artifact '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("missing artifact '" + path.string() + "'");
  json j;
  in >> j;
  return j;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
  std::istringstream in(read_text(path));
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    rows.push_back(split_csv_line(line));
  }
  if (rows.empty()) throw std::runtime_error("empty artifact '" + path.string() + "'");
  return rows;
}

struct RunArtifacts {
  std::string eigen_coeffs;  // empty string: artifact not produced
  std::string iterations;
  std::string residuals;
  std::string samples;
  json cost;
  json summary;
};

std::string coeff_csv(const GpcBasis& basis_sol, const std::vector<Vec>& lambdas) {
  std::string csv = "s,k,degree,value\n";
  for (std::size_t s = 0; s < lambdas.size(); ++s)
    for (int k = 0; k < basis_sol.size(); ++k) {
      csv += std::to_string(s + 1) + "," + std::to_string(k + 1) + "," +
             std::to_string(basis_sol.indices()[k].total()) + "," + fmt17(lambdas[s][k]) + "\n";
    }
  return csv;
}

json counters_json(const GalerkinOperator& op, const GpcBasis& basis_a, int p_t,
                   long long krylov_total) {
  const CostCounters::Snapshot snap = op.counters().snapshot();
  json j;
  j["n_x"] = op.n_x();
  j["n_xi"] = op.n_xi();
  j["n_a"] = op.n_terms();
  j["n_t"] = basis_a.degree_end(std::min(p_t, basis_a.degree()));
  j["full_matvecs"] = snap.full_matvecs;
  j["block_columns"] = snap.block_columns;
  j["precond_applies"] = snap.precond_applies;
  j["mean_solves"] = snap.mean_solves;
  j["krylov_total"] = krylov_total;
  return j;
}

RunArtifacts execute_sisi(const RunConfig& cfg, const ProblemData& pd) {
  TripleProductTensor tensor = triple_product_tensor(pd.basis_a, pd.basis_sol);
  GalerkinOperator op(pd.ops, tensor);
  SisiConfig sc;
  sc.n_s = cfg.n_s;
  sc.steps = cfg.steps;
  sc.tau = cfg.tau;
  sc.p_t = cfg.p_t;
  sc.precond = cfg.sisi_precond;
  sc.early_exit = cfg.early_exit;
  std::vector<EigenpairExpansion> pairs = run_sisi(op, pd.basis_sol, pd.grid, sc);

  RunArtifacts art;
  std::vector<Vec> lambdas;
  for (const EigenpairExpansion& p : pairs) lambdas.push_back(p.lambda);
  art.eigen_coeffs = coeff_csv(pd.basis_sol, lambdas);

  art.iterations = "step,s,krylov_iterations\n";
  art.residuals = "step,s,eps_mean,eps_var\n";
  long long krylov_total = 0;
  for (std::size_t s = 0; s < pairs.size(); ++s)
    for (std::size_t n = 0; n < pairs[s].pcg_iterations.size(); ++n) {
      art.iterations += std::to_string(n + 1) + "," + std::to_string(s + 1) + "," +
                        std::to_string(pairs[s].pcg_iterations[n]) + "\n";
      art.residuals += std::to_string(n + 1) + "," + std::to_string(s + 1) + "," +
                       fmt17(pairs[s].eps_mean[n]) + "," + fmt17(pairs[s].eps_var[n]) + "\n";
      krylov_total += pairs[s].pcg_iterations[n];
    }

  art.cost = counters_json(op, pd.basis_a, cfg.p_t, krylov_total);
  art.summary = json::array();
  for (std::size_t s = 0; s < pairs.size(); ++s) {
    art.summary.push_back({{"s", s + 1},
                           {"lambda_mean", pairs[s].lambda[0]},
                           {"steps", pairs[s].pcg_iterations.size()},
                           {"final_eps_mean", pairs[s].eps_mean.back()},
                           {"final_eps_var", pairs[s].eps_var.back()}});
  }
  return art;
}

RunArtifacts execute_newton(const RunConfig& cfg, const ProblemData& pd, int jobs) {
  TripleProductTensor tensor = triple_product_tensor(pd.basis_a, pd.basis_sol);
  GalerkinOperator op(pd.ops, tensor);
  NewtonConfig nc;
  nc.tau = cfg.tau;
  nc.tol = cfg.tol;
  nc.p_t = cfg.p_t;
  nc.max_steps = cfg.max_steps;
  nc.solver = cfg.solver;
  nc.precond = cfg.newton_precond;

  // eigenpairs are independent solves: the one axis worth fanning out
  std::vector<NewtonResult> results(cfg.n_s);
  detail::parallel_for(cfg.n_s, jobs,
                       [&](int s) { results[s] = run_newton(op, pd.basis_sol, s, nc); });

  RunArtifacts art;
  std::vector<Vec> lambdas;
  for (const NewtonResult& r : results) lambdas.push_back(r.lambda);
  art.eigen_coeffs = coeff_csv(pd.basis_sol, lambdas);

  art.iterations = "step,s,krylov_iterations\n";
  art.residuals = "step,s,residual,step_length\n";
  long long krylov_total = 0;
  for (std::size_t s = 0; s < results.size(); ++s) {
    const NewtonResult& r = results[s];
    art.residuals += "0," + std::to_string(s + 1) + "," + fmt17(r.residual_history[0]) + ",\n";
    for (std::size_t n = 0; n < r.krylov_iterations.size(); ++n) {
      art.iterations += std::to_string(n + 1) + "," + std::to_string(s + 1) + "," +
                        std::to_string(r.krylov_iterations[n]) + "\n";
      art.residuals += std::to_string(n + 1) + "," + std::to_string(s + 1) + "," +
                       fmt17(r.residual_history[n + 1]) + "," + fmt17(r.step_lengths[n]) + "\n";
      krylov_total += r.krylov_iterations[n];
    }
  }

  art.cost = counters_json(op, pd.basis_a, cfg.p_t, krylov_total);
  art.summary = json::array();
  for (std::size_t s = 0; s < results.size(); ++s) {
    art.summary.push_back({{"s", s + 1},
                           {"lambda_mean", results[s].lambda[0]},
                           {"steps", results[s].krylov_iterations.size()},
                           {"converged", results[s].converged},
                           {"final_residual", results[s].residual_history.back()},
                           {"backtrack_exhaustions", results[s].backtrack_exhaustions}});
  }
  return art;
}

std::string samples_csv(const SampleRun& run, bool with_weights) {
  const int m = run.points.cols();
  std::string csv = "q";
  if (with_weights) csv += ",weight";
  for (int v = 1; v <= m; ++v) csv += ",xi" + std::to_string(v);
  for (int s = 1; s <= run.n_s; ++s) csv += ",lambda" + std::to_string(s);
  csv += "\n";
  for (int q = 0; q < run.n_points(); ++q) {
    csv += std::to_string(q + 1);
    if (with_weights) csv += "," + fmt17(run.weights[q]);
    for (int v = 0; v < m; ++v) csv += "," + fmt17(run.points(q, v));
    for (int s = 0; s < run.n_s; ++s) csv += "," + fmt17(run.eigenvalues(q, s));
    csv += "\n";
  }
  return csv;
}

json sample_summary(const SampleRun& run) {
  json arr = json::array();
  for (int s = 0; s < run.n_s; ++s) {
    json e = {{"s", s + 1}, {"mean", run.mean[s]}, {"variance", run.variance[s]}};
    if (run.method == SampleMethod::monte_carlo)
      e["standard_error"] = std::sqrt(run.variance[s] / run.n_points());
    arr.push_back(e);
  }
  return arr;
}

RunArtifacts execute_mc(const RunConfig& cfg, const ProblemData& pd, int jobs) {
  SampleRun run = monte_carlo_run(pd.ops, pd.basis_a, cfg.n_samples, cfg.seed, cfg.n_s, jobs);
  RunArtifacts art;
  art.samples = samples_csv(run, false);
  art.cost = {{"samples", run.n_points()}, {"dense_eigensolves", run.n_points()}};
  art.summary = sample_summary(run);
  return art;
}

RunArtifacts execute_sc(const RunConfig& cfg, const ProblemData& pd, int jobs) {
  SampleRun run = collocation_run(pd.ops, pd.basis_a, pd.basis_sol, pd.grid, cfg.n_s, jobs);
  RunArtifacts art;
  art.samples = samples_csv(run, true);
  std::vector<Vec> lambdas;
  for (int s = 0; s < run.n_s; ++s) {
    Vec l(run.lambda_coeffs.rows());
    std::copy_n(run.lambda_coeffs.col(s), l.size(), l.begin());
    lambdas.push_back(std::move(l));
  }
  art.eigen_coeffs = coeff_csv(pd.basis_sol, lambdas);
  art.cost = {{"points", run.n_points()}, {"dense_eigensolves", run.n_points()}};
  art.summary = sample_summary(run);
  return art;
}

int cmd_run(const std::string& config_path, int jobs, const std::string& out_override) {
  RunConfig cfg = load_run_config(config_path);
  if (!out_override.empty()) cfg.output = out_override;
  if (cfg.output.empty())
    throw std::runtime_error("no output directory: set 'output' in the config or pass --out");
  if (jobs < 1) throw std::runtime_error("--jobs must be positive");

  const auto t0 = std::chrono::steady_clock::now();
  ProblemData pd = build_problem(cfg);
  if (cfg.n_s > pd.ops.n_x)
    throw std::runtime_error("config: n_s exceeds the spatial dimension");

  RunArtifacts art;
  switch (cfg.method) {
    case MethodKind::sisi: art = execute_sisi(cfg, pd); break;
    case MethodKind::newton: art = execute_newton(cfg, pd, jobs); break;
    case MethodKind::mc: art = execute_mc(cfg, pd, jobs); break;
    case MethodKind::sc: art = execute_sc(cfg, pd, jobs); break;
  }
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  art.cost["wall_seconds"] = wall;

  const fs::path out(cfg.output);
  fs::create_directories(out);
  if (!art.eigen_coeffs.empty()) write_text(out / "eigen_coeffs.csv", art.eigen_coeffs);
  if (!art.iterations.empty()) write_text(out / "iterations.csv", art.iterations);
  if (!art.residuals.empty()) write_text(out / "residuals.csv", art.residuals);
  if (!art.samples.empty()) write_text(out / "samples.csv", art.samples);
  write_text(out / "cost.json", art.cost.dump(2) + "\n");

  json run_meta;
  run_meta["config"] = resolved_config(cfg);
  run_meta["config"]["output"] = cfg.output;
  run_meta["problem_hash"] = problem_hash(cfg);
  run_meta["versions"] = {{"sgeig", kVersion}};
  run_meta["summary"] = art.summary;
  write_text(out / "run.json", run_meta.dump(2) + "\n");

  json echo = {{"out", cfg.output}, {"problem_hash", run_meta["problem_hash"]},
               {"summary", art.summary}};
  std::cout << echo.dump(2) << "\n";
  return 0;
}

struct LoadedRun {
  std::string dir;
  std::string label;
  std::string hash;
  json meta;
};

LoadedRun load_run_meta(const std::string& dir) {
  LoadedRun r;
  r.dir = dir;
  r.meta = read_json(fs::path(dir) / "run.json");
  r.hash = r.meta.at("problem_hash").get<std::string>();
  const json& c = r.meta.at("config");
  r.label = c.at("method").get<std::string>();
  if (c.contains("precond")) {
    r.label += "/" + c.at("precond").get<std::string>();
    if (c.contains("p_t")) r.label += " p_t=" + std::to_string(c.at("p_t").get<int>());
  }
  return r;
}

void require_same_problem(const std::vector<LoadedRun>& runs) {
  for (std::size_t i = 1; i < runs.size(); ++i)
    if (runs[i].hash != runs[0].hash)
      throw std::runtime_error("problem hash mismatch between '" + runs[0].dir + "' and '" +
                               runs[i].dir + "'");
}

// (s,k) -> (degree, value)
std::map<std::pair<int, int>, std::pair<int, double>> load_coeffs(const std::string& dir) {
  auto rows = read_csv(fs::path(dir) / "eigen_coeffs.csv");
  std::map<std::pair<int, int>, std::pair<int, double>> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (r.size() != 4) throw std::runtime_error("malformed eigen_coeffs.csv in '" + dir + "'");
    out[{std::stoi(r[0]), std::stoi(r[1])}] = {std::stoi(r[2]), std::stod(r[3])};
  }
  return out;
}

int cmd_compare(const std::vector<std::string>& dirs, double rel_tol, double large_frac) {
  if (dirs.size() < 2) throw std::runtime_error("compare needs at least two run directories");
  std::vector<LoadedRun> runs;
  for (const std::string& d : dirs) runs.push_back(load_run_meta(d));
  require_same_problem(runs);

  std::vector<std::map<std::pair<int, int>, std::pair<int, double>>> coeffs;
  for (const std::string& d : dirs) coeffs.push_back(load_coeffs(d));

  // rows common to every run; methods may expand different eigenpair counts
  std::vector<std::pair<int, int>> keys;
  for (const auto& [key, dv] : coeffs[0]) {
    bool everywhere = true;
    for (std::size_t i = 1; i < coeffs.size(); ++i)
      everywhere = everywhere && coeffs[i].count(key) > 0;
    if (everywhere) keys.push_back(key);
  }
  if (keys.empty()) throw std::runtime_error("compare: no common (s, k) coefficient rows");

  double overall_max = 0.0;
  for (const auto& key : keys)
    for (const auto& c : coeffs) overall_max = std::max(overall_max, std::fabs(c.at(key).second));

  std::string header = "s,k,degree";
  for (const LoadedRun& r : runs) header += "," + r.label;
  header += ",max_abs_diff,max_rel_diff";
  std::cout << header << "\n";

  double worst_large_rel = 0.0;
  int n_large = 0;
  for (const auto& key : keys) {
    double lo = coeffs[0].at(key).second, hi = lo, amax = std::fabs(lo);
    std::string row = std::to_string(key.first) + "," + std::to_string(key.second) + "," +
                      std::to_string(coeffs[0].at(key).first);
    for (const auto& c : coeffs) {
      const double v = c.at(key).second;
      row += "," + fmt6(v);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
      amax = std::max(amax, std::fabs(v));
    }
    const double abs_diff = hi - lo;
    const double rel_diff = amax > 0.0 ? abs_diff / amax : 0.0;
    row += "," + fmt6(abs_diff) + "," + fmt6(rel_diff);
    std::cout << row << "\n";
    if (amax >= large_frac * overall_max) {
      ++n_large;
      worst_large_rel = std::max(worst_large_rel, rel_diff);
    }
  }

  const bool pass = worst_large_rel <= rel_tol;
  std::cout << "# verdict: " << (pass ? "PASS" : "FAIL") << " max_rel_large="
            << fmt6(worst_large_rel) << " rel_tol=" << fmt6(rel_tol) << " rows=" << keys.size()
            << " large=" << n_large << "\n";
  return pass ? 0 : 1;
}

// iterations.csv -> per-eigenpair list of per-step counts
std::map<int, std::vector<long long>> load_iterations(const std::string& dir) {
  auto rows = read_csv(fs::path(dir) / "iterations.csv");
  std::map<int, std::vector<long long>> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() != 3) throw std::runtime_error("malformed iterations.csv in '" + dir + "'");
    out[std::stoi(rows[i][1])].push_back(std::stoll(rows[i][2]));
  }
  return out;
}

std::string method_of(const LoadedRun& r) {
  return r.meta.at("config").at("method").get<std::string>();
}

int table_iters(const std::vector<LoadedRun>& runs, const char* want_method, bool average) {
  for (const LoadedRun& r : runs)
    if (method_of(r) != want_method)
      throw std::runtime_error("'" + r.dir + "' is not a " + want_method + " run");
  std::vector<std::map<int, std::vector<long long>>> per_run;
  for (const LoadedRun& r : runs) per_run.push_back(load_iterations(r.dir));

  std::string header = average ? "s" : "step";
  for (const LoadedRun& r : runs) header += "," + r.label;
  std::cout << header << "\n";

  if (average) {
    // one row per eigenpair: mean inner iterations per outer step
    std::set<int> ss;
    for (const auto& m : per_run)
      for (const auto& [s, v] : m) ss.insert(s);
    for (int s : ss) {
      std::string row = std::to_string(s);
      for (const auto& m : per_run) {
        auto it = m.find(s);
        if (it == m.end() || it->second.empty()) {
          row += ",";
        } else {
          double sum = 0.0;
          for (long long v : it->second) sum += double(v);
          char buf[24];
          std::snprintf(buf, sizeof buf, "%.2f", sum / it->second.size());
          row += std::string(",") + buf;
        }
      }
      std::cout << row << "\n";
    }
  } else {
    // one row per outer step (Newton runs: a single eigenpair per column)
    std::size_t max_steps = 0;
    for (const auto& m : per_run)
      for (const auto& [s, v] : m) max_steps = std::max(max_steps, v.size());
    for (std::size_t n = 0; n < max_steps; ++n) {
      std::string row = std::to_string(n + 1);
      for (const auto& m : per_run) {
        long long sum = 0;
        bool any = false;
        for (const auto& [s, v] : m)
          if (n < v.size()) {
            sum += v[n];
            any = true;
          }
        row += any ? "," + std::to_string(sum) : ",";
      }
      std::cout << row << "\n";
    }
    std::string total = "total";
    for (const auto& m : per_run) {
      long long sum = 0;
      for (const auto& [s, v] : m)
        for (long long x : v) sum += x;
      total += "," + std::to_string(sum);
    }
    std::cout << total << "\n";
  }
  return 0;
}

int table_coeffs(const std::vector<LoadedRun>& runs) {
  std::vector<std::map<std::pair<int, int>, std::pair<int, double>>> coeffs;
  for (const LoadedRun& r : runs) coeffs.push_back(load_coeffs(r.dir));
  std::string header = "s,k,degree";
  for (const LoadedRun& r : runs) header += "," + r.label;
  std::cout << header << "\n";
  for (const auto& [key, dv] : coeffs[0]) {
    bool everywhere = true;
    for (std::size_t i = 1; i < coeffs.size(); ++i)
      everywhere = everywhere && coeffs[i].count(key) > 0;
    if (!everywhere) continue;
    std::string row = std::to_string(key.first) + "," + std::to_string(key.second) + "," +
                      std::to_string(dv.first);
    for (const auto& c : coeffs) row += "," + fmt6(c.at(key).second);
    std::cout << row << "\n";
  }
  return 0;
}

int table_cost(const std::vector<LoadedRun>& runs) {
  std::vector<json> costs;
  for (const LoadedRun& r : runs) costs.push_back(read_json(fs::path(r.dir) / "cost.json"));
  const char* preferred[] = {"n_x",           "n_xi",       "n_a",
                             "n_t",           "full_matvecs", "block_columns",
                             "precond_applies", "mean_solves", "krylov_total",
                             "samples",       "points",     "dense_eigensolves",
                             "wall_seconds"};
  std::vector<std::string> fields;
  for (const char* f : preferred)
    for (const json& c : costs)
      if (c.contains(f)) {
        fields.push_back(f);
        break;
      }
  std::string header = "field";
  for (const LoadedRun& r : runs) header += "," + r.label;
  std::cout << header << "\n";
  for (const std::string& f : fields) {
    std::string row = f;
    for (const json& c : costs) {
      if (!c.contains(f)) {
        row += ",";
      } else if (c.at(f).is_number_float()) {
        row += "," + fmt6(c.at(f).get<double>());
      } else {
        row += "," + std::to_string(c.at(f).get<long long>());
      }
    }
    std::cout << row << "\n";
  }
  return 0;
}

int cmd_table(const std::string& kind, const std::vector<std::string>& dirs) {
  if (dirs.empty()) throw std::runtime_error("table needs at least one run directory");
  std::vector<LoadedRun> runs;
  for (const std::string& d : dirs) runs.push_back(load_run_meta(d));
  require_same_problem(runs);
  if (kind == "pcg-iters") return table_iters(runs, "sisi", true);
  if (kind == "gmres-iters") return table_iters(runs, "newton", false);
  if (kind == "gpc-coeffs") return table_coeffs(runs);
  return table_cost(runs);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stochastic Galerkin eigensolver driver"};
  app.require_subcommand(1);

  std::string config_path, out_dir, kind;
  int jobs = 1;
  double rel_tol = 1e-3, large_frac = 1e-2;
  std::vector<std::string> dirs;

  CLI::App* run = app.add_subcommand("run", "execute a JSON run configuration");
  run->add_option("config", config_path, "path to the configuration file")->required();
  run->add_option("--jobs", jobs, "worker threads across eigenpairs/samples");
  run->add_option("--out", out_dir, "output directory (overrides the config)");

  CLI::App* compare = app.add_subcommand("compare", "coefficient comparison across runs");
  compare->add_option("dirs", dirs, "two or more run directories")->required();
  compare->add_option("--rel-tol", rel_tol, "relative tolerance on large coefficients");
  compare->add_option("--large-frac", large_frac,
                      "fraction of the largest coefficient that counts as large");

  CLI::App* table = app.add_subcommand("table", "render a report table from runs");
  table->add_option("kind", kind, "pcg-iters | gmres-iters | gpc-coeffs | cost")
      ->required()
      ->check(CLI::IsMember({"pcg-iters", "gmres-iters", "gpc-coeffs", "cost"}));
  table->add_option("dirs", dirs, "run directories")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(config_path, jobs, out_dir);
    if (compare->parsed()) return cmd_compare(dirs, rel_tol, large_frac);
    return cmd_table(kind, dirs);
  } catch (const std::exception& e) {
    std::cout << json{{"error", e.what()}}.dump() << "\n";
    return 1;
  }
}
