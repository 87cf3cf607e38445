// cqe: contracted quantum eigensolver experiments on the Tavis-Cummings model.
//
//   cqe solve            one coupling, trace + summary
//   cqe sweep            g_c grid, CSV of CQE vs exact energies and populations
//   cqe crossings        ground-state sector changes located by bisection
//   cqe truncation-check exact ground energies against the boson cutoff
//   cqe calibrate-shots  shot count that gives a target sampled-mode error
//
// Exit codes: 0 success, 1 invalid input, 2 numerical failure or golden mismatch.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "cqe/errors.hpp"
#include "cqe/experiment.hpp"

namespace fs = std::filesystem;
using namespace cqe;

namespace {

struct Overrides {
  std::optional<std::string> config;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> backend;
  std::optional<std::uint64_t> shots;
  std::optional<int> threads;
  std::optional<int> n_sites;
  std::optional<double> omega_b;
  std::optional<double> omega_f;
  std::optional<double> g_c;
  std::optional<int> n_max;
  std::optional<std::string> hamiltonian;
  std::optional<double> g_lo;
  std::optional<double> g_hi;
  std::optional<int> points;
  std::optional<int> max_iters;
  std::optional<double> tol_variance;
  std::optional<double> tol_energy;
  std::optional<std::string> initial;
  std::optional<double> theta;
  std::optional<double> kappa;
  bool bless = false;
  std::optional<std::string> golden;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "INI config file; flags override its values");
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--seed", o.seed, "root seed");
  cmd->add_option("--backend", o.backend, "exact | sampled");
  cmd->add_option("--shots", o.shots, "shots per expectation in sampled mode");
  cmd->add_option("--threads", o.threads, "worker threads (0: all cores)");
  cmd->add_option("--n-sites", o.n_sites, "number of two-level systems N");
  cmd->add_option("--omega-b", o.omega_b, "boson frequency");
  cmd->add_option("--omega-f", o.omega_f, "two-level splitting");
  cmd->add_option("--g", o.g_c, "coupling g_c (solve)");
  cmd->add_option("--n-max", o.n_max, "boson cutoff");
  cmd->add_option("--hamiltonian", o.hamiltonian, "term file replacing the TC model (solve)");
  cmd->add_option("--g-lo", o.g_lo, "sweep start");
  cmd->add_option("--g-hi", o.g_hi, "sweep end");
  cmd->add_option("--points", o.points, "sweep points");
  cmd->add_option("--max-iters", o.max_iters, "CQE iteration cap");
  cmd->add_option("--tol-variance", o.tol_variance, "variance convergence threshold");
  cmd->add_option("--tol-energy", o.tol_energy, "energy stall threshold");
  cmd->add_option("--initial", o.initial, "tc_product | uniform");
  cmd->add_option("--theta", o.theta, "initial two-level mixing angle");
  cmd->add_option("--kappa", o.kappa, "initial coherent amplitude");
  cmd->add_flag("--bless", o.bless, "write the golden file instead of comparing");
  cmd->add_option("--golden", o.golden, "golden file to compare against (or write with --bless)");
}

RunConfig resolve(const Overrides& o) {
  RunConfig c = o.config ? load_config(*o.config) : RunConfig{};
  if (o.out) c.out_dir = *o.out;
  if (o.seed) c.seed = *o.seed;
  if (o.backend) {
    if (*o.backend == "exact") c.solver.backend.mode = BackendMode::exact;
    else if (*o.backend == "sampled") c.solver.backend.mode = BackendMode::sampled;
    else throw ValidationError(fmt::format("--backend: '{}' is not exact or sampled", *o.backend));
  }
  if (o.shots) c.solver.backend.shots = *o.shots;
  if (o.threads) c.threads = *o.threads;
  if (o.n_sites) c.model.n_sites = *o.n_sites;
  if (o.omega_b) c.model.omega_b = *o.omega_b;
  if (o.omega_f) c.model.omega_f = *o.omega_f;
  if (o.g_c) c.model.g_c = *o.g_c;
  if (o.n_max) c.model.n_max = *o.n_max;
  if (o.hamiltonian) c.hamiltonian_file = *o.hamiltonian;
  if (o.g_lo) c.sweep.g_lo = *o.g_lo;
  if (o.g_hi) c.sweep.g_hi = *o.g_hi;
  if (o.points) c.sweep.points = *o.points;
  if (o.max_iters) c.solver.max_iters = *o.max_iters;
  if (o.tol_variance) c.solver.tol_variance = *o.tol_variance;
  if (o.tol_energy) c.solver.tol_energy = *o.tol_energy;
  if (o.initial) {
    if (*o.initial == "tc_product") c.solver.initial.kind = InitialStateSpec::Kind::tc_product;
    else if (*o.initial == "uniform") c.solver.initial.kind = InitialStateSpec::Kind::uniform;
    else throw ValidationError(fmt::format("--initial: '{}' is not tc_product or uniform", *o.initial));
  }
  if (o.theta) c.solver.initial.theta = *o.theta;
  if (o.kappa) c.solver.initial.kappa = *o.kappa;
  if (o.bless && !o.golden) throw ValidationError("--bless needs --golden PATH");
  c.validate();
  return c;
}

fs::path prepare_out(const RunConfig& c) {
  const fs::path dir(c.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw ValidationError(fmt::format("cannot create output directory '{}'", c.out_dir));
  return dir;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream f(p);
  if (!f) throw ValidationError(fmt::format("cannot write '{}'", p.string()));
  return f;
}

nlohmann::json real_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); }

int cmd_solve(const Overrides& o) {
  const RunConfig c = resolve(o);
  const fs::path dir = prepare_out(c);
  nlohmann::json s;
  std::optional<CqeTrace> trace;

  if (c.hamiltonian_file) {
    const HamiltonianSpec h = load_hamiltonian_file(*c.hamiltonian_file, c.model.n_max);
    CqeConfig sc = c.solver;
    sc.backend.seed = derive_seed(c.seed, 0);
    // Product states need the TC site layout; a bare term file gets the uniform state.
    if (sc.initial.kind == InitialStateSpec::Kind::tc_product) sc.initial.kind = InitialStateSpec::Kind::uniform;
    const Spectrum spec = diagonalize(h, 2);
    trace.emplace(solve(h, sc));
    s["hamiltonian"] = *c.hamiltonian_file;
    s["dim"] = h.basis().dim();
    s["E_exact"] = spec.energies[0];
    s["E_cqe"] = trace->final_energy;
    s["abs_err"] = std::abs(trace->final_energy - spec.energies[0]);
    s["ground_degenerate"] = spec.ground_degenerate();
    s["iters"] = trace->steps();
    s["verdict"] = to_string(trace->verdict);
    s["seed"] = sc.backend.seed;
  } else {
    const PointResult r = run_point(c, c.model.g_c, 0, &trace);
    if (r.failed) throw NumericalError(r.error);
    s["n_sites"] = c.model.n_sites;
    s["omega_b"] = c.model.omega_b;
    s["omega_f"] = c.model.omega_f;
    s["g_c"] = r.g_c;
    s["n_max"] = c.model.n_max;
    s["E_exact"] = r.e_exact;
    s["E_cqe"] = r.e_cqe;
    s["abs_err"] = r.abs_err;
    s["pop_exact"] = real_or_null(r.pop_exact);
    s["pop_cqe"] = real_or_null(r.pop_cqe);
    s["sector_M"] = r.sector;
    s["iters"] = r.iters;
    s["verdict"] = r.verdict;
    s["seed"] = r.seed;
  }
  s["backend"] = c.solver.backend.mode == BackendMode::exact ? "exact" : "sampled";
  if (c.solver.backend.mode == BackendMode::sampled) s["shots"] = c.solver.backend.shots;
  s["noisy_evaluations"] = trace->noisy_evaluations;
  s["final_variance"] = trace->iterations.back().variance;

  auto tf = open_out(dir / "trace.csv");
  write_trace(tf, *trace);
  auto sf = open_out(dir / "summary.json");
  sf << s.dump(2) << "\n";
  std::cout << s.dump(2) << "\n";
  return 0;
}

int cmd_sweep(const Overrides& o) {
  const RunConfig c = resolve(o);
  const fs::path dir = prepare_out(c);
  const auto rows = run_sweep(c);
  {
    auto f = open_out(dir / "sweep.csv");
    write_sweep_csv(f, rows);
  }
  int failures = 0;
  for (const auto& r : rows) {
    if (r.failed) {
      ++failures;
      std::cerr << fmt::format("g_c={:.6g}: {}\n", r.g_c, r.error);
    }
  }
  const SweepStats st = abs_err_stats(rows);
  std::cout << fmt::format("{} points, mean |E_cqe - E_exact| = {:.3e}, sd = {:.3e}, failures = {}\n", rows.size(),
                           st.mean, st.stddev, failures);

  int code = failures ? 2 : 0;
  if (o.golden) {
    if (o.bless) {
      auto g = open_out(*o.golden);
      write_sweep_csv(g, rows);
      std::cout << "blessed " << *o.golden << "\n";
    } else {
      std::ifstream g(*o.golden);
      if (!g) throw ValidationError(fmt::format("cannot read golden '{}'", *o.golden));
      const GoldenDiff d = compare_sweep_oracle(read_sweep_csv(g), rows, 1e-9);
      for (const auto& m : d.mismatches) std::cerr << "golden: " << m << "\n";
      if (!d.ok) code = 2;
      else std::cout << "golden: oracle columns match\n";
    }
  }
  return code;
}

int cmd_crossings(const Overrides& o) {
  const RunConfig c = resolve(o);
  const fs::path dir = prepare_out(c);
  const auto xs = scan_crossings(c.model, c.sweep.g_lo, c.sweep.g_hi, c.crossing_tol, c.crossing_grid);
  {
    auto f = open_out(dir / "crossings.csv");
    write_crossings_csv(f, xs);
  }
  for (const auto& x : xs) std::cout << fmt::format("g* = {:.9f}  M {} -> {}\n", x.g, x.sector_below, x.sector_above);
  if (xs.empty()) std::cout << "no crossings in [" << c.sweep.g_lo << ", " << c.sweep.g_hi << "]\n";

  if (o.golden) {
    if (o.bless) {
      auto g = open_out(*o.golden);
      write_crossings_csv(g, xs);
      std::cout << "blessed " << *o.golden << "\n";
    } else {
      std::ifstream g(*o.golden);
      if (!g) throw ValidationError(fmt::format("cannot read golden '{}'", *o.golden));
      const GoldenDiff d = compare_crossings(read_crossings_csv(g), xs, 1e-6);
      for (const auto& m : d.mismatches) std::cerr << "golden: " << m << "\n";
      if (!d.ok) return 2;
      std::cout << "golden: crossings match\n";
    }
  }
  return 0;
}

int cmd_truncation(const Overrides& o, int lo, int hi) {
  const RunConfig c = resolve(o);
  const fs::path dir = prepare_out(c);
  const auto rows = truncation_check(c, lo, hi);
  auto f = open_out(dir / "truncation.csv");
  write_truncation_csv(f, rows);
  double worst = 0.0;
  for (const auto& r : rows)
    if (r.n_max == c.model.n_max) worst = std::max(worst, std::abs(r.delta));
  std::cout << fmt::format("max |E(n_max={}) - E(n_max={})| over the sweep: {:.3e}\n", c.model.n_max, hi, worst);
  return 0;
}

int cmd_calibrate(const Overrides& o, const std::vector<std::uint64_t>& shots, double target) {
  RunConfig c = resolve(o);
  const fs::path dir = prepare_out(c);
  const Calibration cal = calibrate_shots(c, shots, target);
  {
    auto f = open_out(dir / "calibration.csv");
    write_calibration_csv(f, cal);
  }
  for (const auto& r : cal.rows)
    std::cout << fmt::format("shots {:>8}  mean |err| {:.3e}  sd {:.3e}\n", r.shots, r.mean_abs_err, r.std_abs_err);
  if (!cal.recommended) {
    std::cerr << fmt::format("log-log slope {:.3f}; no shot count reaches {:.1e}: {}\n", cal.slope, target,
                             cal.unreachable);
    return 2;
  }
  std::cout << fmt::format("log-log slope {:.3f}; recommended shots for {:.1e}: {}\n", cal.slope, target,
                           *cal.recommended);
  c.solver.backend.mode = BackendMode::sampled;
  c.solver.backend.shots = *cal.recommended;
  auto f = open_out(dir / "calibrated.ini");
  f << fmt::format("# calibrate-shots: target mean |err| {:.3g}, slope {:.3f}\n", target, cal.slope);
  write_config(f, c);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Contracted quantum eigensolver experiments"};
  app.require_subcommand(1);
  Overrides o;

  auto* solve_cmd = app.add_subcommand("solve", "run one CQE solve and write trace.csv + summary.json");
  auto* sweep_cmd = app.add_subcommand("sweep", "g_c sweep against the exact oracle, writes sweep.csv");
  auto* cross_cmd = app.add_subcommand("crossings", "ground-state level crossings, writes crossings.csv");
  auto* trunc_cmd = app.add_subcommand("truncation-check", "exact energies against n_max, writes truncation.csv");
  auto* cal_cmd = app.add_subcommand("calibrate-shots", "shots giving a target sampled-mode error");
  for (auto* cmd : {solve_cmd, sweep_cmd, cross_cmd, trunc_cmd, cal_cmd}) add_common(cmd, o);

  int n_max_lo = 1;
  int n_max_hi = 8;
  trunc_cmd->add_option("--n-max-lo", n_max_lo, "smallest cutoff");
  trunc_cmd->add_option("--n-max-hi", n_max_hi, "largest cutoff (reference)");
  std::vector<std::uint64_t> shots_list{100, 300, 1000, 3000, 10000, 30000, 100000};
  double target = 7e-3;
  cal_cmd->add_option("--shots-list", shots_list, "shot counts to scan")->delimiter(',');
  cal_cmd->add_option("--target", target, "target mean absolute energy error");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*solve_cmd) return cmd_solve(o);
    if (*sweep_cmd) return cmd_sweep(o);
    if (*cross_cmd) return cmd_crossings(o);
    if (*trunc_cmd) return cmd_truncation(o, n_max_lo, n_max_hi);
    if (*cal_cmd) return cmd_calibrate(o, shots_list, target);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
