#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "cqe/cqe_solver.hpp"
#include "cqe/exact_solver.hpp"
#include "cqe/hamiltonian.hpp"

namespace cqe {

struct SweepSpec {
  double g_lo = 0.0;
  double g_hi = 2.0;
  int points = 21;

  double at(int i) const { return points == 1 ? g_lo : g_lo + (g_hi - g_lo) * i / (points - 1); }
};

struct RunConfig {
  TcParams model;
  std::optional<std::string> hamiltonian_file;  // term file; replaces the TC model in `solve`
  SweepSpec sweep;
  CqeConfig solver;
  std::string out_dir = ".";
  std::uint64_t seed = 0;
  int threads = 0;  // 0: hardware concurrency
  double crossing_tol = 1e-9;
  int crossing_grid = 401;

  void validate() const;
};

/// Flat INI file with sections [model] [sweep] [solver] [backend] [output]
/// [crossings]. Unknown keys are rejected so typos do not pass silently.
RunConfig load_config(const std::string& path);
RunConfig load_config(std::istream& in);
void write_config(std::ostream& out, const RunConfig& c);

struct PointResult {
  double g_c = 0.0;
  double e_exact = 0.0;
  double e_cqe = 0.0;
  double abs_err = 0.0;
  double pop_exact = 0.0;  // lower-level population averaged over sites
  double pop_cqe = 0.0;
  int sector = 0;  // rounded <M> of the exact ground state
  int iters = 0;
  std::string verdict;
  std::uint64_t seed = 0;
  bool failed = false;
  std::string error;
};

/// Term file (see write_terms) on an unfiltered basis sized by the largest
/// mode indices present, with n_max bosons per mode.
HamiltonianSpec load_hamiltonian_file(const std::string& path, int n_max);

double mean_lower_population(const StateVector& psi, int n_sites);

/// Exact oracle and CQE solve of the TC model at one coupling. The backend
/// seed is derive_seed(root, index). Numerical failures are caught and
/// recorded in the row.
PointResult run_point(const RunConfig& c, double g, std::uint64_t index,
                      std::optional<CqeTrace>* trace = nullptr);

/// All grid points of c.sweep, in grid order, evaluated on c.threads workers.
std::vector<PointResult> run_sweep(const RunConfig& c);

extern const char* const kSweepHeader;
void write_sweep_csv(std::ostream& out, const std::vector<PointResult>& rows);
std::vector<PointResult> read_sweep_csv(std::istream& in);

void write_crossings_csv(std::ostream& out, const std::vector<Crossing>& xs);
std::vector<Crossing> read_crossings_csv(std::istream& in);

struct GoldenDiff {
  bool ok = true;
  std::vector<std::string> mismatches;
};

/// Crossing positions within tol and identical sector labels.
GoldenDiff compare_crossings(const std::vector<Crossing>& golden, const std::vector<Crossing>& got, double tol);
/// Oracle columns only (g_c, E_exact, pop_exact, sector_M); CQE columns
/// depend on solver settings and are not frozen.
GoldenDiff compare_sweep_oracle(const std::vector<PointResult>& golden, const std::vector<PointResult>& got,
                                double tol);

struct TruncationRow {
  int n_max;
  double g_c;
  double e_exact;
  double delta;  // against the largest n_max checked
};

std::vector<TruncationRow> truncation_check(const RunConfig& c, int n_max_lo, int n_max_hi);
void write_truncation_csv(std::ostream& out, const std::vector<TruncationRow>& rows);

struct CalibrationRow {
  std::uint64_t shots;
  double mean_abs_err;
  double std_abs_err;
};

struct Calibration {
  std::vector<CalibrationRow> rows;
  double slope = 0.0;  // log10(mean_abs_err) against log10(shots)
  std::optional<std::uint64_t> recommended;
  std::string unreachable;  // why there is no recommendation
};

/// Sampled sweeps at each shot count; the recommendation interpolates
/// between bracketing rows, or extrapolates the log-log fit up to 1e12 shots.
Calibration calibrate_shots(const RunConfig& c, const std::vector<std::uint64_t>& shots, double target);
void write_calibration_csv(std::ostream& out, const Calibration& cal);

struct SweepStats {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation
};

SweepStats abs_err_stats(const std::vector<PointResult>& rows);

/// Least-squares slope of y against x.
double fit_slope(const std::vector<double>& x, const std::vector<double>& y);

/// Writes a real with 17 significant digits.
std::string format_real(double v);

}  // namespace cqe
