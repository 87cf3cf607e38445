#include "cqe/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include "cqe/errors.hpp"

namespace cqe {

namespace pt = boost::property_tree;

const char* const kSweepHeader = "g_c,E_exact,E_cqe,abs_err,pop_exact,pop_cqe,sector_M,iters,verdict,seed";

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, sep)) out.push_back(field);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

double parse_real(const std::string& s) {
  if (s == "nan" || s == "-nan") return kNaN;
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ValidationError(fmt::format("not a number: '{}'", s));
  }
}

std::string kind_name(InitialStateSpec::Kind k) {
  switch (k) {
    case InitialStateSpec::Kind::tc_product: return "tc_product";
    case InitialStateSpec::Kind::uniform: return "uniform";
    case InitialStateSpec::Kind::explicit_state: return "explicit";
  }
  return "?";
}

InitialStateSpec::Kind parse_kind(const std::string& s) {
  if (s == "tc_product") return InitialStateSpec::Kind::tc_product;
  if (s == "uniform") return InitialStateSpec::Kind::uniform;
  throw ValidationError(fmt::format("initial state '{}' not recognized (tc_product | uniform)", s));
}

BackendMode parse_mode(const std::string& s) {
  if (s == "exact") return BackendMode::exact;
  if (s == "sampled") return BackendMode::sampled;
  throw ValidationError(fmt::format("backend '{}' not recognized (exact | sampled)", s));
}

}  // namespace

std::string format_real(double v) { return fmt::format("{:.17g}", v); }

void RunConfig::validate() const {
  model.validate();
  if (sweep.points < 1) throw ValidationError("sweep: points must be >= 1");
  if (!(sweep.g_lo <= sweep.g_hi)) throw ValidationError("sweep: g_lo must not exceed g_hi");
  if (threads < 0) throw ValidationError("threads must be >= 0");
  if (!(crossing_tol > 0.0)) throw ValidationError("crossings: tol must be positive");
  if (crossing_grid < 2) throw ValidationError("crossings: grid_points must be >= 2");
  if (out_dir.empty()) throw ValidationError("output directory must not be empty");
  solver.validate();
}

RunConfig load_config(std::istream& in) {
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ValidationError(fmt::format("config: {}", e.what()));
  }

  static const std::set<std::string> known = {
      "model.n_sites", "model.omega_b", "model.omega_f", "model.g_c", "model.n_max", "model.hamiltonian",
      "sweep.g_lo", "sweep.g_hi", "sweep.points", "sweep.threads",
      "solver.tol_variance", "solver.tol_energy", "solver.stall_window", "solver.max_iters",
      "solver.eta_lo", "solver.eta_hi", "solver.eta_tol", "solver.eta_max_evals", "solver.expand_factor",
      "solver.max_expansions", "solver.initial", "solver.theta", "solver.kappa",
      "backend.mode", "backend.shots", "backend.seed",
      "output.out",
      "crossings.tol", "crossings.grid_points"};
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty())
      throw ValidationError(fmt::format("config: key '{}' outside a section", section));
    for (const auto& [key, value] : body) {
      const std::string full = section + "." + key;
      if (!known.count(full)) throw ValidationError(fmt::format("config: unknown key '{}'", full));
    }
  }

  RunConfig c;
  // get(key, fallback) would silently return the fallback for unparsable values.
  auto get = [&tree](const std::string& key, auto fallback) {
    if (!tree.get_child_optional(key)) return fallback;
    try {
      return tree.get<decltype(fallback)>(key);
    } catch (const pt::ptree_bad_data&) {
      throw ValidationError(fmt::format("config: bad value for '{}'", key));
    }
  };
  c.model.n_sites = get("model.n_sites", c.model.n_sites);
  c.model.omega_b = get("model.omega_b", c.model.omega_b);
  c.model.omega_f = get("model.omega_f", c.model.omega_f);
  c.model.g_c = get("model.g_c", c.model.g_c);
  c.model.n_max = get("model.n_max", c.model.n_max);
  if (auto h = tree.get_optional<std::string>("model.hamiltonian")) c.hamiltonian_file = *h;
  c.sweep.g_lo = get("sweep.g_lo", c.sweep.g_lo);
  c.sweep.g_hi = get("sweep.g_hi", c.sweep.g_hi);
  c.sweep.points = get("sweep.points", c.sweep.points);
  c.threads = get("sweep.threads", c.threads);
  CqeConfig& s = c.solver;
  s.tol_variance = get("solver.tol_variance", s.tol_variance);
  s.tol_energy = get("solver.tol_energy", s.tol_energy);
  s.stall_window = get("solver.stall_window", s.stall_window);
  s.max_iters = get("solver.max_iters", s.max_iters);
  s.eta_search.lo = get("solver.eta_lo", s.eta_search.lo);
  s.eta_search.hi = get("solver.eta_hi", s.eta_search.hi);
  s.eta_search.tol = get("solver.eta_tol", s.eta_search.tol);
  s.eta_search.max_evals = get("solver.eta_max_evals", s.eta_search.max_evals);
  s.eta_search.expand_factor = get("solver.expand_factor", s.eta_search.expand_factor);
  s.eta_search.max_expansions = get("solver.max_expansions", s.eta_search.max_expansions);
  if (auto k = tree.get_optional<std::string>("solver.initial")) s.initial.kind = parse_kind(*k);
  s.initial.theta = get("solver.theta", s.initial.theta);
  s.initial.kappa = get("solver.kappa", s.initial.kappa);
  if (auto m = tree.get_optional<std::string>("backend.mode")) s.backend.mode = parse_mode(*m);
  s.backend.shots = get("backend.shots", s.backend.shots);
  c.seed = get("backend.seed", c.seed);
  c.out_dir = get("output.out", c.out_dir);
  c.crossing_tol = get("crossings.tol", c.crossing_tol);
  c.crossing_grid = get("crossings.grid_points", c.crossing_grid);
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(fmt::format("config: cannot open '{}'", path));
  return load_config(in);
}

void write_config(std::ostream& out, const RunConfig& c) {
  const CqeConfig& s = c.solver;
  out << "[model]\n"
      << "n_sites = " << c.model.n_sites << "\n"
      << "omega_b = " << format_real(c.model.omega_b) << "\n"
      << "omega_f = " << format_real(c.model.omega_f) << "\n"
      << "g_c = " << format_real(c.model.g_c) << "\n"
      << "n_max = " << c.model.n_max << "\n";
  if (c.hamiltonian_file) out << "hamiltonian = " << *c.hamiltonian_file << "\n";
  out << "\n[sweep]\n"
      << "g_lo = " << format_real(c.sweep.g_lo) << "\n"
      << "g_hi = " << format_real(c.sweep.g_hi) << "\n"
      << "points = " << c.sweep.points << "\n"
      << "threads = " << c.threads << "\n"
      << "\n[solver]\n"
      << "tol_variance = " << format_real(s.tol_variance) << "\n"
      << "tol_energy = " << format_real(s.tol_energy) << "\n"
      << "stall_window = " << s.stall_window << "\n"
      << "max_iters = " << s.max_iters << "\n"
      << "eta_lo = " << format_real(s.eta_search.lo) << "\n"
      << "eta_hi = " << format_real(s.eta_search.hi) << "\n"
      << "eta_tol = " << format_real(s.eta_search.tol) << "\n"
      << "eta_max_evals = " << s.eta_search.max_evals << "\n"
      << "expand_factor = " << format_real(s.eta_search.expand_factor) << "\n"
      << "max_expansions = " << s.eta_search.max_expansions << "\n"
      << "initial = " << kind_name(s.initial.kind) << "\n"
      << "theta = " << format_real(s.initial.theta) << "\n"
      << "kappa = " << format_real(s.initial.kappa) << "\n"
      << "\n[backend]\n"
      << "mode = " << (s.backend.mode == BackendMode::exact ? "exact" : "sampled") << "\n"
      << "shots = " << s.backend.shots << "\n"
      << "seed = " << c.seed << "\n"
      << "\n[output]\n"
      << "out = " << c.out_dir << "\n"
      << "\n[crossings]\n"
      << "tol = " << format_real(c.crossing_tol) << "\n"
      << "grid_points = " << c.crossing_grid << "\n";
}

HamiltonianSpec load_hamiltonian_file(const std::string& path, int n_max) {
  std::ifstream in(path);
  if (!in) throw ValidationError(fmt::format("hamiltonian: cannot open '{}'", path));
  std::vector<Term> terms = read_terms(in);
  if (terms.empty()) throw ValidationError(fmt::format("hamiltonian: '{}' has no terms", path));
  int f = 0;
  int b = 0;
  for (const auto& t : terms) {
    for (int i : t.op.fermion_create()) f = std::max(f, i + 1);
    for (int i : t.op.fermion_annihilate()) f = std::max(f, i + 1);
    for (int i : t.op.boson_create()) b = std::max(b, i + 1);
    for (int i : t.op.boson_annihilate()) b = std::max(b, i + 1);
  }
  if (f == 0) f = 1;
  if (b == 0) b = 1;
  return build_hamiltonian(FockBasis::create(f, n_max, {}, b), std::move(terms));
}

double mean_lower_population(const StateVector& psi, int n_sites) {
  double sum = 0.0;
  for (int i = 0; i < n_sites; ++i) {
    const int lo = tc_lower_mode(i);
    sum += inner(psi, apply_gamma(GammaOp({lo}, {lo}), psi)).real();
  }
  return sum / n_sites;
}

PointResult run_point(const RunConfig& c, double g, std::uint64_t index, std::optional<CqeTrace>* trace) {
  PointResult r;
  r.g_c = g;
  r.seed = derive_seed(c.seed, index);
  TcParams p = c.model;
  p.g_c = g;
  try {
    const HamiltonianSpec h = build_tavis_cummings(p);
    const Spectrum spec = diagonalize(h, 2);
    const SparseOperator m = excitation_number(h.basis_ptr(), p.n_sites);
    r.e_exact = spec.energies[0];
    r.pop_exact = mean_lower_population(spec.states[0], p.n_sites);
    r.sector = static_cast<int>(std::lround(inner(spec.states[0], m.apply(spec.states[0])).real()));

    CqeConfig sc = c.solver;
    sc.backend.seed = r.seed;
    sc.initial.n_sites = p.n_sites;
    sc.sector_operator = m;
    CqeTrace t = solve(h, sc);
    r.e_cqe = t.final_energy;
    r.abs_err = std::abs(r.e_cqe - r.e_exact);
    r.pop_cqe = mean_lower_population(t.final_state, p.n_sites);
    r.iters = t.steps();
    r.verdict = to_string(t.verdict);
    if (trace) trace->emplace(std::move(t));
  } catch (const NumericalError& e) {
    r.failed = true;
    r.error = e.what();
    r.verdict = "numerical_failure";
    r.e_cqe = r.abs_err = r.pop_cqe = kNaN;
  }
  return r;
}

std::vector<PointResult> run_sweep(const RunConfig& c) {
  c.validate();
  const int n = c.sweep.points;
  std::vector<PointResult> rows(static_cast<std::size_t>(n));
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < n; i = next++) rows[i] = run_point(c, c.sweep.at(i), static_cast<std::uint64_t>(i));
  };
  int threads = c.threads > 0 ? c.threads : static_cast<int>(std::thread::hardware_concurrency());
  threads = std::clamp(threads, 1, n);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  return rows;
}

void write_sweep_csv(std::ostream& out, const std::vector<PointResult>& rows) {
  out << kSweepHeader << "\n";
  for (const auto& r : rows) {
    out << format_real(r.g_c) << ',' << format_real(r.e_exact) << ',' << format_real(r.e_cqe) << ','
        << format_real(r.abs_err) << ',' << format_real(r.pop_exact) << ',' << format_real(r.pop_cqe) << ','
        << r.sector << ',' << r.iters << ',' << r.verdict << ',' << r.seed << "\n";
  }
}

std::vector<PointResult> read_sweep_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kSweepHeader) throw ValidationError("sweep csv: unexpected header");
  std::vector<PointResult> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 10) throw ValidationError(fmt::format("sweep csv: {} fields in '{}'", f.size(), line));
    PointResult r;
    r.g_c = parse_real(f[0]);
    r.e_exact = parse_real(f[1]);
    r.e_cqe = parse_real(f[2]);
    r.abs_err = parse_real(f[3]);
    r.pop_exact = parse_real(f[4]);
    r.pop_cqe = parse_real(f[5]);
    r.sector = std::stoi(f[6]);
    r.iters = std::stoi(f[7]);
    r.verdict = f[8];
    r.seed = std::stoull(f[9]);
    r.failed = r.verdict == "numerical_failure";
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_crossings_csv(std::ostream& out, const std::vector<Crossing>& xs) {
  out << "g_star,sector_below,sector_above\n";
  for (const auto& x : xs) out << format_real(x.g) << ',' << x.sector_below << ',' << x.sector_above << "\n";
}

std::vector<Crossing> read_crossings_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "g_star,sector_below,sector_above")
    throw ValidationError("crossings csv: unexpected header");
  std::vector<Crossing> xs;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 3) throw ValidationError(fmt::format("crossings csv: bad line '{}'", line));
    xs.push_back({parse_real(f[0]), std::stoi(f[1]), std::stoi(f[2])});
  }
  return xs;
}

GoldenDiff compare_crossings(const std::vector<Crossing>& golden, const std::vector<Crossing>& got, double tol) {
  GoldenDiff d;
  if (golden.size() != got.size()) {
    d.ok = false;
    d.mismatches.push_back(fmt::format("{} crossings, golden has {}", got.size(), golden.size()));
    return d;
  }
  for (std::size_t i = 0; i < got.size(); ++i) {
    const auto& a = golden[i];
    const auto& b = got[i];
    if (std::abs(a.g - b.g) > tol || a.sector_below != b.sector_below || a.sector_above != b.sector_above) {
      d.ok = false;
      d.mismatches.push_back(fmt::format("crossing {}: g*={:.12g} ({}->{}), golden {:.12g} ({}->{})", i, b.g,
                                         b.sector_below, b.sector_above, a.g, a.sector_below, a.sector_above));
    }
  }
  return d;
}

GoldenDiff compare_sweep_oracle(const std::vector<PointResult>& golden, const std::vector<PointResult>& got,
                                double tol) {
  GoldenDiff d;
  if (golden.size() != got.size()) {
    d.ok = false;
    d.mismatches.push_back(fmt::format("{} rows, golden has {}", got.size(), golden.size()));
    return d;
  }
  for (std::size_t i = 0; i < got.size(); ++i) {
    const auto& a = golden[i];
    const auto& b = got[i];
    const double worst = std::max({std::abs(a.g_c - b.g_c), std::abs(a.e_exact - b.e_exact),
                                   std::abs(a.pop_exact - b.pop_exact)});
    if (!(worst <= tol) || a.sector != b.sector) {
      d.ok = false;
      d.mismatches.push_back(fmt::format("row {} (g_c={:.6g}): oracle columns differ by {:.3e}, sector {} vs {}", i,
                                         b.g_c, worst, b.sector, a.sector));
    }
  }
  return d;
}

std::vector<TruncationRow> truncation_check(const RunConfig& c, int n_max_lo, int n_max_hi) {
  if (n_max_lo < 1 || n_max_hi < n_max_lo)
    throw ValidationError(fmt::format("truncation-check: need 1 <= n_max_lo <= n_max_hi, got {}..{}", n_max_lo,
                                      n_max_hi));
  std::vector<TruncationRow> rows;
  for (int i = 0; i < c.sweep.points; ++i) {
    TcParams p = c.model;
    p.g_c = c.sweep.at(i);
    std::vector<double> e;
    for (int n = n_max_lo; n <= n_max_hi; ++n) {
      p.n_max = n;
      e.push_back(diagonalize(build_tavis_cummings(p), 1).energies[0]);
    }
    for (int n = n_max_lo; n <= n_max_hi; ++n) {
      const double en = e[static_cast<std::size_t>(n - n_max_lo)];
      rows.push_back({n, p.g_c, en, en - e.back()});
    }
  }
  return rows;
}

void write_truncation_csv(std::ostream& out, const std::vector<TruncationRow>& rows) {
  out << "n_max,g_c,E_exact,delta\n";
  for (const auto& r : rows)
    out << r.n_max << ',' << format_real(r.g_c) << ',' << format_real(r.e_exact) << ',' << format_real(r.delta)
        << "\n";
}

SweepStats abs_err_stats(const std::vector<PointResult>& rows) {
  std::vector<double> v;
  for (const auto& r : rows)
    if (!r.failed) v.push_back(r.abs_err);
  SweepStats s;
  if (v.empty()) return {kNaN, kNaN};
  for (double x : v) s.mean += x;
  s.mean /= static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.stddev = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return s;
}

double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw ValidationError("fit_slope: need >= 2 paired points");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  if (sxx == 0.0) throw ValidationError("fit_slope: x values are all equal");
  return sxy / sxx;
}

constexpr double kMaxLogShots = 12.0;

Calibration calibrate_shots(const RunConfig& c, const std::vector<std::uint64_t>& shots, double target) {
  if (shots.size() < 2) throw ValidationError("calibrate-shots: need at least two shot counts");
  if (!(target > 0.0)) throw ValidationError("calibrate-shots: target must be positive");
  Calibration cal;
  std::vector<double> lx, ly;
  for (std::uint64_t s : shots) {
    if (s < 1) throw ValidationError("calibrate-shots: shot counts must be >= 1");
    RunConfig rc = c;
    rc.solver.backend.mode = BackendMode::sampled;
    rc.solver.backend.shots = s;
    const SweepStats st = abs_err_stats(run_sweep(rc));
    cal.rows.push_back({s, st.mean, st.stddev});
    if (st.mean > 0.0 && std::isfinite(st.mean)) {
      lx.push_back(std::log10(static_cast<double>(s)));
      ly.push_back(std::log10(st.mean));
    }
  }
  if (lx.size() < 2) throw NumericalError("calibrate-shots: fewer than two usable shot counts");
  cal.slope = fit_slope(lx, ly);

  // Bracket the target between neighbouring shot counts and interpolate in
  // log-log; fall back to the global fit outside the scanned range.
  const double lt = std::log10(target);
  double ls = kNaN;
  for (std::size_t i = 0; i + 1 < lx.size(); ++i) {
    const double a = ly[i] - lt;
    const double b = ly[i + 1] - lt;
    if (a == 0.0) {
      ls = lx[i];
      break;
    }
    if ((a > 0.0) != (b > 0.0) || b == 0.0) {
      ls = lx[i] + (lx[i + 1] - lx[i]) * a / (a - b);
      break;
    }
  }
  if (!std::isfinite(ls)) {
    if (cal.slope >= 0.0) {
      cal.unreachable = fmt::format("error does not decrease with shots (slope {:.3f})", cal.slope);
      return cal;
    }
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
      mx += lx[i];
      my += ly[i];
    }
    mx /= static_cast<double>(lx.size());
    my /= static_cast<double>(lx.size());
    ls = mx + (lt - my) / cal.slope;
    if (ls > kMaxLogShots) {
      cal.unreachable = fmt::format("target {:.3g} needs about 1e{:.1f} shots (slope {:.3f})", target, ls, cal.slope);
      return cal;
    }
  }
  cal.recommended = static_cast<std::uint64_t>(std::max(1.0, std::round(std::pow(10.0, ls))));
  return cal;
}

void write_calibration_csv(std::ostream& out, const Calibration& cal) {
  out << "shots,mean_abs_err,std_abs_err\n";
  for (const auto& r : cal.rows)
    out << r.shots << ',' << format_real(r.mean_abs_err) << ',' << format_real(r.std_abs_err) << "\n";
}

}  // namespace cqe
