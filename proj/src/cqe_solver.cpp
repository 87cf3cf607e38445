#include "cqe/cqe_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>

#include <fmt/format.h>

#include "cqe/errors.hpp"

namespace cqe {

namespace {

constexpr double kSymmetryTol = 1e-12;
constexpr double kGolden = 0.6180339887498949;

// Steepest-descent coefficients: dE/deta = -sum |c_k|^2 even once the state picks up a phase.
std::vector<cplx> conjugated(std::span<const cplx> c) {
  std::vector<cplx> out(c.begin(), c.end());
  for (auto& x : out) x = std::conj(x);
  return out;
}

double coefficient_norm(std::span<const cplx> c) {
  double s = 0.0;
  for (const auto& v : c) s += std::norm(v);
  return std::sqrt(s);
}

void require_closed(const CqePool& pool) {
  if (!pool.closed_under_adjoint)
    throw ValidationError("assemble: pool must be closed under adjoint");
}

SparseOperator combine(const CqePool& pool, std::span<const cplx> coefficients) {
  if (coefficients.size() != pool.size())
    throw ValidationError(fmt::format("assemble: {} coefficients for a pool of {}", coefficients.size(),
                                      pool.size()));
  if (pool.matrices.empty()) throw ValidationError("assemble: empty pool");
  SparseOperator x = SparseOperator::zero(pool.matrices.front().basis_ptr());
  for (std::size_t k = 0; k < pool.size(); ++k)
    if (coefficients[k] != cplx{0.0, 0.0}) x += coefficients[k] * pool.matrices[k];
  return x;
}

std::string join_reals(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ';';
    s += fmt::format("{:.17g}", v[i]);
  }
  return s;
}

}  // namespace

CqePool build_pool(const HamiltonianSpec& h) {
  CqePool pool;
  auto add = [&pool](const GammaOp& op) {
    if (op.is_identity()) return;
    if (std::find(pool.ops.begin(), pool.ops.end(), op) == pool.ops.end()) pool.ops.push_back(op);
  };
  for (const auto& t : h.terms()) add(t.op);
  const std::size_t n_terms = pool.ops.size();
  for (std::size_t k = 0; k < n_terms; ++k) add(adjoint(pool.ops[k]));

  pool.closed_under_adjoint = std::all_of(pool.ops.begin(), pool.ops.end(), [&pool](const GammaOp& op) {
    return std::find(pool.ops.begin(), pool.ops.end(), adjoint(op)) != pool.ops.end();
  });
  for (const auto& op : pool.ops) pool.matrices.push_back(to_matrix(op, h.basis_ptr()));
  return pool;
}

std::vector<cplx> residual_A(const CqePool& pool, const HamiltonianSpec& h, const StateVector& psi,
                             Backend& backend) {
  require_same_basis(h.basis(), psi.basis());
  std::vector<cplx> a;
  a.reserve(pool.size());
  for (const auto& g : pool.matrices) a.push_back(backend.expect(psi, commutator_action(g, h.matrix(), psi)));
  return a;
}

std::vector<cplx> residual_B(const CqePool& pool, const HamiltonianSpec& h, const StateVector& phi,
                             double e, Backend& backend) {
  require_same_basis(h.basis(), phi.basis());
  std::vector<cplx> b;
  b.reserve(pool.size());
  for (const auto& g : pool.matrices)
    b.push_back(backend.expect(phi, anticommutator_action(g, h.matrix(), e, phi)));
  return b;
}

AssembledOperator assemble_antihermitian(const CqePool& pool, std::span<const cplx> coefficients) {
  require_closed(pool);
  const SparseOperator x = combine(pool, coefficients);
  const double defect = x.anti_hermiticity_defect();
  const bool symmetrized = defect > kSymmetryTol * std::max(1.0, x.frobenius_norm());
  SparseOperator projected = cplx{0.5, 0.0} * (x - x.adjoint());
  return {projected.with_symmetry(Symmetry::anti_hermitian), defect, symmetrized};
}

AssembledOperator assemble_hermitian(const CqePool& pool, std::span<const cplx> coefficients) {
  require_closed(pool);
  const SparseOperator x = combine(pool, coefficients);
  const double defect = x.hermiticity_defect();
  const bool symmetrized = defect > kSymmetryTol * std::max(1.0, x.frobenius_norm());
  SparseOperator projected = cplx{0.5, 0.0} * (x + x.adjoint());
  return {projected.with_symmetry(Symmetry::hermitian), defect, symmetrized};
}

LineSearchResult line_search(const HamiltonianSpec& h, const SparseOperator& x,
                             const StateVector& psi, const LineSearchSpec& spec) {
  if (!(spec.lo <= 0.0 && spec.hi >= 0.0))
    throw ValidationError(fmt::format("line_search: bracket [{}, {}] must contain 0", spec.lo, spec.hi));
  if (!(spec.tol > 0.0) || spec.max_evals < 3)
    throw ValidationError("line_search: need tol > 0 and at least 3 evaluations");
  if (!(spec.expand_factor > 1.0) || spec.max_expansions < 0)
    throw ValidationError("line_search: expand_factor must exceed 1 and max_expansions be >= 0");

  const StateVector start = normalize(psi);
  LineSearchResult best{0.0, start, energy(h, start), 1};
  if (x.frobenius_norm() == 0.0) return best;

  std::optional<KrylovExponential> krylov;
  Eigen::MatrixXcd h_projected;
  if (x.symmetry() != Symmetry::general) {
    krylov.emplace(x, start, spec.exp_tol);
    h_projected = krylov->project(h.matrix());
  }

  double best_eta = 0.0;
  double best_energy = best.energy;
  int evals = 0;
  int finite_evals = 0;
  auto f = [&](double eta) {
    ++evals;
    double e = std::numeric_limits<double>::infinity();
    try {
      if (krylov && krylov->error_estimate(eta) <= spec.exp_tol) {
        const Eigen::VectorXcd c = krylov->coefficients(eta);
        e = c.dot(h_projected * c).real();
      } else {
        e = energy(h, apply_exp(x, eta, start, spec.exp_tol));
      }
    } catch (const NumericalError&) {
      return std::numeric_limits<double>::infinity();
    }
    if (!std::isfinite(e)) return std::numeric_limits<double>::infinity();
    ++finite_evals;
    if (e < best_energy) {
      best_energy = e;
      best_eta = eta;
    }
    return e;
  };

  auto golden = [&](double a, double b) {
    double c = b - kGolden * (b - a);
    double d = a + kGolden * (b - a);
    double fc = f(c);
    double fd = f(d);
    for (int it = 0; b - a > spec.tol && it < spec.max_evals; ++it) {
      if (fc < fd) {
        b = d;
        d = c;
        fd = fc;
        c = b - kGolden * (b - a);
        fc = f(c);
      } else {
        a = c;
        c = d;
        fc = fd;
        d = a + kGolden * (b - a);
        fd = f(d);
      }
    }
  };

  // Golden-section on the initial bracket, then keep widening by
  // expand_factor while the minimizer sits on an edge. Non-unitary steps
  // near a fixed point need |eta| of order 1/error, far outside [-1, 1].
  double cur_lo = spec.lo;
  double cur_hi = spec.hi;
  golden(cur_lo, cur_hi);
  if (finite_evals == 0) {
    cur_lo *= 0.5;
    cur_hi *= 0.5;
    golden(cur_lo, cur_hi);
    if (finite_evals == 0)
      throw NumericalError(fmt::format("line_search: non-finite energy over [{}, {}] and the halved bracket",
                                       spec.lo, spec.hi));
  }
  const double edge_tol = 2.0 * spec.tol;
  for (int expansion = 0; expansion < spec.max_expansions; ++expansion) {
    if (cur_hi > 0.0 && best_eta >= cur_hi - edge_tol) {
      const double next = cur_hi * spec.expand_factor;
      golden(cur_hi, next);
      cur_hi = next;
    } else if (cur_lo < 0.0 && best_eta <= cur_lo + edge_tol) {
      const double next = cur_lo * spec.expand_factor;
      golden(next, cur_lo);
      cur_lo = next;
    } else {
      break;
    }
  }
  best.evaluations = evals;

  if (best_eta != 0.0) {
    StateVector s = (krylov && krylov->error_estimate(best_eta) <= spec.exp_tol)
                        ? normalize(krylov->state(best_eta))
                        : apply_exp(x, best_eta, start, spec.exp_tol);
    const double e = energy(h, s);
    // Projected and direct energies agree to rounding; keep the guarantee strict.
    if (e <= best.energy + 1e-12) best = LineSearchResult{best_eta, std::move(s), e, evals};
  }
  return best;
}

StateVector tc_product_state(BasisPtr basis, int n_sites, double theta, double kappa) {
  if (basis->n_boson_modes() != 1) throw ValidationError("tc_product_state: single boson mode required");
  if (tc_upper_mode(n_sites - 1) >= basis->n_fermion_modes())
    throw ValidationError("tc_product_state: site count does not match the basis");
  StateVector v(basis);
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  for (std::size_t p = 0; p < basis->dim(); ++p) {
    const Occupation occ = basis->fermion_occupation(p);
    const int n = basis->boson_number(p);
    double amp = std::pow(kappa, n) / std::sqrt(std::tgamma(n + 1.0));
    for (int i = 0; i < n_sites && amp != 0.0; ++i) {
      const bool lo = (occ >> tc_lower_mode(i)) & 1U;
      const bool up = (occ >> tc_upper_mode(i)) & 1U;
      if (lo && !up) {
        amp *= c;
      } else if (up && !lo) {
        amp *= s;
      } else {
        amp = 0.0;
      }
    }
    v[p] = amp;
  }
  return normalize(std::move(v));
}

StateVector make_initial_state(BasisPtr basis, const InitialStateSpec& spec) {
  switch (spec.kind) {
    case InitialStateSpec::Kind::tc_product:
      return tc_product_state(std::move(basis), spec.n_sites, spec.theta, spec.kappa);
    case InitialStateSpec::Kind::uniform: {
      StateVector v(basis);
      v.amplitudes().setConstant(cplx{1.0, 0.0});
      return normalize(std::move(v));
    }
    case InitialStateSpec::Kind::explicit_state:
      if (!spec.state) throw ValidationError("initial state: explicit kind without a state");
      require_same_basis(*basis, spec.state->basis());
      return normalize(*spec.state);
  }
  throw ValidationError("initial state: unknown kind");
}

void CqeConfig::validate() const {
  if (!(tol_variance > 0.0) || !(tol_energy > 0.0))
    throw ValidationError("CqeConfig: tolerances must be positive");
  if (max_iters < 1) throw ValidationError("CqeConfig: max_iters must be >= 1");
  if (stall_window < 1) throw ValidationError("CqeConfig: stall_window must be >= 1");
  if (!(eta_search.lo <= 0.0 && eta_search.hi >= 0.0))
    throw ValidationError("CqeConfig: eta bracket must contain 0");
  if (backend.mode == BackendMode::sampled && backend.shots < 1)
    throw ValidationError("CqeConfig: sampled backend needs shots >= 1");
}

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::converged_variance: return "converged_variance";
    case Verdict::converged_energy: return "converged_energy";
    case Verdict::max_iters: return "max_iters";
  }
  return "unknown";
}

CqeTrace solve(const HamiltonianSpec& h, const CqeConfig& config) {
  config.validate();
  Backend backend = Backend::from_spec(config.backend);
  const CqePool pool = build_pool(h);
  std::optional<SectorResolver> sectors;
  if (config.sector_operator) sectors.emplace(*config.sector_operator);

  StateVector psi = make_initial_state(h.basis_ptr(), config.initial);
  std::vector<CqeIteration> records;
  Verdict verdict = Verdict::max_iters;
  int stall = 0;

  for (int n = 0;; ++n) {
    CqeIteration rec;
    rec.n = n;
    rec.energy = energy(h, psi);
    rec.variance = variance(h, psi);
    if (sectors) rec.sector_weights = sectors->weights(psi);

    if (rec.variance <= config.tol_variance) {
      verdict = Verdict::converged_variance;
    } else if (stall >= config.stall_window) {
      verdict = Verdict::converged_energy;
    } else if (n >= config.max_iters) {
      verdict = Verdict::max_iters;
    } else {
      const auto a = residual_A(pool, h, psi, backend);
      const AssembledOperator a_op = assemble_antihermitian(pool, conjugated(a));
      LineSearchResult unitary = line_search(h, a_op.op, psi, config.eta_search);
      const StateVector& phi = unitary.state;
      if (sectors) rec.sector_weights_unitary = sectors->weights(phi);

      const double e_phi = backend.expect_hermitian(phi, h.matrix().apply(phi));
      const auto b = residual_B(pool, h, phi, e_phi, backend);
      const AssembledOperator b_op = assemble_hermitian(pool, conjugated(b));
      LineSearchResult nonunitary = line_search(h, b_op.op, phi, config.eta_search);

      rec.stepped = true;
      rec.norm_A = coefficient_norm(a);
      rec.norm_B = coefficient_norm(b);
      rec.eta_A = unitary.eta;
      rec.eta_B = nonunitary.eta;
      rec.symmetrized = a_op.symmetrized || b_op.symmetrized;

      stall = std::abs(nonunitary.energy - rec.energy) <= config.tol_energy ? stall + 1 : 0;
      psi = std::move(nonunitary.state);
      records.push_back(std::move(rec));
      continue;
    }
    records.push_back(std::move(rec));
    break;
  }

  const double final_energy = records.back().energy;
  return CqeTrace{std::move(records),
                  sectors ? sectors->sectors() : std::vector<int>{},
                  std::move(psi),
                  final_energy,
                  verdict,
                  backend.evaluations()};
}

void write_trace(std::ostream& out, const CqeTrace& trace) {
  std::string labels;
  for (std::size_t i = 0; i < trace.sectors.size(); ++i)
    labels += (i ? ";" : "") + std::to_string(trace.sectors[i]);
  out << "# verdict=" << to_string(trace.verdict) << " steps=" << trace.steps()
      << " sectors=" << labels << '\n';
  out << "iter,energy,variance,stepped,norm_A,norm_B,eta_A,eta_B,symmetrized,sector_weights,"
         "sector_weights_unitary\n";
  for (const auto& r : trace.iterations) {
    out << fmt::format("{},{:.17g},{:.17g},{},{:.17g},{:.17g},{:.17g},{:.17g},{},{},{}\n", r.n, r.energy,
                       r.variance, r.stepped ? 1 : 0, r.norm_A, r.norm_B, r.eta_A, r.eta_B,
                       r.symmetrized ? 1 : 0, join_reals(r.sector_weights),
                       join_reals(r.sector_weights_unitary));
  }
}

}  // namespace cqe
