#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cqe/hamiltonian.hpp"
#include "cqe/measurement.hpp"

namespace cqe {

/// Residual operators: the distinct non-identity Gamma of the Hamiltonian
/// (term order) followed by any missing adjoints.
struct CqePool {
  std::vector<GammaOp> ops;
  std::vector<SparseOperator> matrices;  // matrices[k] realizes ops[k]
  bool closed_under_adjoint = false;

  std::size_t size() const { return ops.size(); }
};

CqePool build_pool(const HamiltonianSpec& h);

/// A_k = <psi|[Gamma_k, H]|psi>
std::vector<cplx> residual_A(const CqePool& pool, const HamiltonianSpec& h, const StateVector& psi,
                             Backend& backend);
/// B_k = <phi|{Gamma_k, H - E}|phi>
std::vector<cplx> residual_B(const CqePool& pool, const HamiltonianSpec& h, const StateVector& phi,
                             double e, Backend& backend);

struct AssembledOperator {
  SparseOperator op;
  double defect;     // |X +- X^dagger| before projection
  bool symmetrized;  // defect exceeded tolerance (noisy coefficients)
};

/// sum_k A_k Gamma_k, projected onto the anti-Hermitian part.
AssembledOperator assemble_antihermitian(const CqePool& pool, std::span<const cplx> coefficients);
/// sum_k B_k Gamma_k, projected onto the Hermitian part.
AssembledOperator assemble_hermitian(const CqePool& pool, std::span<const cplx> coefficients);

struct LineSearchSpec {
  double lo = -1.0;
  double hi = 1.0;
  double tol = 1e-6;
  int max_evals = 60;
  double exp_tol = 1e-12;
  double expand_factor = 4.0;
  int max_expansions = 30;  // 0 keeps the search inside [lo, hi]
};

struct LineSearchResult {
  double eta;
  StateVector state;  // normalized exp(eta X) psi
  double energy;
  int evaluations;
};

/// Golden-section minimization of E(eta) = <H> in exp(eta X)|psi>/|...|.
/// While the minimizer sits on the bracket edge the search walks outward
/// by expand_factor, at most max_expansions times. Never returns
/// a state with energy above E(0) + 1e-12.
LineSearchResult line_search(const HamiltonianSpec& h, const SparseOperator& x,
                             const StateVector& psi, const LineSearchSpec& spec);

struct InitialStateSpec {
  enum class Kind { tc_product, uniform, explicit_state };
  Kind kind = Kind::tc_product;
  int n_sites = 1;
  double theta = 0.2;
  double kappa = 0.5;
  std::optional<StateVector> state;
};

/// prod_i (cos(theta)|->_i + sin(theta)|+>_i) x sum_n kappa^n/sqrt(n!) |n>, normalized.
StateVector tc_product_state(BasisPtr basis, int n_sites, double theta, double kappa);
StateVector make_initial_state(BasisPtr basis, const InitialStateSpec& spec);

struct CqeConfig {
  LineSearchSpec eta_search;
  double tol_variance = 1e-8;
  double tol_energy = 1e-9;
  int stall_window = 3;
  int max_iters = 500;
  InitialStateSpec initial;
  BackendSpec backend;
  /// Diagonal integer operator whose sector weights are traced (e.g. M).
  std::optional<SparseOperator> sector_operator;

  void validate() const;
};

enum class Verdict { converged_variance, converged_energy, max_iters };

std::string to_string(Verdict v);

struct CqeIteration {
  int n = 0;
  double energy = 0.0;    // exact <H> of Psi^(n)
  double variance = 0.0;  // exact variance of Psi^(n)
  bool stepped = false;   // false for the final record
  double norm_A = 0.0;
  double norm_B = 0.0;
  double eta_A = 0.0;
  double eta_B = 0.0;
  bool symmetrized = false;
  std::vector<double> sector_weights;          // of Psi^(n)
  std::vector<double> sector_weights_unitary;  // of Phi^(n), after the unitary factor
};

struct CqeTrace {
  std::vector<CqeIteration> iterations;
  std::vector<int> sectors;  // labels matching the sector weight vectors
  StateVector final_state;
  double final_energy = 0.0;
  Verdict verdict = Verdict::max_iters;
  std::uint64_t noisy_evaluations = 0;

  /// Number of update steps taken.
  int steps() const { return static_cast<int>(iterations.size()) - 1; }
};

/// Psi^(n+1) = exp(eta_B B^(n)) exp(eta_A A^(n)) Psi^(n), renormalized.
CqeTrace solve(const HamiltonianSpec& h, const CqeConfig& config);

/// One CSV record per iteration after a '#' header line carrying the verdict
/// and sector labels. Reals use 17 significant digits.
void write_trace(std::ostream& out, const CqeTrace& trace);

}  // namespace cqe
