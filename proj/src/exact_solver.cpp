#include "cqe/exact_solver.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>
#include <fmt/format.h>

#include "cqe/errors.hpp"

namespace cqe {

Spectrum diagonalize(const HamiltonianSpec& h, std::size_t k, std::size_t dense_cap) {
  const std::size_t dim = h.basis().dim();
  if (dim > dense_cap)
    throw ValidationError(fmt::format("diagonalize: dim {} exceeds dense cap {}", dim, dense_cap));
  if (k == 0) throw ValidationError("diagonalize: need k >= 1");
  k = std::min(k, dim);

  const Eigen::MatrixXcd dense = h.matrix().to_dense();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(dense);
  if (solver.info() != Eigen::Success) throw NumericalError("diagonalize: eigensolver failed");

  const Eigen::VectorXd& evals = solver.eigenvalues();
  Spectrum s;
  s.hamiltonian_hash = h.hash();
  s.n_max = h.basis().n_boson_max();
  for (std::size_t i = 0; i < k; ++i) {
    const auto col = static_cast<Eigen::Index>(i);
    StateVector v(h.basis_ptr(), solver.eigenvectors().col(col));
    const double residual = (dense * v.amplitudes() - evals[col] * v.amplitudes()).norm();
    if (residual > 1e-9)
      throw NumericalError(fmt::format("diagonalize: eigenpair {} residual {:.3e}", i, residual));
    s.energies.push_back(evals[col]);
    s.states.push_back(std::move(v));
  }
  s.degenerate.assign(k, false);
  for (std::size_t i = 0; i < k; ++i) {
    const auto col = static_cast<Eigen::Index>(i);
    if (col + 1 < evals.size() && evals[col + 1] - evals[col] <= kDegeneracyTol) s.degenerate[i] = true;
    if (col > 0 && evals[col] - evals[col - 1] <= kDegeneracyTol) s.degenerate[i] = true;
  }
  return s;
}

Populations ground_populations(const Spectrum& s, int n_sites) {
  if (s.states.empty()) throw ValidationError("ground_populations: empty spectrum");
  const StateVector& g = s.states.front();
  if (tc_upper_mode(n_sites - 1) >= g.basis().n_fermion_modes())
    throw ValidationError("ground_populations: site count does not match the basis");
  Populations pops;
  pops.degenerate = s.ground_degenerate();
  for (int i = 0; i < n_sites; ++i) {
    const int lo = tc_lower_mode(i);
    pops.lower.push_back(inner(g, apply_gamma(GammaOp({lo}, {lo}), g)).real());
  }
  return pops;
}

double ground_excitation(const TcParams& p) {
  const HamiltonianSpec h = build_tavis_cummings(p);
  const Spectrum s = diagonalize(h, 1);
  const SparseOperator m = excitation_number(h.basis_ptr(), p.n_sites);
  return inner(s.states[0], m.apply(s.states[0])).real();
}

int ground_sector(const TcParams& p) {
  return static_cast<int>(std::lround(ground_excitation(p)));
}

Crossing find_crossing(TcParams p, double g_lo, double g_hi, double tol) {
  if (!(tol > 0.0)) throw ValidationError("find_crossing: tolerance must be positive");
  if (g_lo > g_hi) std::swap(g_lo, g_hi);
  auto sector_at = [&p](double g) {
    p.g_c = g;
    return ground_sector(p);
  };
  int lo_sector = sector_at(g_lo);
  const int hi_sector = sector_at(g_hi);
  if (lo_sector == hi_sector)
    throw ValidationError(fmt::format("find_crossing: no sector change in [{}, {}] (sector {} at both ends)",
                                      g_lo, g_hi, lo_sector));
  double lo = g_lo;
  double hi = g_hi;
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    if (sector_at(mid) == lo_sector) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  lo_sector = sector_at(lo);
  return Crossing{0.5 * (lo + hi), lo_sector, sector_at(hi)};
}

std::vector<Crossing> scan_crossings(const TcParams& p, double g_lo, double g_hi, double tol,
                                     int grid_points) {
  std::vector<Crossing> out;
  if (!(g_hi > g_lo)) return out;
  if (grid_points < 2) throw ValidationError("scan_crossings: need at least 2 grid points");
  TcParams q = p;
  auto sector_at = [&q](double g) {
    q.g_c = g;
    return ground_sector(q);
  };
  double prev_g = g_lo;
  int prev = sector_at(prev_g);
  for (int i = 1; i < grid_points; ++i) {
    const double g = g_lo + (g_hi - g_lo) * i / (grid_points - 1);
    const int cur = sector_at(g);
    if (cur != prev) out.push_back(find_crossing(p, prev_g, g, tol));
    prev = cur;
    prev_g = g;
  }
  return out;
}

}  // namespace cqe
