#pragma once

#include <cstdint>
#include <vector>

#include "cqe/hamiltonian.hpp"

namespace cqe {

/// Eigenvalues closer than this are reported as degenerate.
constexpr double kDegeneracyTol = 1e-9;

struct Spectrum {
  std::vector<double> energies;     // ascending
  std::vector<StateVector> states;  // orthonormal, states[k] pairs with energies[k]
  std::vector<bool> degenerate;     // energies[k] within kDegeneracyTol of a neighbour
  std::uint64_t hamiltonian_hash = 0;
  int n_max = 0;

  bool ground_degenerate() const { return !degenerate.empty() && degenerate.front(); }
};

/// Lowest k eigenpairs by dense Hermitian diagonalization.
Spectrum diagonalize(const HamiltonianSpec& h, std::size_t k, std::size_t dense_cap = 4096);

struct Populations {
  std::vector<double> lower;  // <a+_{i-} a_{i-}> per site
  bool degenerate = false;    // ground level is degenerate; values are basis-dependent
};

Populations ground_populations(const Spectrum& s, int n_sites);

/// <M> of the ground state of the TC model at `p`.
double ground_excitation(const TcParams& p);
/// Rounded ground-state excitation number, the sector label used for crossings.
int ground_sector(const TcParams& p);

struct Crossing {
  double g;
  int sector_below;  // label for g slightly below the crossing
  int sector_above;
};

/// Bisection on the ground-state sector label over [g_lo, g_hi] (the g_c field
/// of `p` is ignored). Throws ValidationError when both ends share a sector.
Crossing find_crossing(TcParams p, double g_lo, double g_hi, double tol);

/// Locates every sector change visible on a uniform grid of `grid_points`
/// over [g_lo, g_hi] and refines each by bisection.
std::vector<Crossing> scan_crossings(const TcParams& p, double g_lo, double g_hi, double tol,
                                     int grid_points = 401);

}  // namespace cqe
