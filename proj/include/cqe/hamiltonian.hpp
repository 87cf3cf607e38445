#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <vector>

#include "cqe/fock_space.hpp"
#include "cqe/operator_algebra.hpp"

namespace cqe {

struct Term {
  cplx coefficient;
  GammaOp op;
};

/// H = sum_k h_k Gamma_k over a fixed basis. The matrix is assembled and
/// checked for Hermiticity at construction.
class HamiltonianSpec {
 public:
  const FockBasis& basis() const { return *basis_; }
  const BasisPtr& basis_ptr() const { return basis_; }
  const std::vector<Term>& terms() const { return terms_; }
  const SparseOperator& matrix() const { return matrix_; }
  std::uint64_t hash() const { return hash_; }

 private:
  friend HamiltonianSpec build_hamiltonian(BasisPtr basis, std::vector<Term> terms);
  HamiltonianSpec(BasisPtr basis, std::vector<Term> terms, SparseOperator matrix, std::uint64_t hash);

  BasisPtr basis_;
  std::vector<Term> terms_;
  SparseOperator matrix_;
  std::uint64_t hash_;
};

/// Merges duplicate Gamma signatures (first occurrence keeps its position),
/// assembles the matrix and rejects non-Hermitian term lists.
HamiltonianSpec build_hamiltonian(BasisPtr basis, std::vector<Term> terms);

struct TcParams {
  int n_sites = 3;
  double omega_b = 2.0;
  double omega_f = 0.5;
  double g_c = 0.0;
  int n_max = 4;

  void validate() const;
};

/// Site i (0-based) owns fermionic modes 2i (lower, "-") and 2i+1 (upper, "+").
constexpr int tc_lower_mode(int site) { return 2 * site; }
constexpr int tc_upper_mode(int site) { return 2 * site + 1; }

BasisPtr tavis_cummings_basis(const TcParams& p);

/// omega_b b+b + sum_i [omega_f n_{i+} + g_c (a+_{i+} a_{i-} b + a+_{i-} a_{i+} b+)]
/// on a one-fermion-per-site basis.
HamiltonianSpec build_tavis_cummings(const TcParams& p);

/// M = b+b + sum_i a+_{i+} a_{i+}.
SparseOperator excitation_number(BasisPtr basis, int n_sites);

double energy(const HamiltonianSpec& h, const StateVector& psi);
/// <H^2> - <H>^2, clamped at zero.
double variance(const HamiltonianSpec& h, const StateVector& psi);
/// sum_k h_k <psi|Gamma_k H|psi> - E^2, evaluated term by term.
double contracted_variance(const HamiltonianSpec& h, const StateVector& psi);

/// Groups basis states by the eigenvalue of a diagonal integer-valued operator.
class SectorResolver {
 public:
  explicit SectorResolver(const SparseOperator& diagonal);

  const std::vector<int>& sectors() const { return sectors_; }
  int label_of(std::size_t index) const { return labels_[index]; }
  /// Weight of psi in each sector, ordered as sectors().
  std::vector<double> weights(const StateVector& psi) const;
  int dominant(const StateVector& psi) const;

 private:
  std::vector<int> labels_;
  std::vector<int> sectors_;
};

/// One term per line:
///   coeff_re coeff_im | create_f: i.. | annih_f: k.. | create_b: j.. | annih_b: l..
/// Blank lines and lines starting with '#' are ignored on input.
void write_terms(std::ostream& out, const std::vector<Term>& terms);
std::vector<Term> read_terms(std::istream& in);

}  // namespace cqe
