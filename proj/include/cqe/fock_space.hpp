#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace cqe {

using cplx = std::complex<double>;

/// Fermionic occupation bitstring; bit p set means mode p is occupied.
using Occupation = std::uint64_t;

/// Predicate restricting admitted fermionic occupations.
using OccupationFilter = std::function<bool(Occupation)>;

/// Admits occupations with exactly one of the modes {2i, 2i+1} set for each
/// of the first `n_pairs` pairs.
OccupationFilter one_fermion_per_pair(int n_pairs);

struct BasisState {
  Occupation occupation = 0;
  std::vector<int> bosons;  // one occupation number per boson mode

  friend bool operator==(const BasisState&, const BasisState&) = default;
};

/// Truncated mixed Hilbert space: admitted fermionic occupations of F modes
/// tensored with boson number states 0..n_max of each boson mode.
///
/// Ordering is boson-configuration major, fermionic occupation minor. Boson
/// configurations are ranked in mixed radix (n_max + 1) with mode 0 least
/// significant; admitted occupations are ranked by their binary value.
class FockBasis {
 public:
  static constexpr std::size_t kDefaultDimCap = std::size_t{1} << 22;
  static constexpr int kMaxFermionModes = 24;

  static std::shared_ptr<const FockBasis> create(int n_fermion_modes, int n_boson_max,
                                                 OccupationFilter filter = {},
                                                 int n_boson_modes = 1,
                                                 std::size_t dim_cap = kDefaultDimCap);

  int n_fermion_modes() const { return n_fermion_modes_; }
  int n_boson_modes() const { return n_boson_modes_; }
  int n_boson_max() const { return n_boson_max_; }
  std::size_t dim() const { return dim_; }
  std::size_t n_fermion_states() const { return occupations_.size(); }
  std::size_t n_boson_states() const { return n_boson_states_; }
  bool filtered() const { return filtered_; }

  std::span<const Occupation> fermion_occupations() const { return occupations_; }
  bool admits(Occupation occupation) const;

  std::size_t index_of(Occupation occupation, int n_b) const;
  std::size_t index_of(Occupation occupation, std::span<const int> bosons) const;
  /// Like index_of but returns nullopt for filtered-out or out-of-range inputs.
  std::optional<std::size_t> find(Occupation occupation, std::span<const int> bosons) const;

  BasisState occupation_of(std::size_t index) const;
  Occupation fermion_occupation(std::size_t index) const;
  int boson_number(std::size_t index, int mode = 0) const;

  /// Hash of the full descriptor (mode counts, truncation, admitted set).
  std::uint64_t fingerprint() const { return fingerprint_; }
  bool same_as(const FockBasis& other) const;

 private:
  FockBasis() = default;

  int n_fermion_modes_ = 0;
  int n_boson_modes_ = 1;
  int n_boson_max_ = 0;
  bool filtered_ = false;
  std::size_t n_boson_states_ = 1;
  std::size_t dim_ = 0;
  std::vector<Occupation> occupations_;
  std::vector<std::int32_t> rank_;  // occupation -> rank, -1 if not admitted
  std::uint64_t fingerprint_ = 0;
};

using BasisPtr = std::shared_ptr<const FockBasis>;

/// Throws ValidationError unless both refer to an identical basis descriptor.
void require_same_basis(const FockBasis& a, const FockBasis& b);

/// Dense complex amplitudes over a FockBasis.
class StateVector {
 public:
  explicit StateVector(BasisPtr basis);
  StateVector(BasisPtr basis, Eigen::VectorXcd amplitudes);

  static StateVector basis_state(BasisPtr basis, std::size_t index);

  const FockBasis& basis() const { return *basis_; }
  const BasisPtr& basis_ptr() const { return basis_; }
  std::size_t dim() const { return static_cast<std::size_t>(amplitudes_.size()); }

  const Eigen::VectorXcd& amplitudes() const { return amplitudes_; }
  Eigen::VectorXcd& amplitudes() { return amplitudes_; }
  cplx operator[](std::size_t i) const { return amplitudes_[static_cast<Eigen::Index>(i)]; }
  cplx& operator[](std::size_t i) { return amplitudes_[static_cast<Eigen::Index>(i)]; }

  StateVector& operator+=(const StateVector& other);
  StateVector& operator-=(const StateVector& other);
  StateVector& operator*=(cplx factor);

 private:
  BasisPtr basis_;
  Eigen::VectorXcd amplitudes_;
};

StateVector operator+(StateVector a, const StateVector& b);
StateVector operator-(StateVector a, const StateVector& b);
StateVector operator*(cplx factor, StateVector a);

/// <a|b>, conjugate-linear in `a`.
cplx inner(const StateVector& a, const StateVector& b);
double norm(const StateVector& a);
StateVector normalize(StateVector a);

}  // namespace cqe
