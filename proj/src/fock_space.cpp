#include "cqe/fock_space.hpp"

#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "cqe/errors.hpp"

namespace cqe {

namespace {

constexpr std::uint64_t kFnvOffset = 1469598103934665603ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

void mix(std::uint64_t& h, std::uint64_t value) {
  for (int byte = 0; byte < 8; ++byte) {
    h ^= (value >> (8 * byte)) & 0xffU;
    h *= kFnvPrime;
  }
}

}  // namespace

OccupationFilter one_fermion_per_pair(int n_pairs) {
  if (n_pairs < 1) throw ValidationError("one_fermion_per_pair: need at least one pair");
  return [n_pairs](Occupation occ) {
    for (int i = 0; i < n_pairs; ++i) {
      const bool lower = (occ >> (2 * i)) & 1U;
      const bool upper = (occ >> (2 * i + 1)) & 1U;
      if (lower == upper) return false;
    }
    return true;
  };
}

std::shared_ptr<const FockBasis> FockBasis::create(int n_fermion_modes, int n_boson_max,
                                                   OccupationFilter filter, int n_boson_modes,
                                                   std::size_t dim_cap) {
  if (n_fermion_modes < 1)
    throw ValidationError(fmt::format("FockBasis: need F >= 1 fermionic modes, got {}", n_fermion_modes));
  if (n_fermion_modes > kMaxFermionModes)
    throw ValidationError(fmt::format("FockBasis: F = {} exceeds the supported maximum {}",
                                      n_fermion_modes, kMaxFermionModes));
  if (n_boson_max < 0) throw ValidationError("FockBasis: boson truncation n_max must be >= 0");
  if (n_boson_modes < 1) throw ValidationError("FockBasis: need at least one boson mode");

  std::shared_ptr<FockBasis> basis(new FockBasis());
  basis->n_fermion_modes_ = n_fermion_modes;
  basis->n_boson_modes_ = n_boson_modes;
  basis->n_boson_max_ = n_boson_max;
  basis->filtered_ = static_cast<bool>(filter);

  std::size_t boson_states = 1;
  const auto radix = static_cast<std::size_t>(n_boson_max) + 1;
  for (int m = 0; m < n_boson_modes; ++m) {
    if (boson_states > dim_cap / radix)
      throw ValidationError(fmt::format("FockBasis: dimension exceeds cap {}", dim_cap));
    boson_states *= radix;
  }
  basis->n_boson_states_ = boson_states;

  const Occupation n_occ = Occupation{1} << n_fermion_modes;
  basis->rank_.assign(n_occ, -1);
  for (Occupation occ = 0; occ < n_occ; ++occ) {
    if (filter && !filter(occ)) continue;
    basis->rank_[occ] = static_cast<std::int32_t>(basis->occupations_.size());
    basis->occupations_.push_back(occ);
  }
  if (basis->occupations_.empty())
    throw ValidationError("FockBasis: occupation filter admits no states (dim = 0)");
  if (basis->occupations_.size() > dim_cap / boson_states)
    throw ValidationError(fmt::format("FockBasis: dimension {} x {} exceeds cap {}",
                                      basis->occupations_.size(), boson_states, dim_cap));
  basis->dim_ = basis->occupations_.size() * boson_states;

  std::uint64_t h = kFnvOffset;
  mix(h, static_cast<std::uint64_t>(n_fermion_modes));
  mix(h, static_cast<std::uint64_t>(n_boson_modes));
  mix(h, static_cast<std::uint64_t>(n_boson_max));
  mix(h, basis->occupations_.size());
  for (Occupation occ : basis->occupations_) mix(h, occ);
  basis->fingerprint_ = h;
  return basis;
}

bool FockBasis::admits(Occupation occupation) const {
  return occupation < rank_.size() && rank_[occupation] >= 0;
}

std::optional<std::size_t> FockBasis::find(Occupation occupation,
                                           std::span<const int> bosons) const {
  if (!admits(occupation)) return std::nullopt;
  if (bosons.size() != static_cast<std::size_t>(n_boson_modes_)) return std::nullopt;
  std::size_t config = 0;
  std::size_t stride = 1;
  for (int m = 0; m < n_boson_modes_; ++m) {
    const int n = bosons[static_cast<std::size_t>(m)];
    if (n < 0 || n > n_boson_max_) return std::nullopt;
    config += static_cast<std::size_t>(n) * stride;
    stride *= static_cast<std::size_t>(n_boson_max_) + 1;
  }
  return config * occupations_.size() + static_cast<std::size_t>(rank_[occupation]);
}

std::size_t FockBasis::index_of(Occupation occupation, std::span<const int> bosons) const {
  if (bosons.size() != static_cast<std::size_t>(n_boson_modes_))
    throw ValidationError(fmt::format("index_of: expected {} boson numbers, got {}",
                                      n_boson_modes_, bosons.size()));
  for (int n : bosons)
    if (n < 0 || n > n_boson_max_)
      throw ValidationError(fmt::format("index_of: boson number {} outside [0, {}]", n, n_boson_max_));
  if (!admits(occupation))
    throw ValidationError(fmt::format("index_of: occupation {:#b} is not admitted by the basis", occupation));
  return *find(occupation, bosons);
}

std::size_t FockBasis::index_of(Occupation occupation, int n_b) const {
  if (n_boson_modes_ != 1)
    throw ValidationError("index_of: single boson number given for a multi-mode basis");
  const int bosons[1] = {n_b};
  return index_of(occupation, std::span<const int>(bosons, 1));
}

BasisState FockBasis::occupation_of(std::size_t index) const {
  if (index >= dim_) throw ValidationError(fmt::format("occupation_of: index {} >= dim {}", index, dim_));
  BasisState state;
  state.occupation = occupations_[index % occupations_.size()];
  std::size_t config = index / occupations_.size();
  const auto radix = static_cast<std::size_t>(n_boson_max_) + 1;
  state.bosons.resize(static_cast<std::size_t>(n_boson_modes_));
  for (int m = 0; m < n_boson_modes_; ++m) {
    state.bosons[static_cast<std::size_t>(m)] = static_cast<int>(config % radix);
    config /= radix;
  }
  return state;
}

Occupation FockBasis::fermion_occupation(std::size_t index) const {
  return occupations_[index % occupations_.size()];
}

int FockBasis::boson_number(std::size_t index, int mode) const {
  std::size_t config = index / occupations_.size();
  const auto radix = static_cast<std::size_t>(n_boson_max_) + 1;
  for (int m = 0; m < mode; ++m) config /= radix;
  return static_cast<int>(config % radix);
}

bool FockBasis::same_as(const FockBasis& other) const {
  if (this == &other) return true;
  return fingerprint_ == other.fingerprint_ && dim_ == other.dim_ &&
         n_fermion_modes_ == other.n_fermion_modes_ && n_boson_modes_ == other.n_boson_modes_ &&
         n_boson_max_ == other.n_boson_max_ && occupations_ == other.occupations_;
}

void require_same_basis(const FockBasis& a, const FockBasis& b) {
  if (!a.same_as(b))
    throw ValidationError(fmt::format("basis mismatch: descriptors {:#x} (dim {}) and {:#x} (dim {})",
                                      a.fingerprint(), a.dim(), b.fingerprint(), b.dim()));
}

StateVector::StateVector(BasisPtr basis)
    : basis_(std::move(basis)),
      amplitudes_(Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(basis_->dim()))) {}

StateVector::StateVector(BasisPtr basis, Eigen::VectorXcd amplitudes)
    : basis_(std::move(basis)), amplitudes_(std::move(amplitudes)) {
  if (static_cast<std::size_t>(amplitudes_.size()) != basis_->dim())
    throw ValidationError(fmt::format("StateVector: {} amplitudes for basis of dim {}",
                                      amplitudes_.size(), basis_->dim()));
}

StateVector StateVector::basis_state(BasisPtr basis, std::size_t index) {
  if (index >= basis->dim())
    throw ValidationError(fmt::format("basis_state: index {} >= dim {}", index, basis->dim()));
  StateVector v(std::move(basis));
  v[index] = 1.0;
  return v;
}

StateVector& StateVector::operator+=(const StateVector& other) {
  require_same_basis(*basis_, *other.basis_);
  amplitudes_ += other.amplitudes_;
  return *this;
}

StateVector& StateVector::operator-=(const StateVector& other) {
  require_same_basis(*basis_, *other.basis_);
  amplitudes_ -= other.amplitudes_;
  return *this;
}

StateVector& StateVector::operator*=(cplx factor) {
  amplitudes_ *= factor;
  return *this;
}

StateVector operator+(StateVector a, const StateVector& b) { return a += b; }
StateVector operator-(StateVector a, const StateVector& b) { return a -= b; }
StateVector operator*(cplx factor, StateVector a) { return a *= factor; }

cplx inner(const StateVector& a, const StateVector& b) {
  require_same_basis(a.basis(), b.basis());
  return a.amplitudes().dot(b.amplitudes());  // Eigen's dot conjugates the left operand
}

double norm(const StateVector& a) { return a.amplitudes().norm(); }

StateVector normalize(StateVector a) {
  const double n = norm(a);
  if (!(n > 0.0) || !std::isfinite(n))
    throw ValidationError(fmt::format("normalize: cannot normalize a vector of norm {}", n));
  a.amplitudes() /= n;
  return a;
}

}  // namespace cqe
