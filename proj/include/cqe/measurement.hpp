#pragma once

#include <cstdint>
#include <random>

#include "cqe/fock_space.hpp"
#include "cqe/operator_algebra.hpp"

namespace cqe {

enum class BackendMode { exact, sampled };

struct BackendSpec {
  BackendMode mode = BackendMode::exact;
  std::uint64_t shots = 1000;
  std::uint64_t seed = 0;
};

/// Expectation values, either exact or with emulated shot noise.
///
/// Sampled estimates add Gaussian noise of variance Var_psi(O)/shots where
/// Var_psi(O) = <O^dagger O> - |<O>|^2 is evaluated exactly. Complex estimates
/// split that variance evenly between the real and imaginary parts. Every
/// call draws from the generator, so a given seed and call sequence always
/// reproduce the same estimates.
class Backend {
 public:
  static Backend exact();
  static Backend sampled(std::uint64_t shots, std::uint64_t seed);
  static Backend from_spec(const BackendSpec& spec);

  BackendMode mode() const { return mode_; }
  std::uint64_t shots() const { return shots_; }
  std::uint64_t seed() const { return seed_; }
  /// Number of noisy estimates drawn so far.
  std::uint64_t evaluations() const { return evaluations_; }

  /// Estimate of <psi|O|psi> for Hermitian O, given o_psi = O|psi>.
  double expect_hermitian(const StateVector& psi, const StateVector& o_psi);
  /// Estimate of <psi|O|psi> for general O, given o_psi = O|psi>.
  cplx expect(const StateVector& psi, const StateVector& o_psi);
  /// Operator overload; real-valued estimate when O is tagged Hermitian.
  cplx expect(const SparseOperator& o, const StateVector& psi);

 private:
  Backend(BackendMode mode, std::uint64_t shots, std::uint64_t seed);
  double draw(double sigma);

  BackendMode mode_;
  std::uint64_t shots_;
  std::uint64_t seed_;
  std::uint64_t evaluations_ = 0;
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

/// Independent 64-bit stream seed for task `index` under `root`.
std::uint64_t derive_seed(std::uint64_t root, std::uint64_t index);

}  // namespace cqe
