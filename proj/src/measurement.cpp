#include "cqe/measurement.hpp"

#include <algorithm>
#include <cmath>

#include "cqe/errors.hpp"

namespace cqe {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t root, std::uint64_t index) {
  return splitmix64(splitmix64(root) ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

Backend::Backend(BackendMode mode, std::uint64_t shots, std::uint64_t seed)
    : mode_(mode), shots_(shots), seed_(seed), rng_(seed) {}

Backend Backend::exact() { return Backend(BackendMode::exact, 0, 0); }

Backend Backend::sampled(std::uint64_t shots, std::uint64_t seed) {
  if (shots < 1) throw ValidationError("Backend: sampled mode needs shots >= 1");
  return Backend(BackendMode::sampled, shots, seed);
}

Backend Backend::from_spec(const BackendSpec& spec) {
  return spec.mode == BackendMode::exact ? exact() : sampled(spec.shots, spec.seed);
}

double Backend::draw(double sigma) {
  ++evaluations_;
  return sigma * normal_(rng_);
}

double Backend::expect_hermitian(const StateVector& psi, const StateVector& o_psi) {
  const double mean = inner(psi, o_psi).real();
  if (mode_ == BackendMode::exact) return mean;
  const double var = std::max(0.0, o_psi.amplitudes().squaredNorm() - mean * mean);
  return mean + draw(std::sqrt(var / static_cast<double>(shots_)));
}

cplx Backend::expect(const StateVector& psi, const StateVector& o_psi) {
  const cplx mean = inner(psi, o_psi);
  if (mode_ == BackendMode::exact) return mean;
  const double var = std::max(0.0, o_psi.amplitudes().squaredNorm() - std::norm(mean));
  const double sigma = std::sqrt(0.5 * var / static_cast<double>(shots_));
  const double re = draw(sigma);
  const double im = draw(sigma);
  return mean + cplx{re, im};
}

cplx Backend::expect(const SparseOperator& o, const StateVector& psi) {
  const StateVector o_psi = o.apply(psi);
  if (o.symmetry() == Symmetry::hermitian) return expect_hermitian(psi, o_psi);
  return expect(psi, o_psi);
}

}  // namespace cqe
