#include <random>

#include "cqe/errors.hpp"
#include "cqe/hamiltonian.hpp"
#include "cqe/operator_algebra.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace cqe;

namespace {

double dist(const SparseOperator& op, const Eigen::MatrixXcd& m) { return (op.to_dense() - m).norm(); }

// Random normal-ordered string on F fermion modes and one boson mode.
GammaOp random_gamma(std::mt19937_64& rng, int f, int max_boson) {
  std::uniform_int_distribution<int> coin(0, 1);
  std::uniform_int_distribution<int> nb(0, max_boson);
  std::vector<int> fc, fa;
  for (int p = 0; p < f; ++p) {
    if (coin(rng)) fc.push_back(p);
    if (coin(rng)) fa.push_back(p);
  }
  std::shuffle(fc.begin(), fc.end(), rng);
  std::shuffle(fa.begin(), fa.end(), rng);
  return GammaOp(fc, fa, std::vector<int>(static_cast<std::size_t>(nb(rng)), 0),
                 std::vector<int>(static_cast<std::size_t>(nb(rng)), 0));
}

Eigen::MatrixXcd oracle_of(const GammaOp& g, const oracle::Space& s) {
  return oracle::gamma(s, g.fermion_create(), g.fermion_annihilate(), g.boson_create(), g.boson_annihilate());
}

HamiltonianSpec random_hamiltonian(std::mt19937_64& rng, BasisPtr basis, int n_terms) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<Term> terms;
  for (int k = 0; k < n_terms; ++k) {
    const GammaOp g = random_gamma(rng, basis->n_fermion_modes(), 2);
    const double c = n(rng);
    terms.push_back({c, g});
    terms.push_back({c, adjoint(g)});
  }
  return build_hamiltonian(std::move(basis), std::move(terms));
}

}  // namespace

TEST_CASE("ladder operator examples") {
  const auto b = FockBasis::create(2, 3);
  const auto n2 = StateVector::basis_state(b, b->index_of(0, 2));
  const StateVector out = apply_gamma(GammaOp({}, {}, {0}, {0}), n2);
  CHECK((out.amplitudes() - 2.0 * n2.amplitudes()).norm() == 0.0);

  // a+_1 a_0 |01> = -|10>: a_0 sees no lower occupied mode, a+_1 sees none after.
  const auto e01 = StateVector::basis_state(b, b->index_of(0b01, 0));
  const StateVector hop = apply_gamma(GammaOp({1}, {0}), e01);
  CHECK(hop[b->index_of(0b10, 0)] == cplx(1.0));
  // a_1 a+_0 style sign: a+_1 on |01> picks up (-1)^1.
  CHECK(apply_gamma(GammaOp({1}, {}), e01)[b->index_of(0b11, 0)] == cplx(-1.0));
  for (std::size_t p = 0; p < b->dim(); ++p) {
    const auto e = StateVector::basis_state(b, p);
    CHECK(norm(apply_gamma(GammaOp({1}, {}), apply_gamma(GammaOp({1}, {}), e))) == 0.0);
  }

  for (int n = 0; n <= 3; ++n) {
    const auto en = StateVector::basis_state(b, b->index_of(0, n));
    const cplx v = inner(en, apply_gamma(GammaOp({}, {}, {0, 0}, {0, 0}), en));
    CHECK(v.real() == doctest::Approx(n * (n - 1)));
  }
  // b+ at the ceiling gives zero.
  CHECK(norm(apply_gamma(GammaOp({}, {}, {0}, {}), StateVector::basis_state(b, b->index_of(0, 3)))) == 0.0);
}

TEST_CASE("index validation") {
  const auto b = FockBasis::create(2, 1);
  CHECK_THROWS_AS(apply_gamma(GammaOp({2}, {}), StateVector(b)), ValidationError);
  CHECK_THROWS_AS(apply_gamma(GammaOp({}, {}, {1}, {}), StateVector(b)), ValidationError);
  CHECK_THROWS_AS(GammaOp({0, 0}, {}), ValidationError);
}

TEST_CASE("to_matrix examples") {
  const auto b = FockBasis::create(1, 1);
  CHECK(dist(to_matrix(GammaOp(), b), Eigen::MatrixXcd::Identity(4, 4)) == 0.0);
  const Eigen::MatrixXcd bm = to_matrix(GammaOp({}, {}, {}, {0}), b).to_dense();
  // Boson factor alone is [[0,1],[0,0]]; the fermion mode is a spectator.
  CHECK(bm(0, 2) == cplx(1.0));
  CHECK(bm(1, 3) == cplx(1.0));
  CHECK(bm.cwiseAbs().sum() == doctest::Approx(2.0));
  const auto anti = to_matrix(GammaOp({}, {0}), b) * to_matrix(GammaOp({0}, {}), b) +
                    to_matrix(GammaOp({0}, {}), b) * to_matrix(GammaOp({}, {0}), b);
  CHECK(dist(anti, Eigen::MatrixXcd::Identity(4, 4)) == 0.0);
}

TEST_CASE("to_matrix matches the Kronecker oracle") {
  std::mt19937_64 rng(3);
  for (int f = 1; f <= 4; ++f) {
    const oracle::Space s{f, 3};
    const auto b = FockBasis::create(f, 3);
    for (int t = 0; t < 25; ++t) {
      const GammaOp g = random_gamma(rng, f, 2);
      CHECK_MESSAGE(dist(to_matrix(g, b), oracle_of(g, s)) <= 1e-12, g.str());
    }
  }
}

TEST_CASE("filtered basis projects onto the admitted block") {
  std::mt19937_64 rng(5);
  const int n = 2;
  const oracle::Space s{2 * n, 2};
  const auto idx = oracle::admitted(s, [](std::uint64_t o) { return oracle::one_per_pair(o, 2); });
  const auto b = FockBasis::create(2 * n, 2, one_fermion_per_pair(n));
  for (int t = 0; t < 25; ++t) {
    const GammaOp g = random_gamma(rng, 2 * n, 2);
    CHECK(dist(to_matrix(g, b), oracle::restrict(oracle_of(g, s), idx)) <= 1e-12);
  }
}

TEST_CASE("canonical anticommutation relations") {
  for (int f = 1; f <= 4; ++f) {
    const auto b = FockBasis::create(f, 1);
    const auto d = static_cast<Eigen::Index>(b->dim());
    for (int p = 0; p < f; ++p) {
      for (int q = 0; q < f; ++q) {
        const auto ap = to_matrix(GammaOp({}, {p}), b);
        const auto aq = to_matrix(GammaOp({}, {q}), b);
        const auto adq = to_matrix(GammaOp({q}, {}), b);
        const Eigen::MatrixXcd want = (p == q ? 1.0 : 0.0) * Eigen::MatrixXcd::Identity(d, d);
        CHECK(dist(anticommutator(ap, adq), want) <= 1e-12);
        CHECK(anticommutator(ap, aq).frobenius_norm() <= 1e-12);
      }
    }
  }
}

TEST_CASE("truncated boson commutator") {
  for (int n_max = 0; n_max <= 5; ++n_max) {
    const auto b = FockBasis::create(1, n_max);
    const auto d = static_cast<Eigen::Index>(b->dim());
    Eigen::MatrixXcd want = Eigen::MatrixXcd::Identity(d, d);
    for (Occupation o : {0u, 1u}) {
      const auto top = static_cast<Eigen::Index>(b->index_of(o, n_max));
      want(top, top) -= static_cast<double>(n_max + 1);
    }
    const auto c = commutator(to_matrix(GammaOp({}, {}, {}, {0}), b), to_matrix(GammaOp({}, {}, {0}, {}), b));
    CHECK(dist(c, want) <= 1e-12);  // sqrt(n) * sqrt(n) rounds
  }
}

TEST_CASE("adjoint coherence") {
  CHECK(adjoint(GammaOp({3}, {2}, {}, {0})) == GammaOp({2}, {3}, {0}, {}));
  CHECK(adjoint(GammaOp()) == GammaOp());
  std::mt19937_64 rng(9);
  for (int f = 1; f <= 4; ++f) {
    const auto b = FockBasis::create(f, 3);
    for (int t = 0; t < 25; ++t) {
      const GammaOp g = random_gamma(rng, f, 3);
      const Eigen::MatrixXcd m = to_matrix(g, b).to_dense();
      CHECK(dist(to_matrix(adjoint(g), b), m.adjoint()) <= 1e-12);
      CHECK(adjoint(adjoint(g)) == g);
    }
  }
}

TEST_CASE("commutator and anticommutator expectations") {
  std::mt19937_64 rng(17);
  const int f = 3, n_max = 2;
  const oracle::Space s{f, n_max};
  const auto b = FockBasis::create(f, n_max);
  const auto d = static_cast<Eigen::Index>(b->dim());
  for (int t = 0; t < 10; ++t) {
    const HamiltonianSpec h = random_hamiltonian(rng, b, 4);
    const Eigen::MatrixXcd hd = h.matrix().to_dense();
    const StateVector psi(b, oracle::random_state(d, rng));
    const double e = energy(h, psi);
    const Eigen::MatrixXcd shifted = hd - e * Eigen::MatrixXcd::Identity(d, d);
    for (int k = 0; k < 6; ++k) {
      const GammaOp g = random_gamma(rng, f, 2);
      const Eigen::MatrixXcd gd = oracle_of(g, s);
      const cplx a = commutator_expect(g, h.matrix(), psi);
      const cplx bb = anticommutator_expect(g, h.matrix(), e, psi);
      CHECK(std::abs(a - oracle::expect(psi.amplitudes(), gd * hd - hd * gd)) <= 1e-10);
      CHECK(std::abs(bb - oracle::expect(psi.amplitudes(), gd * shifted + shifted * gd)) <= 1e-10);
      CHECK(std::abs(a + std::conj(commutator_expect(adjoint(g), h.matrix(), psi))) <= 1e-10);
      CHECK(std::abs(bb - std::conj(anticommutator_expect(adjoint(g), h.matrix(), e, psi))) <= 1e-10);
    }
    CHECK(std::abs(commutator_expect(GammaOp(), h.matrix(), psi)) <= 1e-12);
    CHECK(std::abs(anticommutator_expect(GammaOp(), h.matrix(), e, psi)) <= 1e-10);
  }
}

TEST_CASE("expectations vanish on eigenstates") {
  std::mt19937_64 rng(23);
  const auto b = FockBasis::create(3, 2);
  const HamiltonianSpec h = random_hamiltonian(rng, b, 4);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h.matrix().to_dense());
  for (int k = 0; k < 3; ++k) {
    const StateVector psi(b, es.eigenvectors().col(k));
    for (int t = 0; t < 10; ++t) {
      const GammaOp g = random_gamma(rng, 3, 2);
      CHECK(std::abs(commutator_expect(g, h.matrix(), psi)) <= 1e-10);
      CHECK(std::abs(anticommutator_expect(g, h.matrix(), es.eigenvalues()(k), psi)) <= 1e-10);
    }
  }
}

TEST_CASE("exponential action") {
  std::mt19937_64 rng(29);
  const auto b = FockBasis::create(3, 2);
  const auto d = static_cast<Eigen::Index>(b->dim());
  const HamiltonianSpec h = random_hamiltonian(rng, b, 4);
  const SparseOperator x = (cplx(0.0, 1.0) * h.matrix()).with_symmetry(Symmetry::anti_hermitian);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int t = 0; t < 10; ++t) {
    const StateVector psi(b, oracle::random_state(d, rng));
    CHECK((apply_exp(x, 0.0, psi, 1e-12).amplitudes() - psi.amplitudes()).norm() <= 1e-15);
    const double eta = u(rng);
    const ExpResult r = apply_exp_detailed(x, eta, psi, 1e-12);
    CHECK(std::abs(r.raw_norm - 1.0) <= 1e-10);
    const StateVector back = apply_exp(x, -eta, r.state, 1e-12);
    CHECK((back.amplitudes() - psi.amplitudes()).norm() <= 1e-8);
    // Dense reference: exp(eta X) from the eigen-decomposition of H.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h.matrix().to_dense());
    const Eigen::VectorXcd phase = (cplx(0.0, eta) * es.eigenvalues().cast<cplx>()).array().exp();
    const Eigen::VectorXcd want = es.eigenvectors() * phase.asDiagonal() * es.eigenvectors().adjoint() * psi.amplitudes();
    CHECK((r.state.amplitudes() - want).norm() <= 1e-9);
    const ExpResult series = apply_exp_series(x, eta, psi, 1e-12);
    CHECK((series.state.amplitudes() - want).norm() <= 1e-9);
  }
}

TEST_CASE("number operator exponential") {
  const auto b = FockBasis::create(1, 1);
  StateVector psi(b);
  psi[b->index_of(0, 0)] = 1.0 / std::sqrt(2.0);
  psi[b->index_of(0, 1)] = 1.0 / std::sqrt(2.0);
  const SparseOperator n = to_matrix(GammaOp({}, {}, {0}, {0}), b).with_symmetry(Symmetry::hermitian);
  const StateVector out = apply_exp(n, 1.0, psi, 1e-12);
  const double z = std::sqrt(1.0 + std::exp(2.0));
  CHECK(std::abs(out[b->index_of(0, 0)] - cplx(1.0 / z)) <= 1e-12);
  CHECK(std::abs(out[b->index_of(0, 1)] - cplx(std::exp(1.0) / z)) <= 1e-12);
  const ExpResult r = apply_exp_detailed(n, 1.0, psi, 1e-12);
  CHECK(r.raw_norm == doctest::Approx(z / std::sqrt(2.0)).epsilon(1e-12));
  // A general (untagged) operator goes through the series.
  const SparseOperator g = to_matrix(GammaOp({}, {}, {0}, {0}), b);
  CHECK((apply_exp(g, 1.0, psi, 1e-12).amplitudes() - out.amplitudes()).norm() <= 1e-12);
}

TEST_CASE("series guards against runaway scaling") {
  const auto b = FockBasis::create(1, 2);
  const SparseOperator n = to_matrix(GammaOp({}, {}, {0}, {0}), b);
  StateVector psi(b);
  psi[0] = 1.0;
  CHECK_THROWS_AS(apply_exp_series(n, 1e300, psi, 1e-12), NumericalError);
}

TEST_CASE("sparse operator algebra") {
  const auto b = FockBasis::create(2, 2);
  const auto other = FockBasis::create(2, 3);
  const auto x = to_matrix(GammaOp({1}, {0}, {0}, {}), b);
  CHECK(dist(x.adjoint(), x.to_dense().adjoint()) == 0.0);
  CHECK((x + x.adjoint()).hermiticity_defect() <= 1e-14);
  CHECK((x - x.adjoint()).anti_hermiticity_defect() <= 1e-14);
  CHECK_THROWS_AS(x + to_matrix(GammaOp(), other), ValidationError);
  const StateVector e(b, Eigen::VectorXcd::Ones(static_cast<Eigen::Index>(b->dim())));
  CHECK((x.apply(e).amplitudes() - x.to_dense() * e.amplitudes()).norm() == 0.0);
  CHECK(x.norm1() == doctest::Approx(x.to_dense().cwiseAbs().colwise().sum().maxCoeff()));
}
