#include <algorithm>
#include <random>
#include <sstream>

#include "cqe/cqe_solver.hpp"
#include "cqe/errors.hpp"
#include "cqe/exact_solver.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace cqe;

namespace {

CqeConfig tc_config(int n_sites, const HamiltonianSpec& h) {
  CqeConfig c;
  c.initial.n_sites = n_sites;
  c.sector_operator = excitation_number(h.basis_ptr(), n_sites);
  return c;
}

StateVector random_tc_state(const HamiltonianSpec& h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return StateVector(h.basis_ptr(), oracle::random_state(static_cast<Eigen::Index>(h.basis().dim()), rng));
}

}  // namespace

TEST_CASE("TC pool") {
  const HamiltonianSpec h = build_tavis_cummings({1, 2.0, 0.5, 0.4, 3});
  const CqePool pool = build_pool(h);
  const std::vector<GammaOp> want{GammaOp({1}, {1}), GammaOp({}, {}, {0}, {0}), GammaOp({1}, {0}, {}, {0}),
                                  GammaOp({0}, {1}, {0}, {})};
  CHECK(pool.size() == 4);
  CHECK(std::is_permutation(pool.ops.begin(), pool.ops.end(), want.begin(), want.end()));
  for (std::size_t k = 0; k < h.terms().size(); ++k) CHECK(pool.ops[k] == h.terms()[k].op);
  CHECK(pool.closed_under_adjoint);
  for (std::size_t k = 0; k < pool.size(); ++k) {
    CHECK_FALSE(pool.ops[k].is_identity());
    CHECK(std::find(pool.ops.begin(), pool.ops.end(), adjoint(pool.ops[k])) != pool.ops.end());
    CHECK((pool.matrices[k].to_dense() - to_matrix(pool.ops[k], h.basis_ptr()).to_dense()).norm() == 0.0);
  }
}

TEST_CASE("pool appends missing adjoints after the term list") {
  const auto b = FockBasis::create(2, 2);
  // a+0 a+1 a0 a1 is Hermitian as a matrix, but its adjoint is a different string.
  const HamiltonianSpec h = build_hamiltonian(
      b, {{1.0, GammaOp({1}, {0})}, {1.0, GammaOp({0}, {1})}, {0.3, GammaOp()}, {0.7, GammaOp({0, 1}, {1, 0})}});
  const CqePool pool = build_pool(h);
  REQUIRE(pool.size() == 4);
  CHECK(pool.ops[0] == GammaOp({1}, {0}));
  CHECK(pool.ops[2] == GammaOp({0, 1}, {1, 0}));
  CHECK(pool.ops[3] == GammaOp({1, 0}, {0, 1}));
  CHECK(pool.closed_under_adjoint);
}

TEST_CASE("residuals against dense oracles") {
  const HamiltonianSpec h = build_tavis_cummings({2, 2.0, 0.5, 0.8, 3});
  const CqePool pool = build_pool(h);
  const oracle::Space s{4, 3};
  const auto idx = oracle::admitted(s, [](std::uint64_t o) { return oracle::one_per_pair(o, 2); });
  const Eigen::MatrixXcd hd = h.matrix().to_dense();
  const auto d = hd.rows();
  Backend exact = Backend::exact();
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const StateVector psi = random_tc_state(h, seed);
    const double e = energy(h, psi);
    const auto a = residual_A(pool, h, psi, exact);
    const auto b = residual_B(pool, h, psi, e, exact);
    for (std::size_t k = 0; k < pool.size(); ++k) {
      const GammaOp& g = pool.ops[k];
      const Eigen::MatrixXcd gd = oracle::restrict(
          oracle::gamma(s, g.fermion_create(), g.fermion_annihilate(), g.boson_create(), g.boson_annihilate()), idx);
      const Eigen::MatrixXcd shifted = hd - e * Eigen::MatrixXcd::Identity(d, d);
      CHECK(std::abs(a[k] - oracle::expect(psi.amplitudes(), gd * hd - hd * gd)) <= 1e-10);
      CHECK(std::abs(b[k] - oracle::expect(psi.amplitudes(), gd * shifted + shifted * gd)) <= 1e-10);
      const auto j = static_cast<std::size_t>(
          std::find(pool.ops.begin(), pool.ops.end(), adjoint(g)) - pool.ops.begin());
      CHECK(std::abs(a[j] + std::conj(a[k])) <= 1e-10);
      CHECK(std::abs(b[j] - std::conj(b[k])) <= 1e-10);
    }
  }
}

TEST_CASE("residuals vanish on eigenstates") {
  const HamiltonianSpec h = build_tavis_cummings({3, 2.0, 0.5, 1.2, 4});
  const CqePool pool = build_pool(h);
  const Spectrum s = diagonalize(h, 4);
  Backend exact = Backend::exact();
  for (std::size_t k = 0; k < 4; ++k) {
    for (cplx x : residual_A(pool, h, s.states[k], exact)) CHECK(std::abs(x) <= 1e-10);
    for (cplx x : residual_B(pool, h, s.states[k], s.energies[k], exact)) CHECK(std::abs(x) <= 1e-10);
  }
}

TEST_CASE("assembly") {
  const HamiltonianSpec h = build_tavis_cummings({2, 2.0, 0.5, 0.8, 3});
  const CqePool pool = build_pool(h);
  const std::vector<cplx> zeros(pool.size(), 0.0);
  CHECK(assemble_antihermitian(pool, zeros).op.frobenius_norm() == 0.0);
  CHECK(assemble_hermitian(pool, zeros).op.frobenius_norm() == 0.0);

  Backend exact = Backend::exact();
  const StateVector psi = random_tc_state(h, 3);
  const auto a = residual_A(pool, h, psi, exact);
  const auto b = residual_B(pool, h, psi, energy(h, psi), exact);
  const AssembledOperator ao = assemble_antihermitian(pool, a);
  const AssembledOperator bo = assemble_hermitian(pool, b);
  CHECK_FALSE(ao.symmetrized);
  CHECK_FALSE(bo.symmetrized);
  CHECK(ao.defect <= 1e-12);
  CHECK(bo.defect <= 1e-12);
  CHECK(ao.op.anti_hermiticity_defect() <= 1e-12);
  CHECK(bo.op.hermiticity_defect() <= 1e-12);
  CHECK(ao.op.symmetry() == Symmetry::anti_hermitian);
  CHECK(bo.op.symmetry() == Symmetry::hermitian);

  Backend noisy = Backend::sampled(10, 4);
  const AssembledOperator an = assemble_antihermitian(pool, residual_A(pool, h, psi, noisy));
  const AssembledOperator bn = assemble_hermitian(pool, residual_B(pool, h, psi, energy(h, psi), noisy));
  CHECK(an.symmetrized);
  CHECK(bn.symmetrized);
  CHECK(an.op.anti_hermiticity_defect() <= 1e-15);
  CHECK(bn.op.hermiticity_defect() <= 1e-15);
}

TEST_CASE("line search") {
  const HamiltonianSpec h = build_tavis_cummings({1, 2.0, 0.5, 0.5, 3});
  const StateVector psi = tc_product_state(h.basis_ptr(), 1, 0.2, 0.5);
  const double e0 = energy(h, psi);
  const LineSearchResult z = line_search(h, SparseOperator::zero(h.basis_ptr()), psi, {});
  CHECK(z.eta == 0.0);
  CHECK(z.energy == doctest::Approx(e0).epsilon(1e-14));

  Backend exact = Backend::exact();
  const CqePool pool = build_pool(h);
  const auto a = assemble_antihermitian(pool, residual_A(pool, h, psi, exact)).op;
  const LineSearchResult r = line_search(h, a, psi, {});
  CHECK(r.energy < e0);
  CHECK(std::abs(energy(h, r.state) - r.energy) <= 1e-12);
  CHECK(std::abs(norm(r.state) - 1.0) <= 1e-12);
  CHECK(std::abs(norm(apply_exp(a, r.eta, psi, 1e-12) - r.state)) <= 1e-9);
  // Every other eta on a fine grid does no better than the returned one.
  for (int i = -40; i <= 40; ++i) {
    const double eta = 0.05 * i;
    CHECK(energy(h, apply_exp(a, eta, psi, 1e-12)) >= r.energy - 1e-9);
  }

  LineSearchSpec bad;
  bad.lo = 0.5;
  CHECK_THROWS_AS(line_search(h, a, psi, bad), ValidationError);
  LineSearchSpec inside;
  inside.max_expansions = 0;
  CHECK(std::abs(line_search(h, a, psi, inside).eta) <= 1.0);
}

TEST_CASE("initial states") {
  const HamiltonianSpec h = build_tavis_cummings({1, 2.0, 0.5, 0.0, 2});
  const StateVector psi = tc_product_state(h.basis_ptr(), 1, 0.2, 0.5);
  const auto& b = h.basis();
  // (cos t |-> + sin t |+>) x (1, k, k^2/sqrt 2), normalized.
  const double c = std::cos(0.2), s = std::sin(0.2);
  const double w[3] = {1.0, 0.5, 0.25 / std::sqrt(2.0)};
  const double z = std::sqrt(w[0] * w[0] + w[1] * w[1] + w[2] * w[2]);
  for (int n = 0; n <= 2; ++n) {
    CHECK(std::abs(psi[b.index_of(0b01, n)] - cplx(c * w[n] / z)) <= 1e-14);
    CHECK(std::abs(psi[b.index_of(0b10, n)] - cplx(s * w[n] / z)) <= 1e-14);
  }
  InitialStateSpec u;
  u.kind = InitialStateSpec::Kind::uniform;
  const StateVector uni = make_initial_state(h.basis_ptr(), u);
  CHECK(std::abs(uni[0] - cplx(1.0 / std::sqrt(static_cast<double>(b.dim())))) <= 1e-14);
  InitialStateSpec missing;
  missing.kind = InitialStateSpec::Kind::explicit_state;
  CHECK_THROWS_AS(make_initial_state(h.basis_ptr(), missing), ValidationError);
}

TEST_CASE("config validation") {
  const HamiltonianSpec h = build_tavis_cummings({1, 2.0, 0.5, 0.5, 3});
  CqeConfig c = tc_config(1, h);
  c.tol_variance = 0.0;
  CHECK_THROWS_AS(solve(h, c), ValidationError);
  c = tc_config(1, h);
  c.max_iters = 0;
  CHECK_THROWS_AS(solve(h, c), ValidationError);
  c = tc_config(1, h);
  c.eta_search.hi = -0.1;
  CHECK_THROWS_AS(solve(h, c), ValidationError);
}

TEST_CASE("one iteration lowers the energy") {
  const HamiltonianSpec h = build_tavis_cummings({1, 2.0, 0.5, 0.5, 4});
  CqeConfig c = tc_config(1, h);
  c.max_iters = 1;
  const CqeTrace t = solve(h, c);
  REQUIRE(t.iterations.size() == 2);
  CHECK(t.iterations[1].energy < t.iterations[0].energy);
}

TEST_CASE("exact eigenstate is a fixed point") {
  const HamiltonianSpec h = build_tavis_cummings({3, 2.0, 0.5, 0.9, 4});
  const Spectrum s = diagonalize(h, 1);
  CqeConfig c = tc_config(3, h);
  c.initial.kind = InitialStateSpec::Kind::explicit_state;
  c.initial.state = s.states[0];
  const CqeTrace t = solve(h, c);
  CHECK(t.verdict == Verdict::converged_variance);
  CHECK(t.steps() == 0);
  CHECK(std::abs(t.final_energy - s.energies[0]) <= 1e-12);
}

TEST_CASE("descent, sector mechanics and convergence") {
  for (double g : {0.0, 0.3, 0.7, 1.0}) {
    const HamiltonianSpec h = build_tavis_cummings({3, 2.0, 0.5, g, 4});
    const double e_exact = diagonalize(h, 1).energies[0];
    const CqeTrace t = solve(h, tc_config(3, h));
    CHECK(t.iterations.front().n == 0);
    for (std::size_t i = 1; i < t.iterations.size(); ++i) {
      CHECK(t.iterations[i].n == static_cast<int>(i));
      CHECK(t.iterations[i].energy <= t.iterations[i - 1].energy + 1e-12);
    }
    for (const CqeIteration& r : t.iterations) {
      if (!r.stepped) continue;
      REQUIRE(r.sector_weights.size() == r.sector_weights_unitary.size());
      for (std::size_t k = 0; k < r.sector_weights.size(); ++k)
        CHECK(std::abs(r.sector_weights[k] - r.sector_weights_unitary[k]) <= 1e-10);
    }
    CHECK(t.verdict != Verdict::max_iters);
    CHECK(std::abs(t.final_energy - e_exact) <= 1e-6);
    CHECK(t.noisy_evaluations == 0);
  }
}

TEST_CASE("Hermitian step moves weight between sectors") {
  // Past the first crossing the ground state sits in a sector the initial state barely occupies.
  const HamiltonianSpec h = build_tavis_cummings({3, 2.0, 0.5, 0.9, 4});
  const CqeTrace t = solve(h, tc_config(3, h));
  const SectorResolver r(excitation_number(h.basis_ptr(), 3));
  const int start = r.dominant(make_initial_state(h.basis_ptr(), tc_config(3, h).initial));
  CHECK(start == 0);
  CHECK(r.dominant(t.final_state) == 2);
}

TEST_CASE("single-site solves") {
  for (double g : {0.0, 0.5, 1.5}) {
    const HamiltonianSpec h = build_tavis_cummings({1, 2.0, 0.5, g, 4});
    const CqeTrace t = solve(h, tc_config(1, h));
    CHECK(std::abs(t.final_energy - diagonalize(h, 1).energies[0]) <= 1e-6);
    if (g == 0.0) CHECK(t.steps() <= 5);
  }
}

TEST_CASE("sampled solves are reproducible") {
  const HamiltonianSpec h = build_tavis_cummings({2, 2.0, 0.5, 0.8, 3});
  CqeConfig c = tc_config(2, h);
  c.max_iters = 15;
  c.backend = {BackendMode::sampled, 1000, 12345};
  const CqeTrace a = solve(h, c);
  const CqeTrace b = solve(h, c);
  std::ostringstream sa, sb;
  write_trace(sa, a);
  write_trace(sb, b);
  CHECK(sa.str() == sb.str());
  CHECK(a.noisy_evaluations > 0);
  c.backend.seed = 54321;
  std::ostringstream sc;
  write_trace(sc, solve(h, c));
  CHECK(sc.str() != sa.str());
}

TEST_CASE("trace document") {
  const HamiltonianSpec h = build_tavis_cummings({1, 2.0, 0.5, 0.5, 3});
  CqeConfig c = tc_config(1, h);
  c.max_iters = 3;
  const CqeTrace t = solve(h, c);
  std::ostringstream out;
  write_trace(out, t);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line.rfind("# verdict=", 0) == 0);
  std::getline(in, line);
  CHECK(line == "iter,energy,variance,stepped,norm_A,norm_B,eta_A,eta_B,symmetrized,sector_weights,"
                "sector_weights_unitary");
  int rows = 0;
  while (std::getline(in, line)) {
    CHECK(std::count(line.begin(), line.end(), ',') == 10);
    ++rows;
  }
  CHECK(rows == static_cast<int>(t.iterations.size()));
  std::istringstream first(out.str());
  std::getline(first, line);
  std::getline(first, line);
  std::getline(first, line);
  const std::string e = line.substr(line.find(',') + 1, line.find(',', line.find(',') + 1) - line.find(',') - 1);
  CHECK(std::stod(e) == t.iterations[0].energy);
}
