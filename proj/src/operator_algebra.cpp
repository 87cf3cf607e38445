#include "cqe/operator_algebra.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include <limits>

#include <Eigen/Eigenvalues>
#include <fmt/format.h>
#include <fmt/ranges.h>

#include "cqe/errors.hpp"

namespace cqe {

namespace {

bool has_repeats(std::vector<int> v) {
  std::sort(v.begin(), v.end());
  return std::adjacent_find(v.begin(), v.end()) != v.end();
}

// Sign from the occupied modes below `mode`.
double parity_sign(Occupation occ, int mode) {
  const Occupation below = occ & ((Occupation{1} << mode) - 1);
  return (std::popcount(below) & 1) ? -1.0 : 1.0;
}

}  // namespace

GammaOp::GammaOp(std::vector<int> fermion_create, std::vector<int> fermion_annihilate,
                 std::vector<int> boson_create, std::vector<int> boson_annihilate)
    : fermion_create_(std::move(fermion_create)),
      fermion_annihilate_(std::move(fermion_annihilate)),
      boson_create_(std::move(boson_create)),
      boson_annihilate_(std::move(boson_annihilate)) {
  for (const auto* list : {&fermion_create_, &fermion_annihilate_, &boson_create_, &boson_annihilate_})
    for (int i : *list)
      if (i < 0) throw ValidationError(fmt::format("GammaOp: negative mode index {}", i));
  if (has_repeats(fermion_create_))
    throw ValidationError(fmt::format("GammaOp: repeated fermionic creation index in {} (operator vanishes)",
                                      fermion_create_));
  if (has_repeats(fermion_annihilate_))
    throw ValidationError(fmt::format("GammaOp: repeated fermionic annihilation index in {} (operator vanishes)",
                                      fermion_annihilate_));
}

bool GammaOp::is_identity() const {
  return fermion_create_.empty() && fermion_annihilate_.empty() && boson_create_.empty() &&
         boson_annihilate_.empty();
}

std::string GammaOp::str() const {
  if (is_identity()) return "1";
  std::string out;
  auto append = [&out](const std::string& s) {
    if (!out.empty()) out += ' ';
    out += s;
  };
  for (int i : fermion_create_) append(fmt::format("a+({})", i));
  for (auto it = fermion_annihilate_.rbegin(); it != fermion_annihilate_.rend(); ++it)
    append(fmt::format("a({})", *it));
  for (int j : boson_create_) append(fmt::format("b+({})", j));
  for (auto it = boson_annihilate_.rbegin(); it != boson_annihilate_.rend(); ++it)
    append(fmt::format("b({})", *it));
  return out;
}

GammaOp adjoint(const GammaOp& op) {
  return GammaOp(op.fermion_annihilate(), op.fermion_create(), op.boson_annihilate(),
                 op.boson_create());
}

void check_indices(const GammaOp& op, const FockBasis& basis) {
  for (const auto* list : {&op.fermion_create(), &op.fermion_annihilate()})
    for (int i : *list)
      if (i >= basis.n_fermion_modes())
        throw ValidationError(fmt::format("{}: fermionic mode {} out of range [0, {})", op.str(), i,
                                          basis.n_fermion_modes()));
  for (const auto* list : {&op.boson_create(), &op.boson_annihilate()})
    for (int j : *list)
      if (j >= basis.n_boson_modes())
        throw ValidationError(fmt::format("{}: boson mode {} out of range [0, {})", op.str(), j,
                                          basis.n_boson_modes()));
}

std::optional<Transition> act_on_basis_state(const GammaOp& op, const FockBasis& basis,
                                             std::size_t index) {
  BasisState state = basis.occupation_of(index);

  // Bosons commute with fermions; within the boson string every b acts before every b+.
  // Integer factors are collected under a single square root so number operators are exact.
  double radicand = 1.0;
  for (int l : op.boson_annihilate()) {
    int& n = state.bosons[static_cast<std::size_t>(l)];
    if (n == 0) return std::nullopt;
    radicand *= n;
    --n;
  }
  for (int j : op.boson_create()) {
    int& n = state.bosons[static_cast<std::size_t>(j)];
    if (n == basis.n_boson_max()) return std::nullopt;
    ++n;
    radicand *= n;
  }

  // Right to left: a(k_1) first, a+(i_1) last.
  double sign = 1.0;
  Occupation occ = state.occupation;
  for (int k : op.fermion_annihilate()) {
    const Occupation bit = Occupation{1} << k;
    if (!(occ & bit)) return std::nullopt;
    sign *= parity_sign(occ, k);
    occ ^= bit;
  }
  const auto& create = op.fermion_create();
  for (auto it = create.rbegin(); it != create.rend(); ++it) {
    const Occupation bit = Occupation{1} << *it;
    if (occ & bit) return std::nullopt;
    sign *= parity_sign(occ, *it);
    occ |= bit;
  }

  const auto target = basis.find(occ, state.bosons);
  if (!target) return std::nullopt;
  return Transition{*target, sign * std::sqrt(radicand)};
}

StateVector apply_gamma(const GammaOp& op, const StateVector& psi) {
  const FockBasis& basis = psi.basis();
  check_indices(op, basis);
  StateVector out(psi.basis_ptr());
  for (std::size_t p = 0; p < psi.dim(); ++p) {
    const cplx c = psi[p];
    if (c == cplx{0.0, 0.0}) continue;
    if (const auto t = act_on_basis_state(op, basis, p)) out[t->index] += t->amplitude * c;
  }
  return out;
}

SparseOperator::SparseOperator(BasisPtr basis, Matrix matrix, Symmetry symmetry)
    : basis_(std::move(basis)), matrix_(std::move(matrix)), symmetry_(symmetry) {
  const auto d = static_cast<Eigen::Index>(basis_->dim());
  if (matrix_.rows() != d || matrix_.cols() != d)
    throw ValidationError(fmt::format("SparseOperator: {}x{} matrix for basis of dim {}",
                                      matrix_.rows(), matrix_.cols(), d));
  matrix_.makeCompressed();
}

SparseOperator SparseOperator::zero(BasisPtr basis) {
  const auto d = static_cast<Eigen::Index>(basis->dim());
  return SparseOperator(std::move(basis), Matrix(d, d), Symmetry::hermitian);
}

SparseOperator SparseOperator::identity(BasisPtr basis) {
  const auto d = static_cast<Eigen::Index>(basis->dim());
  Matrix m(d, d);
  m.setIdentity();
  return SparseOperator(std::move(basis), std::move(m), Symmetry::hermitian);
}

StateVector SparseOperator::apply(const StateVector& psi) const {
  require_same_basis(*basis_, psi.basis());
  return StateVector(basis_, matrix_ * psi.amplitudes());
}

SparseOperator SparseOperator::adjoint() const {
  return SparseOperator(basis_, Matrix(matrix_.adjoint()), symmetry_);
}

SparseOperator SparseOperator::with_symmetry(Symmetry symmetry) const {
  return SparseOperator(basis_, matrix_, symmetry);
}

double SparseOperator::hermiticity_defect() const {
  return Matrix(matrix_ - Matrix(matrix_.adjoint())).norm();
}

double SparseOperator::anti_hermiticity_defect() const {
  return Matrix(matrix_ + Matrix(matrix_.adjoint())).norm();
}

double SparseOperator::frobenius_norm() const { return matrix_.norm(); }

double SparseOperator::norm1() const {
  double best = 0.0;
  for (Eigen::Index col = 0; col < matrix_.outerSize(); ++col) {
    double sum = 0.0;
    for (Matrix::InnerIterator it(matrix_, col); it; ++it) sum += std::abs(it.value());
    best = std::max(best, sum);
  }
  return best;
}

SparseOperator& SparseOperator::operator+=(const SparseOperator& other) {
  require_same_basis(*basis_, *other.basis_);
  matrix_ += other.matrix_;
  if (symmetry_ != other.symmetry_) symmetry_ = Symmetry::general;
  return *this;
}

SparseOperator& SparseOperator::operator-=(const SparseOperator& other) {
  require_same_basis(*basis_, *other.basis_);
  matrix_ -= other.matrix_;
  if (symmetry_ != other.symmetry_) symmetry_ = Symmetry::general;
  return *this;
}

SparseOperator& SparseOperator::operator*=(cplx factor) {
  matrix_ *= factor;
  if (factor.imag() != 0.0) {
    if (factor.real() != 0.0) {
      symmetry_ = Symmetry::general;
    } else if (symmetry_ == Symmetry::hermitian) {
      symmetry_ = Symmetry::anti_hermitian;
    } else if (symmetry_ == Symmetry::anti_hermitian) {
      symmetry_ = Symmetry::hermitian;
    }
  }
  return *this;
}

SparseOperator operator+(SparseOperator a, const SparseOperator& b) { return a += b; }
SparseOperator operator-(SparseOperator a, const SparseOperator& b) { return a -= b; }
SparseOperator operator*(cplx factor, SparseOperator a) { return a *= factor; }

SparseOperator operator*(const SparseOperator& a, const SparseOperator& b) {
  require_same_basis(a.basis(), b.basis());
  return SparseOperator(a.basis_ptr(), SparseOperator::Matrix(a.matrix() * b.matrix()));
}

SparseOperator commutator(const SparseOperator& x, const SparseOperator& y) {
  return x * y - y * x;
}

SparseOperator anticommutator(const SparseOperator& x, const SparseOperator& y) {
  return x * y + y * x;
}

SparseOperator to_matrix(const GammaOp& op, BasisPtr basis) {
  check_indices(op, *basis);
  std::vector<Eigen::Triplet<cplx>> triplets;
  triplets.reserve(basis->dim());
  for (std::size_t p = 0; p < basis->dim(); ++p) {
    if (const auto t = act_on_basis_state(op, *basis, p))
      triplets.emplace_back(static_cast<Eigen::Index>(t->index), static_cast<Eigen::Index>(p),
                            cplx{t->amplitude, 0.0});
  }
  const auto d = static_cast<Eigen::Index>(basis->dim());
  SparseOperator::Matrix m(d, d);
  m.setFromTriplets(triplets.begin(), triplets.end());
  const Symmetry sym = (op == adjoint(op)) ? Symmetry::hermitian : Symmetry::general;
  return SparseOperator(std::move(basis), std::move(m), sym);
}

StateVector commutator_action(const SparseOperator& gamma, const SparseOperator& h,
                              const StateVector& psi) {
  return gamma.apply(h.apply(psi)) - h.apply(gamma.apply(psi));
}

StateVector anticommutator_action(const SparseOperator& gamma, const SparseOperator& h, double e,
                                  const StateVector& psi) {
  const StateVector h_psi = h.apply(psi) - cplx{e, 0.0} * psi;
  const StateVector g_psi = gamma.apply(psi);
  return gamma.apply(h_psi) + h.apply(g_psi) - cplx{e, 0.0} * g_psi;
}

cplx commutator_expect(const GammaOp& gamma, const SparseOperator& h, const StateVector& psi) {
  require_same_basis(h.basis(), psi.basis());
  const StateVector h_psi = h.apply(psi);
  const StateVector g_psi = apply_gamma(gamma, psi);
  return inner(psi, apply_gamma(gamma, h_psi)) - inner(psi, h.apply(g_psi));
}

cplx anticommutator_expect(const GammaOp& gamma, const SparseOperator& h, double e,
                           const StateVector& psi) {
  require_same_basis(h.basis(), psi.basis());
  const StateVector shifted = h.apply(psi) - cplx{e, 0.0} * psi;
  const StateVector g_psi = apply_gamma(gamma, psi);
  const StateVector shifted_g = h.apply(g_psi) - cplx{e, 0.0} * g_psi;
  return inner(psi, apply_gamma(gamma, shifted)) + inner(psi, shifted_g);
}

constexpr double kMaxSubsteps = 1e6;

ExpResult apply_exp_series(const SparseOperator& x, double eta, const StateVector& psi,
                           double tol, int max_terms) {
  if (!(tol > 0.0)) throw ValidationError("apply_exp: tolerance must be positive");
  require_same_basis(x.basis(), psi.basis());
  Eigen::VectorXcd v = normalize(psi).amplitudes();
  if (eta == 0.0) return ExpResult{StateVector(psi.basis_ptr(), std::move(v)), 1.0, 0, 0};

  const double scaled = std::abs(eta) * x.norm1();
  if (!std::isfinite(scaled) || scaled > kMaxSubsteps)
    throw NumericalError(fmt::format("apply_exp: |eta| * |X|_1 = {:.3e} needs too many substeps", scaled));
  const int substeps = std::max(1, static_cast<int>(std::ceil(scaled)));
  const double h = eta / substeps;
  const double sub_tol = std::max(tol / substeps, 1e-15);

  double log_norm = 0.0;
  int total_terms = 0;
  for (int s = 0; s < substeps; ++s) {
    Eigen::VectorXcd sum = v;
    Eigen::VectorXcd term = v;
    int k = 1;
    for (;; ++k) {
      term = (x.matrix() * term) * (h / k);
      sum += term;
      const double inc = term.norm();
      if (inc <= sub_tol * sum.norm()) break;
      if (!std::isfinite(inc))
        throw NumericalError(fmt::format("apply_exp: series diverged at term {}", k));
      if (k >= max_terms)
        throw NumericalError(fmt::format(
            "apply_exp: no convergence within {} terms (last increment norm {:.3e})", max_terms, inc));
    }
    total_terms += k;
    const double n = sum.norm();
    if (!(n > 0.0) || !std::isfinite(n))
      throw NumericalError(fmt::format("apply_exp: non-finite or zero norm {} after substep", n));
    log_norm += std::log(n);
    v = sum / n;
  }

  const double raw_norm = std::exp(log_norm);
  if (x.symmetry() == Symmetry::anti_hermitian && std::abs(raw_norm - 1.0) > 10.0 * tol)
    throw NumericalError(fmt::format(
        "apply_exp: anti-Hermitian generator changed the norm by {:.3e}", raw_norm - 1.0));
  return ExpResult{StateVector(psi.basis_ptr(), std::move(v)), raw_norm, substeps, total_terms};
}

KrylovExponential::KrylovExponential(const SparseOperator& x, const StateVector& psi, double tol,
                                     int max_dim)
    : basis_(psi.basis_ptr()) {
  require_same_basis(x.basis(), psi.basis());
  if (x.symmetry() == Symmetry::general)
    throw ValidationError("KrylovExponential: generator must be tagged Hermitian or anti-Hermitian");
  if (max_dim < 1) throw ValidationError("KrylovExponential: max_dim must be >= 1");
  anti_hermitian_ = x.symmetry() == Symmetry::anti_hermitian;

  // Lanczos on the Hermitian Y with X = Y or X = iY.
  const cplx scale = anti_hermitian_ ? cplx{0.0, -1.0} : cplx{1.0, 0.0};
  const auto n = static_cast<Eigen::Index>(psi.dim());
  const Eigen::Index m_max = std::min<Eigen::Index>(max_dim, n);
  const double breakdown = std::max(tol, 1e-14) * std::max(1.0, x.norm1());

  krylov_.resize(n, m_max);
  krylov_.col(0) = normalize(psi).amplitudes();
  std::vector<double> alpha;
  std::vector<double> beta;
  Eigen::Index m = 0;
  for (;;) {
    Eigen::VectorXcd w = (x.matrix() * krylov_.col(m)) * scale;
    alpha.push_back(krylov_.col(m).dot(w).real());
    for (int pass = 0; pass < 2; ++pass) {
      const auto v = krylov_.leftCols(m + 1);
      w -= v * (v.adjoint() * w);
    }
    ++m;
    const double b = w.norm();
    if (b <= breakdown) {
      invariant_ = true;
      break;
    }
    if (m == m_max) {
      tail_beta_ = b;
      break;
    }
    beta.push_back(b);
    krylov_.col(m) = w / b;
  }
  krylov_.conservativeResize(Eigen::NoChange, m);

  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    t(i, i) = alpha[static_cast<std::size_t>(i)];
    if (i + 1 < m) t(i, i + 1) = t(i + 1, i) = beta[static_cast<std::size_t>(i)];
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(t);
  if (eig.info() != Eigen::Success) throw NumericalError("KrylovExponential: tridiagonal eigensolver failed");
  ritz_values_ = eig.eigenvalues();
  ritz_vectors_ = eig.eigenvectors();
  start_weights_ = ritz_vectors_.row(0).transpose();
}

namespace {

// exp(eta X) e_1 in the Ritz basis, scaled so the largest modulus is 1.
Eigen::VectorXcd ritz_factors(const Eigen::VectorXd& ritz, const Eigen::VectorXd& w0, double eta,
                              bool anti, double* log_shift) {
  const auto m = ritz.size();
  Eigen::VectorXcd f(m);
  if (anti) {
    for (Eigen::Index j = 0; j < m; ++j) f[j] = std::polar(1.0, eta * ritz[j]) * w0[j];
    *log_shift = 0.0;
  } else {
    double shift = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < m; ++j)
      if (w0[j] != 0.0) shift = std::max(shift, eta * ritz[j]);
    if (!std::isfinite(shift)) shift = 0.0;
    for (Eigen::Index j = 0; j < m; ++j) f[j] = std::exp(eta * ritz[j] - shift) * w0[j];
    *log_shift = shift;
  }
  return f;
}

}  // namespace

Eigen::VectorXcd KrylovExponential::coefficients(double eta) const {
  double shift = 0.0;
  const Eigen::VectorXcd f = ritz_factors(ritz_values_, start_weights_, eta, anti_hermitian_, &shift);
  Eigen::VectorXcd c = ritz_vectors_.cast<cplx>() * f;
  return c / c.norm();
}

double KrylovExponential::log_norm(double eta) const {
  double shift = 0.0;
  const Eigen::VectorXcd f = ritz_factors(ritz_values_, start_weights_, eta, anti_hermitian_, &shift);
  return shift + std::log(f.norm());
}

double KrylovExponential::error_estimate(double eta) const {
  if (invariant_) return 0.0;
  const Eigen::VectorXcd c = coefficients(eta);
  return tail_beta_ * std::abs(eta) * std::abs(c[c.size() - 1]);
}

double KrylovExponential::spectral_spread() const {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  const double floor = 1e-14;
  for (Eigen::Index j = 0; j < ritz_values_.size(); ++j) {
    if (std::abs(start_weights_[j]) <= floor) continue;
    lo = std::min(lo, ritz_values_[j]);
    hi = std::max(hi, ritz_values_[j]);
  }
  return hi > lo ? hi - lo : 0.0;
}

StateVector KrylovExponential::state(double eta) const {
  return StateVector(basis_, krylov_ * coefficients(eta));
}

Eigen::MatrixXcd KrylovExponential::project(const SparseOperator& o) const {
  require_same_basis(*basis_, o.basis());
  const Eigen::MatrixXcd ov = o.matrix() * krylov_;
  return krylov_.adjoint() * ov;
}

ExpResult apply_exp_detailed(const SparseOperator& x, double eta, const StateVector& psi,
                             double tol, int max_terms) {
  if (!(tol > 0.0)) throw ValidationError("apply_exp: tolerance must be positive");
  require_same_basis(x.basis(), psi.basis());
  if (eta == 0.0) return ExpResult{normalize(psi), 1.0, 0, 0};
  if (x.symmetry() != Symmetry::general) {
    const KrylovExponential krylov(x, psi, tol, max_terms);
    if (krylov.error_estimate(eta) <= tol) {
      const double raw_norm = std::exp(krylov.log_norm(eta));
      if (x.symmetry() == Symmetry::anti_hermitian && std::abs(raw_norm - 1.0) > 10.0 * tol)
        throw NumericalError(fmt::format(
            "apply_exp: anti-Hermitian generator changed the norm by {:.3e}", raw_norm - 1.0));
      return ExpResult{krylov.state(eta), raw_norm, 1, krylov.dim()};
    }
  }
  return apply_exp_series(x, eta, psi, tol, max_terms);
}

StateVector apply_exp(const SparseOperator& x, double eta, const StateVector& psi, double tol,
                      int max_terms) {
  return apply_exp_detailed(x, eta, psi, tol, max_terms).state;
}

}  // namespace cqe
