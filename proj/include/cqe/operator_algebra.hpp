#pragma once

#include <compare>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "cqe/fock_space.hpp"

namespace cqe {

/// Normal-ordered product of ladder operators
///
///   a+(i_1) ... a+(i_q)  a(k_r) ... a(k_1)  b+(j_1) ... b+(j_s)  b(l_t) ... b(l_1)
///
/// Fermion indices are mode numbers and may not repeat within a list.
/// Boson lists hold mode numbers; a repeated mode is a power. An empty
/// GammaOp is the identity.
class GammaOp {
 public:
  GammaOp() = default;
  GammaOp(std::vector<int> fermion_create, std::vector<int> fermion_annihilate,
          std::vector<int> boson_create = {}, std::vector<int> boson_annihilate = {});

  const std::vector<int>& fermion_create() const { return fermion_create_; }
  const std::vector<int>& fermion_annihilate() const { return fermion_annihilate_; }
  const std::vector<int>& boson_create() const { return boson_create_; }
  const std::vector<int>& boson_annihilate() const { return boson_annihilate_; }

  bool is_identity() const;
  std::string str() const;

  friend bool operator==(const GammaOp&, const GammaOp&) = default;
  friend auto operator<=>(const GammaOp&, const GammaOp&) = default;

 private:
  std::vector<int> fermion_create_;
  std::vector<int> fermion_annihilate_;
  std::vector<int> boson_create_;
  std::vector<int> boson_annihilate_;
};

/// Conjugate transpose. Under the ordering above this swaps the creation and
/// annihilation lists of each species.
GammaOp adjoint(const GammaOp& op);

/// Throws ValidationError if any index of `op` falls outside `basis`.
void check_indices(const GammaOp& op, const FockBasis& basis);

struct Transition {
  std::size_t index;
  double amplitude;
};

/// Image of basis vector e_index under `op`, or nullopt when it vanishes.
/// Raising a boson past n_max, or landing on an occupation the basis filter
/// excludes, gives zero.
std::optional<Transition> act_on_basis_state(const GammaOp& op, const FockBasis& basis,
                                             std::size_t index);

StateVector apply_gamma(const GammaOp& op, const StateVector& psi);

enum class Symmetry { general, hermitian, anti_hermitian };

class SparseOperator {
 public:
  using Matrix = Eigen::SparseMatrix<cplx, Eigen::ColMajor>;

  SparseOperator(BasisPtr basis, Matrix matrix, Symmetry symmetry = Symmetry::general);

  static SparseOperator zero(BasisPtr basis);
  static SparseOperator identity(BasisPtr basis);

  const FockBasis& basis() const { return *basis_; }
  const BasisPtr& basis_ptr() const { return basis_; }
  const Matrix& matrix() const { return matrix_; }
  std::size_t dim() const { return basis_->dim(); }
  Symmetry symmetry() const { return symmetry_; }

  StateVector apply(const StateVector& psi) const;
  SparseOperator adjoint() const;
  SparseOperator with_symmetry(Symmetry symmetry) const;

  /// Frobenius norms of X - X^dagger and X + X^dagger.
  double hermiticity_defect() const;
  double anti_hermiticity_defect() const;
  double frobenius_norm() const;
  /// Maximum absolute column sum.
  double norm1() const;

  Eigen::MatrixXcd to_dense() const { return Eigen::MatrixXcd(matrix_); }

  SparseOperator& operator+=(const SparseOperator& other);
  SparseOperator& operator-=(const SparseOperator& other);
  SparseOperator& operator*=(cplx factor);

 private:
  BasisPtr basis_;
  Matrix matrix_;
  Symmetry symmetry_ = Symmetry::general;
};

SparseOperator operator+(SparseOperator a, const SparseOperator& b);
SparseOperator operator-(SparseOperator a, const SparseOperator& b);
SparseOperator operator*(cplx factor, SparseOperator a);
SparseOperator operator*(const SparseOperator& a, const SparseOperator& b);

/// XY - YX and XY + YX.
SparseOperator commutator(const SparseOperator& x, const SparseOperator& y);
SparseOperator anticommutator(const SparseOperator& x, const SparseOperator& y);

/// Column p is apply_gamma(op, e_p).
SparseOperator to_matrix(const GammaOp& op, BasisPtr basis);

/// (Gamma H - H Gamma)|psi>, computed from operator-on-vector products.
StateVector commutator_action(const SparseOperator& gamma, const SparseOperator& h,
                              const StateVector& psi);
/// (Gamma (H - E) + (H - E) Gamma)|psi>.
StateVector anticommutator_action(const SparseOperator& gamma, const SparseOperator& h,
                                  double e, const StateVector& psi);

/// <psi|[Gamma, H]|psi>
cplx commutator_expect(const GammaOp& gamma, const SparseOperator& h, const StateVector& psi);
/// <psi|{Gamma, H - E}|psi>
cplx anticommutator_expect(const GammaOp& gamma, const SparseOperator& h, double e,
                           const StateVector& psi);

struct ExpResult {
  StateVector state;  // normalized
  double raw_norm;    // |exp(eta X) psi| / |psi| before renormalization
  int substeps;
  int terms;          // series terms, or Krylov dimension
};

constexpr int kDefaultMaxExpTerms = 200;

/// exp(eta X)|psi> restricted to the Krylov space of a Hermitian or
/// anti-Hermitian X. The basis is built once by Lanczos with full
/// reorthogonalization, after which any eta costs O(m^2).
class KrylovExponential {
 public:
  KrylovExponential(const SparseOperator& x, const StateVector& psi, double tol,
                    int max_dim = kDefaultMaxExpTerms);

  int dim() const { return static_cast<int>(ritz_values_.size()); }
  /// Krylov space is X-invariant, so every eta is exact up to rounding.
  bool invariant() const { return invariant_; }

  /// Normalized coefficients of exp(eta X) psi in the Krylov basis.
  Eigen::VectorXcd coefficients(double eta) const;
  /// log(|exp(eta X) psi| / |psi|)
  double log_norm(double eta) const;
  /// Relative residual bound of the projection at eta (0 when invariant).
  double error_estimate(double eta) const;

  StateVector state(double eta) const;
  /// Spread of the Ritz values that carry weight in psi; exp(eta X) psi
  /// depends on eta only through eta times these differences.
  double spectral_spread() const;

  /// V^dagger O V for an operator on the same basis.
  Eigen::MatrixXcd project(const SparseOperator& o) const;

 private:
  BasisPtr basis_;
  bool anti_hermitian_ = false;
  bool invariant_ = false;
  double tail_beta_ = 0.0;
  Eigen::MatrixXcd krylov_;          // dim x m, orthonormal columns
  Eigen::VectorXd ritz_values_;      // eigenvalues of the Lanczos tridiagonal
  Eigen::MatrixXd ritz_vectors_;     // its eigenvectors
  Eigen::VectorXd start_weights_;    // ritz_vectors_^T e_1
};

/// exp(eta X)|psi>, renormalized. Hermitian and anti-Hermitian X go through
/// KrylovExponential; anything else, or a Krylov space that is not accurate
/// to `tol` at this eta, falls back to a scaled Taylor series. When X is
/// tagged anti-Hermitian the pre-normalization norm must stay within 10 tol
/// of |psi|.
ExpResult apply_exp_detailed(const SparseOperator& x, double eta, const StateVector& psi,
                             double tol, int max_terms = kDefaultMaxExpTerms);

StateVector apply_exp(const SparseOperator& x, double eta, const StateVector& psi, double tol,
                      int max_terms = kDefaultMaxExpTerms);

/// Scaled Taylor series on the vector, renormalized.
ExpResult apply_exp_series(const SparseOperator& x, double eta, const StateVector& psi, double tol,
                           int max_terms = kDefaultMaxExpTerms);

}  // namespace cqe
