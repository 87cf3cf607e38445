#include "cqe/hamiltonian.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include <fmt/format.h>

#include "cqe/errors.hpp"

namespace cqe {

namespace {

constexpr double kHermiticityTol = 1e-12;

std::uint64_t hash_terms(const FockBasis& basis, const std::vector<Term>& terms) {
  std::uint64_t h = 1469598103934665603ULL ^ basis.fingerprint();
  auto mix = [&h](std::uint64_t v) {
    h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  };
  for (const auto& t : terms) {
    mix(std::bit_cast<std::uint64_t>(t.coefficient.real()));
    mix(std::bit_cast<std::uint64_t>(t.coefficient.imag()));
    for (const auto* list : {&t.op.fermion_create(), &t.op.fermion_annihilate(),
                             &t.op.boson_create(), &t.op.boson_annihilate()}) {
      mix(list->size());
      for (int i : *list) mix(static_cast<std::uint64_t>(i));
    }
  }
  return h;
}

std::vector<int> parse_indices(const std::string& field, const std::string& key, int line_no) {
  std::istringstream in(field);
  std::string label;
  in >> label;
  if (label != key + ":")
    throw ValidationError(fmt::format("line {}: expected '{}:' but found '{}'", line_no, key, label));
  std::vector<int> out;
  std::string tok;
  while (in >> tok) {
    try {
      std::size_t used = 0;
      const int v = std::stoi(tok, &used);
      if (used != tok.size()) throw std::invalid_argument(tok);
      out.push_back(v);
    } catch (const std::exception&) {
      throw ValidationError(fmt::format("line {}: bad index '{}' in {}", line_no, tok, key));
    }
  }
  return out;
}

}  // namespace

HamiltonianSpec::HamiltonianSpec(BasisPtr basis, std::vector<Term> terms, SparseOperator matrix,
                                 std::uint64_t hash)
    : basis_(std::move(basis)), terms_(std::move(terms)), matrix_(std::move(matrix)), hash_(hash) {}

HamiltonianSpec build_hamiltonian(BasisPtr basis, std::vector<Term> terms) {
  std::vector<Term> merged;
  merged.reserve(terms.size());
  for (auto& t : terms) {
    check_indices(t.op, *basis);
    auto it = std::find_if(merged.begin(), merged.end(), [&](const Term& m) { return m.op == t.op; });
    if (it == merged.end()) {
      merged.push_back(std::move(t));
    } else {
      it->coefficient += t.coefficient;
    }
  }

  SparseOperator matrix = SparseOperator::zero(basis);
  for (const auto& t : merged) matrix += t.coefficient * to_matrix(t.op, basis);

  const double defect = matrix.hermiticity_defect();
  if (defect > kHermiticityTol * std::max(1.0, matrix.frobenius_norm()))
    throw ValidationError(fmt::format(
        "build_hamiltonian: term list is not Hermitian (|H - H^dagger| = {:.3e})", defect));

  const std::uint64_t hash = hash_terms(*basis, merged);
  return HamiltonianSpec(basis, std::move(merged), matrix.with_symmetry(Symmetry::hermitian), hash);
}

void TcParams::validate() const {
  if (n_sites < 1) throw ValidationError(fmt::format("TcParams: n_sites must be >= 1, got {}", n_sites));
  if (n_max < 1)
    throw ValidationError(fmt::format(
        "TcParams: n_max must be >= 1 (the coupling terms need a boson space), got {}", n_max));
  for (double v : {omega_b, omega_f, g_c})
    if (!std::isfinite(v)) throw ValidationError("TcParams: frequencies and coupling must be finite");
}

BasisPtr tavis_cummings_basis(const TcParams& p) {
  p.validate();
  return FockBasis::create(2 * p.n_sites, p.n_max, one_fermion_per_pair(p.n_sites));
}

HamiltonianSpec build_tavis_cummings(const TcParams& p) {
  BasisPtr basis = tavis_cummings_basis(p);
  std::vector<Term> terms;
  terms.push_back({p.omega_b, GammaOp({}, {}, {0}, {0})});
  for (int i = 0; i < p.n_sites; ++i) {
    const int lo = tc_lower_mode(i);
    const int up = tc_upper_mode(i);
    terms.push_back({p.omega_f, GammaOp({up}, {up})});
    terms.push_back({p.g_c, GammaOp({up}, {lo}, {}, {0})});
    terms.push_back({p.g_c, GammaOp({lo}, {up}, {0}, {})});
  }
  return build_hamiltonian(std::move(basis), std::move(terms));
}

SparseOperator excitation_number(BasisPtr basis, int n_sites) {
  if (n_sites < 1 || tc_upper_mode(n_sites - 1) >= basis->n_fermion_modes())
    throw ValidationError(fmt::format("excitation_number: {} sites do not fit {} fermionic modes",
                                      n_sites, basis->n_fermion_modes()));
  SparseOperator m = to_matrix(GammaOp({}, {}, {0}, {0}), basis);
  for (int i = 0; i < n_sites; ++i) {
    const int up = tc_upper_mode(i);
    m += to_matrix(GammaOp({up}, {up}), basis);
  }
  return m.with_symmetry(Symmetry::hermitian);
}

double energy(const HamiltonianSpec& h, const StateVector& psi) {
  return inner(psi, h.matrix().apply(psi)).real();
}

double variance(const HamiltonianSpec& h, const StateVector& psi) {
  const StateVector h_psi = h.matrix().apply(psi);
  const double e = inner(psi, h_psi).real();
  const double v = h_psi.amplitudes().squaredNorm() - e * e;
  return std::max(0.0, v);
}

double contracted_variance(const HamiltonianSpec& h, const StateVector& psi) {
  const StateVector h_psi = h.matrix().apply(psi);
  cplx sum{0.0, 0.0};
  cplx e{0.0, 0.0};
  for (const auto& t : h.terms()) {
    sum += t.coefficient * inner(psi, apply_gamma(t.op, h_psi));
    e += t.coefficient * inner(psi, apply_gamma(t.op, psi));
  }
  return sum.real() - e.real() * e.real();
}

SectorResolver::SectorResolver(const SparseOperator& diagonal) {
  const auto& m = diagonal.matrix();
  labels_.assign(diagonal.dim(), 0);
  for (Eigen::Index col = 0; col < m.outerSize(); ++col) {
    for (SparseOperator::Matrix::InnerIterator it(m, col); it; ++it) {
      if (it.value() == cplx{0.0, 0.0}) continue;
      if (it.row() != col)
        throw ValidationError("SectorResolver: sector operator must be diagonal in the basis");
      const double v = it.value().real();
      if (std::abs(v - std::round(v)) > 1e-12 || std::abs(it.value().imag()) > 1e-12)
        throw ValidationError(fmt::format("SectorResolver: non-integer diagonal entry {}", v));
      labels_[static_cast<std::size_t>(col)] = static_cast<int>(std::lround(v));
    }
  }
  sectors_ = labels_;
  std::sort(sectors_.begin(), sectors_.end());
  sectors_.erase(std::unique(sectors_.begin(), sectors_.end()), sectors_.end());
}

std::vector<double> SectorResolver::weights(const StateVector& psi) const {
  if (psi.dim() != labels_.size())
    throw ValidationError("SectorResolver: state dimension does not match the sector operator");
  std::vector<double> w(sectors_.size(), 0.0);
  for (std::size_t p = 0; p < labels_.size(); ++p) {
    const auto pos = std::lower_bound(sectors_.begin(), sectors_.end(), labels_[p]) - sectors_.begin();
    w[static_cast<std::size_t>(pos)] += std::norm(psi[p]);
  }
  return w;
}

int SectorResolver::dominant(const StateVector& psi) const {
  const auto w = weights(psi);
  const auto best = std::max_element(w.begin(), w.end()) - w.begin();
  return sectors_[static_cast<std::size_t>(best)];
}

void write_terms(std::ostream& out, const std::vector<Term>& terms) {
  auto join = [](const std::vector<int>& v) {
    std::string s;
    for (int i : v) s += fmt::format(" {}", i);
    return s;
  };
  for (const auto& t : terms) {
    out << fmt::format("{:.17g} {:.17g} | create_f:{} | annih_f:{} | create_b:{} | annih_b:{}\n",
                       t.coefficient.real(), t.coefficient.imag(), join(t.op.fermion_create()),
                       join(t.op.fermion_annihilate()), join(t.op.boson_create()),
                       join(t.op.boson_annihilate()));
  }
}

std::vector<Term> read_terms(std::istream& in) {
  std::vector<Term> terms;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;

    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, '|')) fields.push_back(field);
    if (fields.size() != 5)
      throw ValidationError(fmt::format("line {}: expected 5 '|'-separated fields, found {}", line_no,
                                        fields.size()));

    std::istringstream coeff(fields[0]);
    double re = 0.0;
    double im = 0.0;
    std::string extra;
    if (!(coeff >> re >> im) || (coeff >> extra))
      throw ValidationError(fmt::format("line {}: expected 'coeff_re coeff_im'", line_no));

    terms.push_back({cplx{re, im},
                     GammaOp(parse_indices(fields[1], "create_f", line_no),
                             parse_indices(fields[2], "annih_f", line_no),
                             parse_indices(fields[3], "create_b", line_no),
                             parse_indices(fields[4], "annih_b", line_no))});
  }
  return terms;
}

}  // namespace cqe
