#pragma once

#include "ncw/coupling.hpp"

namespace ncw {

// ---- coordinate families ----

// True iff the family is closed under adjoints as a multiset.
inline bool is_star_closed(const std::vector<Matrix>& k, double tol = 1e-12) {
  std::vector<bool> used(k.size(), false);
  for (const auto& a : k) {
    bool matched = false;
    for (size_t j = 0; j < k.size(); ++j) {
      if (used[j]) continue;
      if ((a.adjoint() - k[j]).norm() <= tol * (1.0 + a.norm())) {
        used[j] = true;
        matched = true;
        break;
      }
    }
    if (!matched) return false;
  }
  return true;
}

// True iff words in the family and its adjoints (with unit) span the full
// matrix algebra. Tracks an orthonormal basis of the word span and extends it
// by right multiplication until it stabilizes.
inline bool generates_algebra(const std::vector<Matrix>& k, double tol = 1e-10) {
  if (k.empty()) return false;
  const Index n = k[0].rows();
  const Index full = n * n;

  std::vector<Matrix> gens;
  for (const auto& a : k) {
    gens.push_back(a);
    gens.push_back(a.adjoint());
  }

  std::vector<Vector> basis;  // orthonormal in the Hilbert-Schmidt inner product
  std::vector<Matrix> span_mats;
  auto try_extend = [&](const Matrix& m) {
    Vector v = vec(m);
    const double norm0 = v.norm();
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& b : basis) v -= b.dot(v) * b;
    if (v.norm() <= tol * (1.0 + norm0)) return false;
    v /= v.norm();
    basis.push_back(v);
    span_mats.push_back(unvec(v, n, n));
    return true;
  };

  try_extend(Matrix::Identity(n, n));
  for (const auto& g : gens) try_extend(g);

  bool grew = true;
  while (grew && static_cast<Index>(basis.size()) < full) {
    grew = false;
    const size_t count = span_mats.size();
    for (size_t i = 0; i < count; ++i)
      for (const auto& g : gens)
        if (try_extend(span_mats[i] * g)) grew = true;
  }
  return static_cast<Index>(basis.size()) == full;
}

// Finite family of coordinates k_l on a matrix algebra, with the two
// structural properties that the distance theory cares about precomputed.
struct CostSpec {
  std::vector<Matrix> k;
  bool star_closed = false;  // {k_l*} = {k_l} as a multiset
  bool generating = false;   // words in k_l, k_l* span the algebra

  Index dim() const { return k.empty() ? 0 : k[0].rows(); }
};

inline CostSpec make_cost_spec(std::vector<Matrix> k) {
  if (k.empty()) throw std::invalid_argument("make_cost_spec: empty coordinate family");
  const Index n = k[0].rows();
  for (size_t l = 0; l < k.size(); ++l) {
    require_square(k[l], "make_cost_spec");
    require_finite(k[l], "make_cost_spec");
    if (k[l].rows() != n)
      throw std::invalid_argument("make_cost_spec: coordinates have mixed dimensions");
  }
  if (n > kMaxDim) throw std::invalid_argument("make_cost_spec: dimension above supported limit");
  CostSpec spec;
  spec.k = std::move(k);
  spec.star_closed = is_star_closed(spec.k);
  spec.generating = generates_algebra(spec.k);
  return spec;
}

// True iff the coordinate family generates the full algebra of the given size.
inline bool generating_check(const CostSpec& spec, Index dim) {
  return spec.dim() == dim && generates_algebra(spec.k);
}

// ---- transport cost ----

// Cost of a plan in channel form:
//   I = sum_l mu(k* k) + nu(k* k) - nu(E(k)* k) - nu(k* E(k)).
// Requires a square plan whose algebra carries the coordinates.
inline double transport_cost(const TransportPlan& w, const CostSpec& spec) {
  const Index n = spec.dim();
  if (w.pair.map.dim_in != n || w.pair.map.dim_out != n)
    throw std::invalid_argument("transport_cost: coordinates live on a different algebra");
  const FaithfulState& mu = w.pair.source;
  const FaithfulState& nu = w.pair.target;
  double total = 0.0;
  for (const auto& a : spec.k) {
    Matrix ea = apply(w.pair.map, a);
    total += expectation(mu, Matrix(a.adjoint() * a)).real();
    total += expectation(nu, Matrix(a.adjoint() * a)).real();
    total -= 2.0 * expectation(nu, Matrix(a.adjoint() * ea)).real();
  }
  return total;
}

// Affine form of the same cost over hvec Choi coordinates:
//   I(C) = constant + <linear, hvec(C)>.
struct CostCoefficients {
  double constant = 0.0;
  RealVector linear;
};

inline CostCoefficients cost_coefficients(const CostSpec& spec, const FaithfulState& mu,
                                          const FaithfulState& nu) {
  const Index n = spec.dim();
  if (mu.dim != n || nu.dim != n)
    throw std::invalid_argument("cost_coefficients: coordinates live on a different algebra");
  CostCoefficients out;
  Matrix l = Matrix::Zero(n * n, n * n);
  for (const auto& a : spec.k) {
    out.constant += expectation(mu, Matrix(a.adjoint() * a)).real();
    out.constant += expectation(nu, Matrix(a.adjoint() * a)).real();
    // nu(k* E(k)) + nu(E(k)* k) = Tr[(A + A*) C] with A = k^T (x) (eta k*)
    Matrix grad = kron(a.transpose(), Matrix(nu.density * a.adjoint()));
    l -= grad + grad.adjoint();
  }
  out.linear = hvec(l);
  return out;
}

// Cost evaluated through the coupling density instead of the channel:
//   nu(k* E(k)) = Tr(kappa (k (x) conj(eta^{-1/2} k eta^{1/2}))).
// Independent of the channel-side formulas above.
inline double pairing_cost(const Matrix& kappa, const CostSpec& spec, const FaithfulState& mu,
                           const FaithfulState& nu) {
  const Index n = spec.dim();
  if (mu.dim != n || nu.dim != n || kappa.rows() != n * n)
    throw std::invalid_argument("pairing_cost: dimension mismatch");
  double total = 0.0;
  for (const auto& a : spec.k) {
    total += expectation(mu, Matrix(a.adjoint() * a)).real();
    total += expectation(nu, Matrix(a.adjoint() * a)).real();
    Matrix c = (nu.inv_sqrt_density * a * nu.sqrt_density).conjugate();
    total -= 2.0 * (kappa * kron(a, c)).trace().real();
  }
  return total;
}

// One coordinate's first and second moments under the two states. For
// infinite-dimensional examples these are supplied abstractly; for matrix
// algebras moment_rows computes them.
struct MomentRow {
  double mu_kk = 0.0;  // mu(k* k)
  double nu_kk = 0.0;  // nu(k* k)
  Complex mu_k{0.0, 0.0};
  Complex nu_k{0.0, 0.0};
};

// Cost of the product coupling E(a) = mu(a) 1, which only sees these moments:
//   I = sum_l mu(k* k) + nu(k* k) - 2 Re(nu(k) conj(mu(k))).
inline double product_cost_from_moments(const std::vector<MomentRow>& rows) {
  double total = 0.0;
  for (const auto& r : rows) {
    if (r.mu_kk < std::norm(r.mu_k) - 1e-9 || r.nu_kk < std::norm(r.nu_k) - 1e-9)
      throw std::invalid_argument(
          "product_cost_from_moments: second moment below squared first moment");
    total += r.mu_kk + r.nu_kk - 2.0 * (r.nu_k * std::conj(r.mu_k)).real();
  }
  return total;
}

inline std::vector<MomentRow> moment_rows(const CostSpec& spec, const FaithfulState& mu,
                                          const FaithfulState& nu) {
  const Index n = spec.dim();
  if (mu.dim != n || nu.dim != n)
    throw std::invalid_argument("moment_rows: coordinates live on a different algebra");
  std::vector<MomentRow> rows;
  for (const auto& a : spec.k) {
    MomentRow r;
    r.mu_kk = expectation(mu, Matrix(a.adjoint() * a)).real();
    r.nu_kk = expectation(nu, Matrix(a.adjoint() * a)).real();
    r.mu_k = expectation(mu, a);
    r.nu_k = expectation(nu, a);
    rows.push_back(r);
  }
  return rows;
}

inline double product_cost(const CostSpec& spec, const FaithfulState& mu,
                           const FaithfulState& nu) {
  return product_cost_from_moments(moment_rows(spec, mu, nu));
}

}  // namespace ncw
