#pragma once

#include "ncw/qstate.hpp"

#include <type_traits>
#include <utility>

namespace ncw {

// Negative-eigenvalue slack accepted on verified Choi matrices.
constexpr double kPsdTol = 1e-9;
// Unitality tolerance on verified maps.
constexpr double kUnitalTol = 1e-9;
// Tolerance for state intertwining (target compose map == source).
constexpr double kIntertwineTol = 1e-9;

struct InvalidChannel : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Unital completely positive map in Choi form,
//   choi = sum_ij e_ij (x) E(e_ij),
// with the first tensor factor indexing the input algebra.
struct UcpMap {
  Index dim_in = 0;
  Index dim_out = 0;
  Matrix choi;  // (dim_in * dim_out) square
  bool verified = false;
};

// General linear map between matrix algebras in transfer form:
// vec(L(a)) = mat * vec(a). Used for adjoints and generators, which need
// not be unital or positive.
struct SuperOp {
  Index dim_in = 0;
  Index dim_out = 0;
  Matrix mat;  // dim_out^2 x dim_in^2
};

// ---- choi / transfer conversions ----
// Reshuffle: S[(k,l),(i,j)] = C[(i,k),(j,l)] for a map M_n -> M_m.

inline Matrix choi_to_super(const Matrix& choi, Index n, Index m) {
  if (choi.rows() != n * m || choi.cols() != n * m)
    throw std::invalid_argument("choi_to_super: size mismatch");
  Matrix s(m * m, n * n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j)
      for (Index k = 0; k < m; ++k)
        for (Index l = 0; l < m; ++l) s(k * m + l, i * n + j) = choi(i * m + k, j * m + l);
  return s;
}

inline Matrix super_to_choi(const Matrix& s, Index n, Index m) {
  if (s.rows() != m * m || s.cols() != n * n)
    throw std::invalid_argument("super_to_choi: size mismatch");
  Matrix choi(n * m, n * m);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j)
      for (Index k = 0; k < m; ++k)
        for (Index l = 0; l < m; ++l) choi(i * m + k, j * m + l) = s(k * m + l, i * n + j);
  return choi;
}

inline SuperOp to_super(const UcpMap& e) {
  return {e.dim_in, e.dim_out, choi_to_super(e.choi, e.dim_in, e.dim_out)};
}

// Builds a transfer matrix by applying an action to every matrix unit.
template <class F>
inline SuperOp super_from_action(Index n_in, Index n_out, F&& action) {
  Matrix s(n_out * n_out, n_in * n_in);
  Matrix unit = Matrix::Zero(n_in, n_in);
  for (Index i = 0; i < n_in; ++i)
    for (Index j = 0; j < n_in; ++j) {
      unit(i, j) = 1.0;
      s.col(i * n_in + j) = vec(action(unit));
      unit(i, j) = 0.0;
    }
  return {n_in, n_out, s};
}

// ---- application ----

// Forwarding template so that unqualified calls never fall through to
// std::apply, which ADL drags in via the std::complex scalar type and which
// would otherwise win overload resolution for rvalue or mutable arguments.
template <typename MapT, typename ArgT>
  requires(std::is_same_v<std::remove_cvref_t<MapT>, SuperOp> ||
           std::is_same_v<std::remove_cvref_t<MapT>, UcpMap>)
inline Matrix apply(MapT&& map, ArgT&& arg) {
  const Matrix a = std::forward<ArgT>(arg);
  if (a.rows() != map.dim_in || a.cols() != map.dim_in)
    throw std::invalid_argument("apply: operator dimension mismatch");
  if constexpr (std::is_same_v<std::remove_cvref_t<MapT>, SuperOp>) {
    return unvec(map.mat * vec(a), map.dim_out, map.dim_out);
  } else {
    // E(a) = Tr_first[(a^T (x) 1) choi]
    Matrix id = Matrix::Identity(map.dim_out, map.dim_out);
    return partial_trace(kron(a.transpose(), id) * map.choi, Side::First, map.dim_in,
                         map.dim_out);
  }
}

// ---- construction ----

inline UcpMap ucp_raw(const Matrix& choi, Index dim_in, Index dim_out) {
  if (choi.rows() != dim_in * dim_out || choi.cols() != dim_in * dim_out)
    throw InvalidChannel("ucp_raw: Choi size does not match dimensions");
  require_finite(choi, "ucp_raw");
  return {dim_in, dim_out, choi, false};
}

// Validates complete positivity (eigenvalues >= -psd_tol, negatives clipped)
// and unitality, and marks the map verified.
inline UcpMap ucp_verified(const Matrix& choi, Index dim_in, Index dim_out,
                           double psd_tol = kPsdTol, double unital_tol = kUnitalTol) {
  UcpMap e = ucp_raw(choi, dim_in, dim_out);
  if (dim_in > kMaxDim || dim_out > kMaxDim)
    throw InvalidChannel("ucp_verified: dimension exceeds supported maximum");
  if (herm_defect(e.choi) > kHermTol)
    throw InvalidChannel("ucp_verified: Choi matrix is not Hermitian within tolerance");
  HermEig dec = herm_eig(e.choi);
  if (dec.eigenvalues.minCoeff() < -psd_tol)
    throw InvalidChannel("ucp_verified: Choi matrix is not positive semidefinite");
  if (dec.eigenvalues.minCoeff() < 0.0) {
    RealVector d = dec.eigenvalues.cwiseMax(0.0);
    e.choi = dec.eigenvectors * d.asDiagonal() * dec.eigenvectors.adjoint();
  }
  Matrix unit = partial_trace(e.choi, Side::First, dim_in, dim_out);
  if ((unit - Matrix::Identity(dim_out, dim_out)).cwiseAbs().maxCoeff() > unital_tol)
    throw InvalidChannel("ucp_verified: map is not unital within tolerance");
  e.verified = true;
  return e;
}

inline UcpMap from_super(const SuperOp& s, double psd_tol = kPsdTol,
                         double unital_tol = kUnitalTol) {
  return ucp_verified(super_to_choi(s.mat, s.dim_in, s.dim_out), s.dim_in, s.dim_out, psd_tol,
                      unital_tol);
}

inline UcpMap identity_channel(Index n) {
  return ucp_verified(super_to_choi(Matrix::Identity(n * n, n * n), n, n), n, n);
}

inline UcpMap unitary_channel(const Matrix& u) {
  require_square(u, "unitary_channel");
  const Index n = u.rows();
  if ((u * u.adjoint() - Matrix::Identity(n, n)).cwiseAbs().maxCoeff() > 1e-10)
    throw InvalidChannel("unitary_channel: matrix is not unitary");
  return from_super({n, n, kron(u, u.conjugate())});
}

// a -> Tr(zeta a) 1; Choi matrix is zeta^T (x) 1.
inline UcpMap collapse_channel(const FaithfulState& s) {
  Matrix id = Matrix::Identity(s.dim, s.dim);
  return ucp_verified(kron(s.density.transpose(), id), s.dim, s.dim);
}

// ---- composition and adjoints ----

// compose(e, f)(a) = e(f(a))
inline UcpMap compose(const UcpMap& e, const UcpMap& f) {
  if (f.dim_out != e.dim_in) throw std::invalid_argument("compose: dimension mismatch");
  Matrix s = to_super(e).mat * to_super(f).mat;
  UcpMap r = ucp_raw(super_to_choi(s, f.dim_in, e.dim_out), f.dim_in, e.dim_out);
  r.verified = e.verified && f.verified;
  return r;
}

// Adjoint for the Hilbert-Schmidt pairing Tr(E(a)* x) = Tr(a* E^#(x)).
inline SuperOp hs_adjoint(const SuperOp& s) {
  return {s.dim_out, s.dim_in, s.mat.adjoint()};
}

inline SuperOp hs_adjoint(const UcpMap& e) { return hs_adjoint(to_super(e)); }

// Factor-wise tensor of two maps, acting on the bipartite algebra.
inline SuperOp tensor_super(const SuperOp& a, const SuperOp& b) {
  const Index nin = a.dim_in * b.dim_in;
  const Index nout = a.dim_out * b.dim_out;
  Matrix s(nout * nout, nin * nin);
  for (Index r1 = 0; r1 < a.dim_in; ++r1)
    for (Index r2 = 0; r2 < a.dim_in; ++r2) {
      Matrix au = unvec(a.mat.col(r1 * a.dim_in + r2), a.dim_out, a.dim_out);
      for (Index s1 = 0; s1 < b.dim_in; ++s1)
        for (Index s2 = 0; s2 < b.dim_in; ++s2) {
          Matrix bu = unvec(b.mat.col(s1 * b.dim_in + s2), b.dim_out, b.dim_out);
          Index col = (r1 * b.dim_in + s1) * nin + (r2 * b.dim_in + s2);
          s.col(col) = vec(kron(au, bu));
        }
    }
  return {nin, nout, s};
}

inline SuperOp identity_super(Index n) { return {n, n, Matrix::Identity(n * n, n * n)}; }

// ---- state-intertwined maps ----

// E: M -> N with target(E(a)) = source(a); 'source' lives on the domain.
struct IntertwinedPair {
  UcpMap map;
  FaithfulState source;
  FaithfulState target;
};

inline double intertwine_defect(const UcpMap& e, const FaithfulState& source,
                                const FaithfulState& target) {
  // target compose E == source, equivalently E^#(eta) == zeta
  Matrix pulled = unvec(to_super(e).mat.adjoint() * vec(target.density), e.dim_in, e.dim_in);
  return (pulled - source.density).cwiseAbs().maxCoeff();
}

inline IntertwinedPair intertwined(const UcpMap& map, const FaithfulState& source,
                                   const FaithfulState& target,
                                   double tol = kIntertwineTol) {
  if (map.dim_in != source.dim || map.dim_out != target.dim)
    throw InvalidChannel("intertwined: state dimensions do not match the map");
  if (intertwine_defect(map, source, target) > tol)
    throw InvalidChannel("intertwined: map does not carry the target state to the source state");
  return {map, source, target};
}

// ---- KMS dual ----
// E^s(b) = zeta^{-1/2} E^#(eta^{1/2} b eta^{1/2}) zeta^{-1/2}. Unital, CP,
// swaps source and target, and is an involution.

inline IntertwinedPair kms_dual(const IntertwinedPair& p, double tol = 1e-8) {
  const Matrix adj = to_super(p.map).mat.adjoint();
  const FaithfulState& mu = p.source;
  const FaithfulState& nu = p.target;
  SuperOp dual = super_from_action(nu.dim, mu.dim, [&](const Matrix& b) {
    Matrix inner = unvec(adj * vec(Matrix(nu.sqrt_density * b * nu.sqrt_density)), mu.dim, mu.dim);
    return Matrix(mu.inv_sqrt_density * inner * mu.inv_sqrt_density);
  });
  UcpMap m = from_super(dual, tol, tol);
  return intertwined(m, nu, mu, tol);
}

// Max residual of the defining pairing
//   <L_mu, (a (x) E^s(b)^T) L_mu> = <L_nu, (E(a) (x) b^T) L_nu>
// over matrix units a, b. Computed for an explicit dual candidate.
inline double dual_relation_residual(const IntertwinedPair& p, const UcpMap& candidate) {
  const Index n = p.source.dim;
  const Index m = p.target.dim;
  if (candidate.dim_in != m || candidate.dim_out != n)
    throw std::invalid_argument("dual_relation_residual: candidate has wrong shape");
  // <L_mu, (a (x) c^T) L_mu> = Tr(zeta^{1/2} a zeta^{1/2} c), so the two
  // sides reduce to entries of sandwiched images of matrix units.
  std::vector<Matrix> lhs(static_cast<size_t>(m * m));
  Matrix unit_b = Matrix::Zero(m, m);
  for (Index k = 0; k < m; ++k)
    for (Index l = 0; l < m; ++l) {
      unit_b(k, l) = 1.0;
      lhs[static_cast<size_t>(k * m + l)] =
          p.source.sqrt_density * apply(candidate, unit_b) * p.source.sqrt_density;
      unit_b(k, l) = 0.0;
    }
  double worst = 0.0;
  Matrix unit_a = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) {
      unit_a(i, j) = 1.0;
      Matrix rhs = p.target.sqrt_density * apply(p.map, unit_a) * p.target.sqrt_density;
      unit_a(i, j) = 0.0;
      for (Index k = 0; k < m; ++k)
        for (Index l = 0; l < m; ++l) {
          Complex left = lhs[static_cast<size_t>(k * m + l)](j, i);
          Complex right = rhs(l, k);
          worst = std::max(worst, std::abs(left - right));
        }
    }
  return worst;
}

inline double verify_dual_relation(const IntertwinedPair& p) {
  return dual_relation_residual(p, kms_dual(p).map);
}

// ---- reservoir / system split ----
// M = R (x) S with product states; maps below realize the standard
// state-preserving conditional expectations onto the second factor.

// P(r (x) s) = mu_R(r) 1_R (x) s, as a map on the full algebra.
inline UcpMap cond_expectation_onto_second(const FaithfulState& state_r, Index dim_s) {
  Matrix id_r = Matrix::Identity(state_r.dim, state_r.dim);
  SuperOp collapse{state_r.dim, state_r.dim,
                   vec(id_r) * vec(state_r.density.transpose()).transpose()};
  return from_super(tensor_super(collapse, identity_super(dim_s)));
}

// P_S(r (x) s) = mu_R(r) s, mapping the full algebra onto the system factor.
inline UcpMap slice_to_second(const FaithfulState& state_r, Index dim_s) {
  const Index dim_r = state_r.dim;
  return from_super(super_from_action(dim_r * dim_s, dim_s, [&](const Matrix& a) {
    Matrix id_s = Matrix::Identity(dim_s, dim_s);
    return partial_trace(kron(state_r.density, id_s) * a, Side::First, dim_r, dim_s);
  }));
}

// s -> 1_R (x) s
inline UcpMap embed_second(Index dim_r, Index dim_s) {
  Matrix id_r = Matrix::Identity(dim_r, dim_r);
  return from_super(super_from_action(dim_s, dim_r * dim_s, [&](const Matrix& s) {
    return kron(id_r, s);
  }));
}

// Reduced map P_S compose alpha compose embed on the system factor.
inline UcpMap reduce_channel(const UcpMap& alpha, const FaithfulState& state_r, Index dim_s) {
  if (alpha.dim_in != state_r.dim * dim_s || alpha.dim_out != alpha.dim_in)
    throw std::invalid_argument("reduce_channel: map does not act on the declared split");
  return compose(slice_to_second(state_r, dim_s),
                 compose(alpha, embed_second(state_r.dim, dim_s)));
}

}  // namespace ncw
