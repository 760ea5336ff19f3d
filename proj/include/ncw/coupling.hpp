#pragma once

#include "ncw/channel.hpp"

namespace ncw {

// Tolerance on coupling-density invariants (marginals, trace, positivity).
constexpr double kCouplingTol = 1e-9;

struct InvalidCoupling : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct BalanceViolated : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Transport plan between faithful states, held in its channel form. The
// coupling density kappa represents the same functional on the bipartite
// algebra (second slot carries transposed commutant elements):
//   Tr(kappa (a (x) c)) = Tr(eta^{1/2} E(a) eta^{1/2} c^T),
// so the marginals are (zeta, eta^T).
struct TransportPlan {
  IntertwinedPair pair;
  Matrix kappa;  // (dim_in * dim_out) square, PSD, unit trace
};

// kappa = (E^# (x) id)(L_nu L_nu*) with L_nu the standard vector of eta.
inline Matrix kappa_from_choi(const Matrix& choi, Index dim_in, Index dim_out,
                              const FaithfulState& nu) {
  if (nu.dim != dim_out)
    throw std::invalid_argument("kappa_from_choi: target state dimension mismatch");
  SuperOp adj{dim_out, dim_in, choi_to_super(choi, dim_in, dim_out).adjoint()};
  SuperOp lift = tensor_super(adj, identity_super(dim_out));
  Vector lambda = standard_vector(nu);
  Matrix rho = lambda * lambda.adjoint();
  return unvec(lift.mat * vec(rho), dim_in * dim_out, dim_in * dim_out);
}

inline void validate_coupling_density(const Matrix& kappa, const FaithfulState& mu,
                                      const FaithfulState& nu, double tol) {
  const Index n = mu.dim, m = nu.dim;
  if (kappa.rows() != n * m || kappa.cols() != n * m)
    throw InvalidCoupling("coupling density has the wrong size");
  require_finite(kappa, "coupling density");
  if (herm_defect(kappa) > kHermTol)
    throw InvalidCoupling("coupling density is not Hermitian within tolerance");
  if (std::abs(kappa.trace().real() - 1.0) > tol)
    throw InvalidCoupling("coupling density does not have unit trace");
  HermEig e = herm_eig(kappa);
  if (e.eigenvalues.minCoeff() < -tol)
    throw InvalidCoupling("coupling density is not positive semidefinite");
  Matrix first = partial_trace(kappa, Side::Second, n, m);
  if ((first - mu.density).cwiseAbs().maxCoeff() > tol)
    throw InvalidCoupling("first marginal does not match the source state");
  Matrix second = partial_trace(kappa, Side::First, n, m);
  if ((second - nu.density.transpose()).cwiseAbs().maxCoeff() > tol)
    throw InvalidCoupling("second marginal does not match the target state");
}

inline TransportPlan from_channel(const IntertwinedPair& p, double tol = kCouplingTol) {
  Matrix kappa = kappa_from_choi(p.map.choi, p.map.dim_in, p.map.dim_out, p.target);
  validate_coupling_density(kappa, p.source, p.target, tol);
  return {p, kappa};
}

inline Matrix to_density(const TransportPlan& w) { return w.kappa; }

// Recovers the channel from a coupling density:
//   E(a) = eta^{-1/2} (Tr_first[kappa (a (x) 1)])^T eta^{-1/2}.
inline TransportPlan from_density(const Matrix& kappa, const FaithfulState& mu,
                                  const FaithfulState& nu, double tol = kCouplingTol) {
  validate_coupling_density(kappa, mu, nu, tol);
  const Index n = mu.dim, m = nu.dim;
  Matrix id_m = Matrix::Identity(m, m);
  SuperOp channel = super_from_action(n, m, [&](const Matrix& a) {
    Matrix z = partial_trace(kappa * kron(a, id_m), Side::First, n, m);
    return Matrix(nu.inv_sqrt_density * z.transpose() * nu.inv_sqrt_density);
  });
  UcpMap e = from_super(channel, std::max(kPsdTol, tol), std::max(kUnitalTol, tol));
  return {intertwined(e, mu, nu, std::max(kIntertwineTol, tol)), kappa};
}

inline TransportPlan identity_plan(const FaithfulState& mu) {
  return from_channel(intertwined(identity_channel(mu.dim), mu, mu));
}

// Plan carried by the collapse channel a -> mu(a) 1; kappa = zeta (x) eta^T.
inline TransportPlan product_plan(const FaithfulState& mu, const FaithfulState& nu) {
  UcpMap e = ucp_verified(kron(mu.density.transpose(), Matrix::Identity(nu.dim, nu.dim)),
                          mu.dim, nu.dim);
  return from_channel(intertwined(e, mu, nu));
}

// compose(w, p): plans mu -> nu and nu -> xi glue to a plan mu -> xi with
// channel E_p compose E_w.
inline TransportPlan compose(const TransportPlan& w, const TransportPlan& p,
                             double tol = kCouplingTol) {
  if (w.pair.target.dim != p.pair.source.dim ||
      (w.pair.target.density - p.pair.source.density).cwiseAbs().maxCoeff() > 1e-9)
    throw InvalidCoupling("compose: intermediate states do not match");
  UcpMap e = compose(p.pair.map, w.pair.map);
  return from_channel(intertwined(e, w.pair.source, p.pair.target, tol), tol);
}

// Reversed plan via the KMS dual channel; swaps the marginals.
inline TransportPlan kms_reverse(const TransportPlan& w, double tol = kCouplingTol) {
  return from_channel(kms_dual(w.pair, tol), tol);
}

// ---- reduction ----

// Checks the conditional-expectation balance
//   E compose P^{mu_R} == P^{nu_K} compose E
// and, when it holds, returns the reduced plan with channel
//   P_L^{nu_K} compose E compose embed.
inline TransportPlan reduce_plan(const TransportPlan& w, const FaithfulState& state_r_mu,
                                 const FaithfulState& state_r_nu, double balance_tol = 1e-8,
                                 double tol = kCouplingTol) {
  const Index n = w.pair.map.dim_in, m = w.pair.map.dim_out;
  if (n % state_r_mu.dim != 0 || m % state_r_nu.dim != 0)
    throw std::invalid_argument("reduce_plan: reservoir dimensions do not divide the algebras");
  const Index dim_s = n / state_r_mu.dim;
  const Index dim_l = m / state_r_nu.dim;

  // source and target must be product states over the declared splits
  Matrix mu_s = partial_trace(w.pair.source.density, Side::First, state_r_mu.dim, dim_s);
  Matrix nu_l = partial_trace(w.pair.target.density, Side::First, state_r_nu.dim, dim_l);
  if ((w.pair.source.density - kron(state_r_mu.density, mu_s)).cwiseAbs().maxCoeff() > 1e-9)
    throw InvalidCoupling("reduce_plan: source state is not the declared product");
  if ((w.pair.target.density - kron(state_r_nu.density, nu_l)).cwiseAbs().maxCoeff() > 1e-9)
    throw InvalidCoupling("reduce_plan: target state is not the declared product");

  UcpMap p_src = cond_expectation_onto_second(state_r_mu, dim_s);
  UcpMap p_tgt = cond_expectation_onto_second(state_r_nu, dim_l);
  Matrix defect = compose(w.pair.map, p_src).choi - compose(p_tgt, w.pair.map).choi;
  double defect_norm = defect.cwiseAbs().maxCoeff();
  if (defect_norm > balance_tol)
    throw BalanceViolated("reduce_plan: plan is not balanced for the conditional expectations (residual " +
                          std::to_string(defect_norm) + ")");

  UcpMap reduced = compose(slice_to_second(state_r_nu, dim_l),
                           compose(w.pair.map, embed_second(state_r_mu.dim, dim_s)));
  return from_channel(intertwined(reduced, make_state(mu_s), make_state(nu_l),
                                  std::max(kIntertwineTol, tol)),
                      tol);
}

}  // namespace ncw
