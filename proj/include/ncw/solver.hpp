#pragma once

#include "ncw/balance.hpp"
#include "ncw/cost.hpp"

namespace ncw {

// ---- problem setup ----

// Linear SDP over the Choi variable in hvec coordinates:
//   minimize cost_constant + <cost_linear, x>  s.t.  a x = b, hunvec(x) psd.
// The constraint rows are orthonormal (reduce_rows output).
struct SdpProblem {
  FaithfulState mu, nu;
  ConstraintSet constraints;
  double cost_constant = 0.0;
  RealVector cost_linear;
};

inline SdpProblem make_problem(const GenSystem& a, const GenSystem& b, const CostSpec& spec,
                               Variant variant) {
  if (spec.dim() != a.state.dim)
    throw std::invalid_argument("make_problem: coordinates live on a different algebra");
  SdpProblem p{a.state, b.state, reduce_rows(assemble(a, b, variant)), 0.0, {}};
  CostCoefficients cc = cost_coefficients(spec, a.state, b.state);
  p.cost_constant = cc.constant;
  p.cost_linear = cc.linear;
  return p;
}

// ---- ADMM solve ----

struct SolveOptions {
  double tol = 1e-9;
  int max_iter = 200000;
  double rho = 1.0;
  bool adaptive_rho = true;
};

struct SolveReport {
  double optimal_cost = 0.0;
  double distance = 0.0;  // sqrt of the clipped cost
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double constraint_residual = 0.0;  // max |a z - b| at the reported iterate
  int iterations = 0;
  bool converged = false;
  Matrix choi;                       // psd iterate the numbers refer to
  std::optional<TransportPlan> plan; // absent if the iterate fails validation
};

// Splitting: x carries the affine constraints, z the psd cone, consensus
// x = z. Projection onto the affine set is cheap because rows of a are
// orthonormal. Over-relaxation and residual-balanced rho updates.
inline SolveReport solve(const SdpProblem& problem, const SolveOptions& opts = {}) {
  const Index nchoi = problem.constraints.choi_dim;
  const Index dim = nchoi * nchoi;
  if (problem.cost_linear.size() != dim)
    throw std::invalid_argument("solve: cost vector does not match the constraint set");
  const RealMatrix& a = problem.constraints.a;
  const RealVector& b = problem.constraints.b;
  const double alpha = 1.6;
  double rho = opts.rho;

  auto proj_affine = [&](const RealVector& v) -> RealVector {
    return v - a.transpose() * (a * v - b);
  };
  auto proj_psd = [&](const RealVector& v) -> RealVector {
    return hvec(psd_project(hunvec(v, nchoi)));
  };

  // product coupling: feasible for every constraint set built from
  // state-preserving dynamics, so the psd iterate starts on the affine set
  RealVector z = hvec(kron(problem.mu.density.transpose(),
                           Matrix::Identity(problem.nu.dim, problem.nu.dim)));
  RealVector x = z;
  RealVector u = RealVector::Zero(dim);

  SolveReport report;
  double rnorm = 0.0, snorm = 0.0;
  int iter = 0;
  int next_adapt = 50;
  for (; iter < opts.max_iter; ++iter) {
    x = proj_affine(z - u - problem.cost_linear / rho);
    RealVector x_relax = alpha * x + (1.0 - alpha) * z;
    RealVector z_prev = z;
    z = proj_psd(x_relax + u);
    u += x_relax - z;

    rnorm = (x - z).norm();
    snorm = rho * (z - z_prev).norm();
    const double scale = std::sqrt(static_cast<double>(dim));
    double eps_pri = scale * opts.tol + opts.tol * std::max(x.norm(), z.norm());
    double eps_dual = scale * opts.tol + opts.tol * rho * u.norm();
    if (rnorm <= eps_pri && snorm <= eps_dual) {
      ++iter;
      report.converged = true;
      break;
    }
    // exponentially spaced so the penalty eventually stays fixed; a constant
    // cadence can lock borderline instances into a rescaling limit cycle
    if (opts.adaptive_rho && iter + 1 == next_adapt) {
      next_adapt *= 2;
      if (rnorm > 10.0 * snorm && rho < 1e6) {
        rho *= 2.0;
        u /= 2.0;
      } else if (snorm > 10.0 * rnorm && rho > 1e-6) {
        rho /= 2.0;
        u *= 2.0;
      }
    }
  }

  report.iterations = iter;
  report.primal_residual = rnorm;
  report.dual_residual = snorm;
  report.constraint_residual =
      b.size() > 0 ? (a * z - b).cwiseAbs().maxCoeff() : 0.0;
  report.optimal_cost = problem.cost_constant + problem.cost_linear.dot(z);
  report.distance = std::sqrt(std::max(0.0, report.optimal_cost));
  report.choi = hunvec(z, nchoi);

  double slack = std::max(1e-7, 10.0 * std::max(report.primal_residual,
                                                report.constraint_residual));
  try {
    UcpMap m = ucp_verified(report.choi, problem.mu.dim, problem.nu.dim, slack, slack);
    report.plan = from_channel(intertwined(m, problem.mu, problem.nu, slack), slack);
  } catch (const std::exception&) {
    report.plan.reset();
  }
  return report;
}

// ---- closed-route oracle for 2x2 diagonal problems ----

// For a pair of systems on M_2 with diagonal states whose feasible couplings
// have the classical-diagonal-plus-one-corner shape, the SDP collapses to a
// one-dimensional convex minimization that this routine solves to high
// accuracy, entirely through the coupling-density pairing. It verifies the
// shape assumptions against the constraint set and throws if they fail, so it
// cannot silently return a bound instead of the optimum.
struct OracleResult {
  double optimal_cost = 0.0;
  double distance = 0.0;
  double t_lo = 0.0, t_hi = 0.0, t_opt = 0.0;  // range and argmin of kappa_00
  Complex corner{0.0, 0.0};                    // optimal kappa_03
  Matrix kappa;                                // optimal coupling density
};

inline OracleResult oracle_2x2(const GenSystem& sys_a, const GenSystem& sys_b,
                               const CostSpec& spec, Variant variant,
                               double grid_step = 1e-4) {
  const FaithfulState& mu = sys_a.state;
  const FaithfulState& nu = sys_b.state;
  if (mu.dim != 2 || nu.dim != 2 || spec.dim() != 2)
    throw std::invalid_argument("oracle_2x2: needs 2x2 systems");
  auto diag_defect = [](const Matrix& m) {
    return std::max(std::abs(m(0, 1)), std::abs(m(1, 0)));
  };
  if (diag_defect(mu.density) > 1e-12 || diag_defect(nu.density) > 1e-12)
    throw std::invalid_argument("oracle_2x2: needs diagonal states");

  ConstraintSet red = reduce_rows(assemble(sys_a, sys_b, variant));
  const Index dim = red.choi_dim * red.choi_dim;  // 16
  RealVector x_part = red.a.transpose() * red.b;  // min-norm feasible point

  // orthonormal basis of the null space of the reduced rows
  std::vector<RealVector> null_basis;
  for (Index d = 0; d < dim; ++d) {
    RealVector v = RealVector::Zero(dim);
    v(d) = 1.0;
    v -= red.a.transpose() * (red.a * v);
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& nb : null_basis) v -= nb.dot(v) * nb;
    if (v.norm() > 1e-10) null_basis.push_back(v / v.norm());
  }
  const Index nfree = static_cast<Index>(null_basis.size());

  // kappa as a function of the free coordinates: kappa(y) = kappa0 + sum y_j K_j
  Matrix kappa0 = kappa_from_choi(hunvec(x_part, 4), 2, 2, nu);
  std::vector<Matrix> kdirs;
  for (const auto& nb : null_basis) kdirs.push_back(kappa_from_choi(hunvec(nb, 4), 2, 2, nu));

  // gradients of the watched entries over the free coordinates
  auto entry_grad = [&](Index r, Index c) {
    RealVector g_re(nfree), g_im(nfree);
    for (Index j = 0; j < nfree; ++j) {
      g_re(j) = kdirs[static_cast<size_t>(j)](r, c).real();
      g_im(j) = kdirs[static_cast<size_t>(j)](r, c).imag();
    }
    return std::make_pair(g_re, g_im);
  };
  // every entry outside the diagonal and the (0,3)/(3,0) corner must be
  // constant zero on the feasible set
  for (Index r = 0; r < 4; ++r)
    for (Index c = 0; c < 4; ++c) {
      if (r == c || (r == 0 && c == 3) || (r == 3 && c == 0)) continue;
      auto [gre, gim] = entry_grad(r, c);
      if (gre.norm() > 1e-9 || gim.norm() > 1e-9 || std::abs(kappa0(r, c)) > 1e-9)
        throw std::runtime_error("oracle_2x2: coupling entry (" + std::to_string(r) + "," +
                                 std::to_string(c) + ") is not pinned to zero");
    }

  // diagonal must move along a single direction, parameterized by t = kappa_00
  RealVector g0 = entry_grad(0, 0).first;
  double diag_a[4], diag_b[4];
  for (Index i = 0; i < 4; ++i) {
    RealVector gi = entry_grad(i, i).first;
    if (entry_grad(i, i).second.norm() > 1e-9)
      throw std::runtime_error("oracle_2x2: diagonal entry with imaginary drift");
    double bi = 0.0;
    if (g0.norm() > 1e-10) {
      bi = gi.dot(g0) / g0.squaredNorm();
      if ((gi - bi * g0).norm() > 1e-8)
        throw std::runtime_error("oracle_2x2: diagonal entries move in independent directions");
    } else if (gi.norm() > 1e-9) {
      throw std::runtime_error("oracle_2x2: diagonal moves while kappa_00 is pinned");
    }
    diag_b[i] = bi;
    diag_a[i] = kappa0(i, i).real() - bi * kappa0(0, 0).real();
  }

  // corner freedom: none, a line, or the full complex plane
  auto [h_re, h_im] = entry_grad(0, 3);
  RealMatrix corner_stack(2, nfree);
  corner_stack.row(0) = h_re.transpose();
  corner_stack.row(1) = h_im.transpose();
  RealMatrix corner_q = detail::orthonormal_rows(corner_stack, 1e-9);
  const Index corner_rank = corner_q.rows();
  if (std::abs(kappa0(0, 3)) > 1e-9)
    throw std::runtime_error("oracle_2x2: corner entry pinned to a nonzero value");

  // the free directions must be exactly the diagonal line plus the corner span
  Index expected = (g0.norm() > 1e-10 ? 1 : 0) + corner_rank;
  RealMatrix all_grads(2 + 1, nfree);
  all_grads.row(0) = g0.transpose();
  all_grads.row(1) = h_re.transpose();
  all_grads.row(2) = h_im.transpose();
  if (nfree != expected || detail::orthonormal_rows(all_grads, 1e-9).rows() != nfree)
    throw std::runtime_error("oracle_2x2: feasible set has unrecognized free directions");

  // achievable corner directions in the (Re, Im) plane
  RealMatrix corner_dirs(corner_rank, 2);
  for (Index k = 0; k < corner_rank; ++k) {
    RealVector dir = corner_q.row(k).transpose();
    corner_dirs(k, 0) = h_re.dot(dir);
    corner_dirs(k, 1) = h_im.dot(dir);
    corner_dirs.row(k) /= corner_dirs.row(k).norm();
  }

  // t range from nonnegativity of the diagonal
  const double t0 = kappa0(0, 0).real();
  double t_lo = -std::numeric_limits<double>::infinity();
  double t_hi = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < 4; ++i) {
    if (std::abs(diag_b[i]) <= 1e-12) {
      if (diag_a[i] < -1e-10)
        throw std::runtime_error("oracle_2x2: infeasible pinned diagonal entry");
      continue;
    }
    double bound = -diag_a[i] / diag_b[i];
    if (diag_b[i] > 0)
      t_lo = std::max(t_lo, bound);
    else
      t_hi = std::min(t_hi, bound);
  }
  if (g0.norm() <= 1e-10) t_lo = t_hi = t0;
  if (t_lo > t_hi + 1e-12) throw std::runtime_error("oracle_2x2: empty coupling polytope");
  t_hi = std::max(t_lo, t_hi);

  // cost through the pairing route: affine in (t, Re w, Im w), so coefficients
  // come from exact differences of pairing evaluations
  auto kappa_at = [&](double t, Complex w) {
    Matrix k = kappa0;
    for (Index i = 0; i < 4; ++i) k(i, i) = diag_a[i] + diag_b[i] * t;
    k(0, 3) = w;
    k(3, 0) = std::conj(w);
    return k;
  };
  auto pc = [&](const Matrix& k) { return pairing_cost(k, spec, mu, nu); };
  const double tc = 0.5 * (t_lo + t_hi);
  const double c_base = pc(kappa_at(tc, {0.0, 0.0}));
  const double a_t = pc(kappa_at(tc + 1.0, {0.0, 0.0})) - c_base;
  const double a_re = pc(kappa_at(tc, {1.0, 0.0})) - c_base;
  const double a_im = pc(kappa_at(tc, {0.0, 1.0})) - c_base;

  // best corner direction: minimizing w on the radius-r disc, restricted to
  // the achievable span, contributes -gain * r
  double gain = 0.0;
  RealVector best_dir = RealVector::Zero(2);
  if (corner_rank == 2) {
    gain = std::hypot(a_re, a_im);
    if (gain > 0) {
      best_dir(0) = -a_re / gain;
      best_dir(1) = -a_im / gain;
    }
  } else if (corner_rank == 1) {
    double along = a_re * corner_dirs(0, 0) + a_im * corner_dirs(0, 1);
    gain = std::abs(along);
    best_dir = -(along >= 0 ? 1.0 : -1.0) * corner_dirs.row(0).transpose();
  }

  auto radius = [&](double t) {
    double prod = std::max(0.0, diag_a[0] + diag_b[0] * t) *
                  std::max(0.0, diag_a[3] + diag_b[3] * t);
    return std::sqrt(prod);
  };
  auto g = [&](double t) { return c_base + a_t * (t - tc) - gain * radius(t); };

  // convex in t: coarse grid to bracket, then golden-section refinement
  double best_t = t_lo;
  if (t_hi > t_lo) {
    const int cells = std::max(2, static_cast<int>(std::ceil((t_hi - t_lo) / grid_step)));
    double best_val = std::numeric_limits<double>::infinity();
    int best_i = 0;
    for (int i = 0; i <= cells; ++i) {
      double t = t_lo + (t_hi - t_lo) * i / cells;
      double v = g(t);
      if (v < best_val) {
        best_val = v;
        best_i = i;
      }
    }
    double lo = t_lo + (t_hi - t_lo) * std::max(0, best_i - 1) / cells;
    double hi = t_lo + (t_hi - t_lo) * std::min(cells, best_i + 1) / cells;
    const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = hi - invphi * (hi - lo), x2 = lo + invphi * (hi - lo);
    double f1 = g(x1), f2 = g(x2);
    while (hi - lo > 1e-12) {
      if (f1 < f2) {
        hi = x2;
        x2 = x1;
        f2 = f1;
        x1 = hi - invphi * (hi - lo);
        f1 = g(x1);
      } else {
        lo = x1;
        x1 = x2;
        f1 = f2;
        x2 = lo + invphi * (hi - lo);
        f2 = g(x2);
      }
    }
    best_t = 0.5 * (lo + hi);
    // boundary minima are exact at the endpoints, and the refined midpoint
    // can only sit within bracket width of them, so keep the best of three
    if (g(t_lo) <= g(best_t)) best_t = t_lo;
    if (g(t_hi) < g(best_t)) best_t = t_hi;
  }

  OracleResult result;
  result.t_lo = t_lo;
  result.t_hi = t_hi;
  result.t_opt = best_t;
  result.corner = Complex(best_dir(0), best_dir(1)) * radius(best_t);
  result.kappa = kappa_at(best_t, result.corner);
  result.optimal_cost = pc(result.kappa);
  result.distance = std::sqrt(std::max(0.0, result.optimal_cost));

  // parameterization must stay inside the affine set; checked at the extremes
  // so hidden constraints cannot shrink the polytope unnoticed
  auto choi_residual = [&](double t, Complex w) {
    Matrix k = kappa_at(t, w);
    Matrix d_inv = Matrix::Zero(4, 4);
    for (Index i = 0; i < 2; ++i)
      for (Index j = 0; j < 2; ++j)
        d_inv(i * 2 + j, i * 2 + j) = 1.0 / std::sqrt(nu.density(j, j).real());
    Matrix choi = (d_inv * k * d_inv).conjugate();
    return (red.a * hvec(choi) - red.b).cwiseAbs().maxCoeff();
  };
  double feas = std::max({choi_residual(t_lo, {0.0, 0.0}), choi_residual(t_hi, {0.0, 0.0}),
                          choi_residual(best_t, result.corner)});
  if (feas > 1e-8)
    throw std::runtime_error("oracle_2x2: parameterized couplings leave the constraint set");
  return result;
}

// ---- top-level distances ----

inline SolveReport wasserstein(const GenSystem& a, const GenSystem& b, const CostSpec& spec,
                               Variant variant, const SolveOptions& opts = {}) {
  return solve(make_problem(a, b, spec, variant), opts);
}

}  // namespace ncw
