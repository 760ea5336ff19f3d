#pragma once

#include "ncw/linalg.hpp"

#include <vector>

namespace ncw {

// Smallest admissible eigenvalue of a density matrix.
constexpr double kFaithfulEps = 1e-10;

struct NotFaithful : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Faithful state on a matrix algebra: positive definite density with unit
// trace, together with cached spectral companions used throughout.
struct FaithfulState {
  Index dim = 0;
  Matrix density;
  Matrix sqrt_density;
  Matrix inv_sqrt_density;
  Matrix log_density;
};

inline FaithfulState make_state(const Matrix& density) {
  require_square(density, "make_state");
  require_finite(density, "make_state");
  if (density.rows() > kMaxDim)
    throw std::invalid_argument("make_state: dimension exceeds supported maximum");
  if (herm_defect(density) > kHermTol)
    throw NotFaithful("make_state: density is not Hermitian within tolerance");
  if (std::abs(density.trace().real() - 1.0) > 1e-10 || std::abs(density.trace().imag()) > 1e-10)
    throw NotFaithful("make_state: density does not have unit trace");
  HermEig e = herm_eig(density);
  if (e.eigenvalues.minCoeff() < kFaithfulEps)
    throw NotFaithful("make_state: density is not faithful (eigenvalue below threshold)");

  FaithfulState s;
  s.dim = density.rows();
  s.density = herm_part(density);
  auto rebuild = [&](const std::function<double(double)>& f) {
    RealVector d(e.eigenvalues.size());
    for (Index i = 0; i < d.size(); ++i) d(i) = f(e.eigenvalues(i));
    return Matrix(e.eigenvectors * d.asDiagonal() * e.eigenvectors.adjoint());
  };
  s.sqrt_density = rebuild([](double x) { return std::sqrt(x); });
  s.inv_sqrt_density = rebuild([](double x) { return 1.0 / std::sqrt(x); });
  s.log_density = rebuild([](double x) { return std::log(x); });
  return s;
}

inline FaithfulState diag_state(const std::vector<double>& probs) {
  Matrix d = Matrix::Zero(static_cast<Index>(probs.size()), static_cast<Index>(probs.size()));
  for (size_t i = 0; i < probs.size(); ++i) d(static_cast<Index>(i), static_cast<Index>(i)) = probs[i];
  return make_state(d);
}

inline FaithfulState qubit_state(double p) { return diag_state({p, 1.0 - p}); }

inline Complex expectation(const FaithfulState& s, const Matrix& a) {
  if (a.rows() != s.dim || a.cols() != s.dim)
    throw std::invalid_argument("expectation: operator dimension mismatch");
  return (s.density * a).trace();
}

// Modular flow at time t: a -> zeta^{it} a zeta^{-it}.
inline Matrix modular_apply(const FaithfulState& s, double t, const Matrix& a) {
  if (a.rows() != s.dim || a.cols() != s.dim)
    throw std::invalid_argument("modular_apply: operator dimension mismatch");
  Matrix u = mat_func(s.density, [t](double x) {
    return std::exp(Complex(0.0, t * std::log(x)));
  });
  return u * a * u.adjoint();
}

// Transfer matrix (vec coordinates) of the modular generator
// a -> [log zeta, a]; the flow is a -> exp(it ad(log zeta)) a.
inline Matrix modular_generator(const FaithfulState& s) {
  Matrix id = Matrix::Identity(s.dim, s.dim);
  return kron(s.log_density, id) - kron(id, s.log_density.transpose());
}

// KMS inner product <a, b> = Tr(zeta^{1/2} a* zeta^{1/2} b).
inline Complex kms_inner(const FaithfulState& s, const Matrix& a, const Matrix& b) {
  if (a.rows() != s.dim || a.cols() != s.dim || b.rows() != s.dim || b.cols() != s.dim)
    throw std::invalid_argument("kms_inner: operator dimension mismatch");
  return (s.sqrt_density * a.adjoint() * s.sqrt_density * b).trace();
}

// Cyclic vector of the standard representation, vec(zeta^{1/2}); satisfies
// <L, (a kron 1) L> = Tr(zeta a).
inline Vector standard_vector(const FaithfulState& s) { return vec(s.sqrt_density); }

}  // namespace ncw
