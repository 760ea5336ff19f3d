#pragma once

#include "ncw/linalg.hpp"

#include <random>

namespace testutil {

using ncw::Complex;
using ncw::Index;
using ncw::Matrix;

inline Matrix random_matrix(std::mt19937_64& rng, Index n, Index m) {
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix out(n, m);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < m; ++j) out(i, j) = Complex(g(rng), g(rng));
  return out;
}

inline Matrix random_hermitian(std::mt19937_64& rng, Index n) {
  Matrix a = random_matrix(rng, n, n);
  return (a + a.adjoint()) / 2.0;
}

inline Matrix random_unitary(std::mt19937_64& rng, Index n) {
  Eigen::HouseholderQR<Matrix> qr(random_matrix(rng, n, n));
  Matrix q = qr.householderQ();
  Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Index i = 0; i < n; ++i) q.col(i) *= r(i, i) / std::abs(r(i, i));
  return q;
}

// full-rank density with eigenvalues bounded away from zero
inline Matrix random_density(std::mt19937_64& rng, Index n, double floor = 0.05) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::VectorXd p(n);
  for (Index i = 0; i < n; ++i) p(i) = floor + u(rng);
  p /= p.sum();
  Matrix q = random_unitary(rng, n);
  return q * p.cast<Complex>().asDiagonal() * q.adjoint();
}

inline Matrix random_diag_density(std::mt19937_64& rng, Index n, double floor = 0.05) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::VectorXd p(n);
  for (Index i = 0; i < n; ++i) p(i) = floor + u(rng);
  p /= p.sum();
  return Matrix(p.cast<Complex>().asDiagonal());
}

inline double max_abs(const Matrix& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace testutil
