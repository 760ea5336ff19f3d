#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>

#include <cmath>
#include <complex>
#include <functional>
#include <stdexcept>
#include <string>

namespace ncw {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;
using Index = Eigen::Index;

// Largest algebra dimension the dense kernels are sized for; Choi matrices
// then stay within 4096 x 4096.
constexpr Index kMaxDim = 64;

// Relative Frobenius tolerance for treating a matrix as Hermitian.
constexpr double kHermTol = 1e-10;

// ---- basic checks ----

inline void require_square(const Matrix& a, const char* who) {
  if (a.rows() != a.cols())
    throw std::invalid_argument(std::string(who) + ": matrix must be square, got " +
                                std::to_string(a.rows()) + "x" + std::to_string(a.cols()));
}

inline void require_finite(const Matrix& a, const char* who) {
  if (!a.allFinite())
    throw std::invalid_argument(std::string(who) + ": matrix has non-finite entries");
}

// ||a - a*||_F scaled by 1 + ||a||_F
inline double herm_defect(const Matrix& a) {
  return (a - a.adjoint()).norm() / (1.0 + a.norm());
}

inline Matrix herm_part(const Matrix& a) { return 0.5 * (a + a.adjoint()); }

// ---- Hermitian eigendecomposition ----

struct HermEig {
  RealVector eigenvalues;  // ascending
  Matrix eigenvectors;     // columns, unitary
};

inline HermEig herm_eig(const Matrix& a) {
  require_square(a, "herm_eig");
  require_finite(a, "herm_eig");
  if (herm_defect(a) > kHermTol)
    throw std::invalid_argument("herm_eig: matrix is not Hermitian within tolerance");
  Eigen::SelfAdjointEigenSolver<Matrix> es(herm_part(a));
  if (es.info() != Eigen::Success)
    throw std::runtime_error("herm_eig: eigensolver did not converge");
  return {es.eigenvalues(), es.eigenvectors()};
}

// f applied to the spectrum of a Hermitian matrix; the result is not
// Hermitian unless f is real-valued.
inline Matrix mat_func(const Matrix& a, const std::function<Complex(double)>& f) {
  HermEig e = herm_eig(a);
  Vector d(e.eigenvalues.size());
  for (Index i = 0; i < d.size(); ++i) {
    d(i) = f(e.eigenvalues(i));
    if (!std::isfinite(d(i).real()) || !std::isfinite(d(i).imag()))
      throw std::invalid_argument("mat_func: function is not finite on the spectrum");
  }
  return e.eigenvectors * d.asDiagonal() * e.eigenvectors.adjoint();
}

// ---- tensor operations ----

inline Matrix kron(const Matrix& a, const Matrix& b) {
  return Eigen::kroneckerProduct(a, b);
}

enum class Side { First, Second };

// Traces out one factor of a matrix on an n (x) m bipartite space.
// partial_trace(kron(a, b), Side::Second, n, m) == a * b.trace().
inline Matrix partial_trace(const Matrix& x, Side traced, Index n, Index m) {
  if (x.rows() != n * m || x.cols() != n * m)
    throw std::invalid_argument("partial_trace: size does not match factor dimensions");
  if (traced == Side::First) {
    Matrix r = Matrix::Zero(m, m);
    for (Index i = 0; i < n; ++i) r += x.block(i * m, i * m, m, m);
    return r;
  }
  Matrix r = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) r(i, j) = x.block(i * m, j * m, m, m).trace();
  return r;
}

// ---- vec / unvec ----
// Row-major stacking, fixed so that kron(a, b) * vec(c) = vec(a * c * b^T).

inline Vector vec(const Matrix& c) {
  Vector v(c.rows() * c.cols());
  for (Index i = 0; i < c.rows(); ++i)
    for (Index j = 0; j < c.cols(); ++j) v(i * c.cols() + j) = c(i, j);
  return v;
}

inline Matrix unvec(const Vector& v, Index rows, Index cols) {
  if (v.size() != rows * cols)
    throw std::invalid_argument("unvec: vector length does not match target shape");
  Matrix c(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) c(i, j) = v(i * cols + j);
  return c;
}

// ---- positive semidefinite projection ----

// Nearest PSD matrix in Frobenius norm: symmetrize and clip negative
// eigenvalues at zero.
inline Matrix psd_project(const Matrix& a) {
  HermEig e = herm_eig(a);
  RealVector d = e.eigenvalues.cwiseMax(0.0);
  return e.eigenvectors * d.asDiagonal() * e.eigenvectors.adjoint();
}

// ---- real coordinates on the Hermitian matrices ----
// Isometric chart R^{N^2} <-> Herm(N): diagonal entries first, then
// sqrt(2)-scaled real and imaginary parts of the upper triangle, so that
// <hvec(a), hvec(b)> = Tr(a b) for Hermitian a, b.

inline Index hvec_dim(Index n) { return n * n; }

inline RealVector hvec(const Matrix& a) {
  require_square(a, "hvec");
  const Index n = a.rows();
  RealVector x(n * n);
  for (Index i = 0; i < n; ++i) x(i) = a(i, i).real();
  Index p = n;
  const double s = std::sqrt(2.0);
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j) {
      x(p++) = s * a(i, j).real();
      x(p++) = s * a(i, j).imag();
    }
  return x;
}

inline Matrix hunvec(const RealVector& x, Index n) {
  if (x.size() != n * n)
    throw std::invalid_argument("hunvec: vector length does not match dimension");
  Matrix a(n, n);
  for (Index i = 0; i < n; ++i) a(i, i) = x(i);
  Index p = n;
  const double s = 1.0 / std::sqrt(2.0);
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j) {
      double re = x(p++) * s;
      double im = x(p++) * s;
      a(i, j) = Complex(re, im);
      a(j, i) = Complex(re, -im);
    }
  return a;
}

}  // namespace ncw
