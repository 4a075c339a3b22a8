#pragma once

// Small dense matrix kernels that work for any dual scalar type, plus
// double-precision wrappers around Eigen for the public API.

#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "finsler_forge/dual.hpp"

namespace finsler {

struct SingularMatrixError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Row-major dense matrix over an arbitrary scalar.
template <class T>
struct Mat {
  int n = 0, m = 0;
  std::vector<T> a;

  Mat() = default;
  Mat(int rows, int cols) : n(rows), m(cols), a(static_cast<std::size_t>(rows) * cols, T(0.0)) {}
  T& operator()(int i, int j) { return a[static_cast<std::size_t>(i) * m + j]; }
  const T& operator()(int i, int j) const { return a[static_cast<std::size_t>(i) * m + j]; }
};

// Gauss-Jordan inverse with partial pivoting on the value part.  Returns the
// inverse; det_out (optional) receives the determinant.  Works for indefinite
// matrices; throws SingularMatrixError when a pivot degenerates.
template <class T>
Mat<T> invert(Mat<T> a, T* det_out = nullptr, double degenerate_tol = 1e-12) {
  const int n = a.n;
  Mat<T> inv(n, n);
  for (int i = 0; i < n; ++i) inv(i, i) = T(1.0);
  T det = T(1.0);
  double scale = 0.0;
  for (const T& x : a.a) scale = std::max(scale, std::abs(value_of(x)));
  if (scale == 0.0) throw SingularMatrixError("invert: zero matrix");

  for (int col = 0; col < n; ++col) {
    int piv = col;
    double best = std::abs(value_of(a(col, col)));
    for (int r = col + 1; r < n; ++r) {
      const double cand = std::abs(value_of(a(r, col)));
      if (cand > best) {
        best = cand;
        piv = r;
      }
    }
    if (best <= degenerate_tol * scale)
      throw SingularMatrixError("invert: matrix numerically degenerate");
    if (piv != col) {
      for (int j = 0; j < n; ++j) {
        std::swap(a(piv, j), a(col, j));
        std::swap(inv(piv, j), inv(col, j));
      }
      det = -det;
    }
    const T p = a(col, col);
    det = det * p;
    const T ip = T(1.0) / p;
    for (int j = 0; j < n; ++j) {
      a(col, j) = a(col, j) * ip;
      inv(col, j) = inv(col, j) * ip;
    }
    for (int r = 0; r < n; ++r) {
      if (r == col) continue;
      const T f = a(r, col);
      if (value_of(f) == 0.0 && f.d.empty()) continue;
      for (int j = 0; j < n; ++j) {
        a(r, j) = a(r, j) - f * a(col, j);
        inv(r, j) = inv(r, j) - f * inv(col, j);
      }
    }
  }
  if (det_out) *det_out = det;
  return inv;
}

// double specialisation needs no `.d` member access
template <>
inline Mat<double> invert(Mat<double> a, double* det_out, double degenerate_tol) {
  const int n = a.n;
  Eigen::MatrixXd m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = a(i, j);
  Eigen::FullPivLU<Eigen::MatrixXd> lu(m);
  const double scale = m.cwiseAbs().maxCoeff();
  if (scale == 0.0 || std::abs(lu.determinant()) <= degenerate_tol * std::pow(scale, n))
    throw SingularMatrixError("invert: matrix numerically degenerate");
  const Eigen::MatrixXd inv = lu.inverse();
  Mat<double> r(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) r(i, j) = inv(i, j);
  if (det_out) *det_out = lu.determinant();
  return r;
}

// Public symmetric inverse on Eigen types.  Uses a fully pivoted factorisation
// so indefinite (Lorentzian-signature) matrices are handled; throws on
// numerically degenerate input.
inline Eigen::MatrixXd invert_symmetric(const Eigen::MatrixXd& m, double degenerate_tol = 1e-12) {
  Eigen::FullPivLU<Eigen::MatrixXd> lu(m);
  const double scale = m.cwiseAbs().maxCoeff();
  const int n = static_cast<int>(m.rows());
  if (scale == 0.0 || std::abs(lu.determinant()) <= degenerate_tol * std::pow(scale, n))
    throw SingularMatrixError("invert_symmetric: matrix numerically degenerate");
  return lu.inverse();
}

}  // namespace finsler
