#pragma once

// 1-d quadrature: an adaptive Simpson rule for plain double integrands (with
// error estimate and failure signalling), and a fixed composite Gauss-Legendre
// rule that works for dual-valued integrands and dual endpoints so integrals
// inside generated metric coefficients stay differentiable.

#include <cmath>
#include <functional>
#include <stdexcept>

#include "finsler_forge/dual.hpp"

namespace finsler {

struct QuadratureError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct QuadResult {
  double value = 0.0;
  double error_estimate = 0.0;
};

namespace detail {

inline double simpson(const std::function<double(double)>& f, double a, double b, double fa,
                      double fm, double fb) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

inline double adaptive_step(const std::function<double(double)>& f, double a, double b, double fa,
                            double fm, double fb, double whole, double tol, int depth,
                            double* err_acc) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = simpson(f, a, m, fa, flm, fm);
  const double right = simpson(f, m, b, fm, frm, fb);
  const double delta = left + right - whole;
  if (depth <= 0) throw QuadratureError("quad_1d: recursion depth exhausted");
  if (std::abs(delta) <= 15.0 * tol) {
    *err_acc += std::abs(delta) / 15.0;
    return left + right + delta / 15.0;
  }
  return adaptive_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, err_acc) +
         adaptive_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, err_acc);
}

}  // namespace detail

inline QuadResult quad_1d(const std::function<double(double)>& f, double a, double b,
                          double tol = 1e-10, int max_depth = 48) {
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  const double whole = detail::simpson(f, a, b, fa, fm, fb);
  QuadResult r;
  r.value = detail::adaptive_step(f, a, b, fa, fm, fb, whole, tol, max_depth, &r.error_estimate);
  return r;
}

// 10-point Gauss-Legendre nodes/weights on [-1, 1].
inline const double* gl10_nodes() {
  static const double x[10] = {-0.9739065285171717, -0.8650633666889845, -0.6794095682990244,
                               -0.4333953941292472, -0.1488743389816312, 0.1488743389816312,
                               0.4333953941292472,  0.6794095682990244,  0.8650633666889845,
                               0.9739065285171717};
  return x;
}
inline const double* gl10_weights() {
  static const double w[10] = {0.0666713443086881, 0.1494513491505806, 0.2190863625159820,
                               0.2692667193099963, 0.2955242247147529, 0.2955242247147529,
                               0.2692667193099963, 0.2190863625159820, 0.1494513491505806,
                               0.0666713443086881};
  return w;
}

// Integral of f over [0, v] for a possibly dual upper limit v, via the change
// of variables t = v*s.  Panel count is fixed so the result is smooth in any
// parameters the integrand carries.
template <class T, class F>
T integral_0_to(const F& f, const T& v, int panels = 24) {
  const double* xs = gl10_nodes();
  const double* ws = gl10_weights();
  T acc(0.0);
  for (int p = 0; p < panels; ++p) {
    const double s0 = static_cast<double>(p) / panels;
    const double s1 = static_cast<double>(p + 1) / panels;
    const double half = 0.5 * (s1 - s0);
    const double mid = 0.5 * (s0 + s1);
    for (int k = 0; k < 10; ++k) {
      const double s = mid + half * xs[k];
      acc = acc + (ws[k] * half) * f(v * s);
    }
  }
  return acc * v;
}

}  // namespace finsler
