#pragma once

// First-order forward-mode dual numbers, recursively nestable to reach any
// derivative order.  Dual<double> carries one gradient level; Dual<Dual<double>>
// carries two, and so on.  The partial vector may be empty, which is treated as
// an exact zero gradient (constants stay cheap no matter how deep the nesting).

#include <cmath>
#include <cstddef>
#include <type_traits>
#include <utility>
#include <vector>

namespace finsler {

template <class S>
struct Dual {
  S v{};
  std::vector<S> d;  // empty <=> all partials are zero

  Dual() = default;
  Dual(double x) : v(x) {}  // NOLINT: implicit promotion of constants
  template <class U = S, class = std::enable_if_t<!std::is_same_v<U, double>>>
  explicit Dual(S value) : v(std::move(value)) {}
  Dual(S value, std::vector<S> deriv) : v(std::move(value)), d(std::move(deriv)) {}
};

inline double value_of(double x) { return x; }
template <class S>
double value_of(const Dual<S>& x) {
  return value_of(x.v);
}

namespace detail {

// Apply op(a_i, b_i) over partial vectors, treating an empty vector as zeros.
template <class S, class Op>
std::vector<S> zip_partials(const std::vector<S>& a, const std::vector<S>& b, Op op) {
  if (a.empty() && b.empty()) return {};
  const std::size_t n = a.empty() ? b.size() : a.size();
  std::vector<S> r(n);
  for (std::size_t i = 0; i < n; ++i) {
    const S& ai = a.empty() ? S(0.0) : a[i];
    const S& bi = b.empty() ? S(0.0) : b[i];
    r[i] = op(ai, bi);
  }
  return r;
}

template <class S, class Op>
std::vector<S> map_partials(const std::vector<S>& a, Op op) {
  std::vector<S> r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = op(a[i]);
  return r;
}

}  // namespace detail

// ---- arithmetic -----------------------------------------------------------

template <class S>
Dual<S> operator+(const Dual<S>& a, const Dual<S>& b) {
  return {a.v + b.v, detail::zip_partials(a.d, b.d, [](const S& x, const S& y) { return x + y; })};
}
template <class S>
Dual<S> operator-(const Dual<S>& a, const Dual<S>& b) {
  return {a.v - b.v, detail::zip_partials(a.d, b.d, [](const S& x, const S& y) { return x - y; })};
}
template <class S>
Dual<S> operator-(const Dual<S>& a) {
  return {-a.v, detail::map_partials(a.d, [](const S& x) { return -x; })};
}
template <class S>
Dual<S> operator*(const Dual<S>& a, const Dual<S>& b) {
  std::vector<S> d;
  if (!a.d.empty() || !b.d.empty()) {
    const std::size_t n = a.d.empty() ? b.d.size() : a.d.size();
    d.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (a.d.empty())
        d[i] = a.v * b.d[i];
      else if (b.d.empty())
        d[i] = a.d[i] * b.v;
      else
        d[i] = a.d[i] * b.v + a.v * b.d[i];
    }
  }
  return {a.v * b.v, std::move(d)};
}
template <class S>
Dual<S> operator/(const Dual<S>& a, const Dual<S>& b) {
  const S inv = S(1.0) / b.v;
  const S q = a.v * inv;
  std::vector<S> d;
  if (!a.d.empty() || !b.d.empty()) {
    const std::size_t n = a.d.empty() ? b.d.size() : a.d.size();
    d.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const S ai = a.d.empty() ? S(0.0) : a.d[i];
      const S bi = b.d.empty() ? S(0.0) : b.d[i];
      d[i] = (ai - q * bi) * inv;
    }
  }
  return {q, std::move(d)};
}

// mixed double ops
template <class S>
Dual<S> operator+(const Dual<S>& a, double b) {
  return {a.v + b, a.d};
}
template <class S>
Dual<S> operator+(double a, const Dual<S>& b) {
  return b + a;
}
template <class S>
Dual<S> operator-(const Dual<S>& a, double b) {
  return {a.v - b, a.d};
}
template <class S>
Dual<S> operator-(double a, const Dual<S>& b) {
  return {a - b.v, detail::map_partials(b.d, [](const S& x) { return -x; })};
}
template <class S>
Dual<S> operator*(const Dual<S>& a, double b) {
  return {a.v * b, detail::map_partials(a.d, [b](const S& x) { return x * b; })};
}
template <class S>
Dual<S> operator*(double a, const Dual<S>& b) {
  return b * a;
}
template <class S>
Dual<S> operator/(const Dual<S>& a, double b) {
  return a * (1.0 / b);
}
template <class S>
Dual<S> operator/(double a, const Dual<S>& b) {
  return Dual<S>(a) / b;
}

template <class S>
Dual<S>& operator+=(Dual<S>& a, const Dual<S>& b) {
  a = a + b;
  return a;
}
template <class S>
Dual<S>& operator-=(Dual<S>& a, const Dual<S>& b) {
  a = a - b;
  return a;
}
template <class S>
Dual<S>& operator*=(Dual<S>& a, const Dual<S>& b) {
  a = a * b;
  return a;
}
template <class S>
Dual<S>& operator/=(Dual<S>& a, const Dual<S>& b) {
  a = a / b;
  return a;
}
template <class S>
Dual<S>& operator+=(Dual<S>& a, double b) {
  a.v = a.v + b;
  return a;
}
template <class S>
Dual<S>& operator*=(Dual<S>& a, double b) {
  a = a * b;
  return a;
}

// value-part comparisons: used for pivoting and branch decisions only
template <class S>
bool operator<(const Dual<S>& a, const Dual<S>& b) {
  return value_of(a) < value_of(b);
}
template <class S>
bool operator<(const Dual<S>& a, double b) {
  return value_of(a) < b;
}
template <class S>
bool operator>(const Dual<S>& a, double b) {
  return value_of(a) > b;
}
template <class S>
bool operator<(double a, const Dual<S>& b) {
  return a < value_of(b);
}
template <class S>
bool operator>(double a, const Dual<S>& b) {
  return a > value_of(b);
}

// ---- elementary functions (chain rule f(x) = {f(v), f'(v) * d}) -----------

namespace detail {
template <class S>
Dual<S> chain(const Dual<S>& x, S fv, S dfv) {
  return {std::move(fv), map_partials(x.d, [&dfv](const S& t) { return dfv * t; })};
}
}  // namespace detail

using std::cos;
using std::cosh;
using std::exp;
using std::log;
using std::pow;
using std::sin;
using std::sinh;
using std::sqrt;
using std::tan;
using std::tanh;

template <class S>
Dual<S> sin(const Dual<S>& x) {
  return detail::chain(x, sin(x.v), cos(x.v));
}
template <class S>
Dual<S> cos(const Dual<S>& x) {
  return detail::chain(x, cos(x.v), -sin(x.v));
}
template <class S>
Dual<S> tan(const Dual<S>& x) {
  const S t = tan(x.v);
  return detail::chain(x, t, S(1.0) + t * t);
}
template <class S>
Dual<S> exp(const Dual<S>& x) {
  const S e = exp(x.v);
  return detail::chain(x, e, e);
}
template <class S>
Dual<S> log(const Dual<S>& x) {
  return detail::chain(x, log(x.v), S(1.0) / x.v);
}
template <class S>
Dual<S> sqrt(const Dual<S>& x) {
  const S r = sqrt(x.v);
  return detail::chain(x, r, S(0.5) / r);
}
template <class S>
Dual<S> sinh(const Dual<S>& x) {
  return detail::chain(x, sinh(x.v), cosh(x.v));
}
template <class S>
Dual<S> cosh(const Dual<S>& x) {
  return detail::chain(x, cosh(x.v), sinh(x.v));
}
template <class S>
Dual<S> tanh(const Dual<S>& x) {
  const S t = tanh(x.v);
  return detail::chain(x, t, S(1.0) - t * t);
}
template <class S>
Dual<S> pow(const Dual<S>& x, double p) {
  return detail::chain(x, pow(x.v, p), p * pow(x.v, p - 1.0));
}
template <class S>
Dual<S> pow(const Dual<S>& x, const Dual<S>& p) {
  // x^p = exp(p log x); x must be positive when p carries derivatives
  return exp(p * log(x));
}

inline double sech(double x) { return 1.0 / std::cosh(x); }
template <class S>
Dual<S> sech(const Dual<S>& x) {
  const S c = cosh(x.v);
  const S s = S(1.0) / c;
  return detail::chain(x, s, -s * tanh(x.v));
}

using std::abs;
template <class S>
Dual<S> abs(const Dual<S>& x) {
  return value_of(x) < 0.0 ? -x : x;
}

// sign of the value part, propagated as a constant
inline double sign_of(double x) { return x < 0.0 ? -1.0 : 1.0; }
template <class S>
double sign_of(const Dual<S>& x) {
  return value_of(x) < 0.0 ? -1.0 : 1.0;
}

// Standard nesting aliases.  D1 differentiates once, D2 twice, etc.
using D1 = Dual<double>;
using D2 = Dual<D1>;
using D3 = Dual<D2>;
using D4 = Dual<D3>;
using D5 = Dual<D4>;
using D6 = Dual<D5>;

template <class T>
struct dual_depth : std::integral_constant<int, 0> {};
template <class S>
struct dual_depth<Dual<S>> : std::integral_constant<int, 1 + dual_depth<S>::value> {};
template <class T>
inline constexpr int dual_depth_v = dual_depth<T>::value;

// Seed coordinates for one derivative level: returns Dual<S> coordinates whose
// partial i is the unit direction e_i.
template <class S>
std::vector<Dual<S>> seed(const std::vector<S>& u) {
  const std::size_t n = u.size();
  std::vector<Dual<S>> r(n);
  for (std::size_t i = 0; i < n; ++i) {
    r[i].v = u[i];
    r[i].d.assign(n, S(0.0));
    r[i].d[i] = S(1.0);
  }
  return r;
}

}  // namespace finsler
