#pragma once

// Finsler generating functions F^2(x, y) on a tangent bundle of base
// dimension n (total coordinates u = (x, y), dim 2n), with the derived
// objects: Hessian metric, semi-spray, Cartan N-connection, Sasaki lift,
// osculation and the nonlinear dispersion relation.

#include <cmath>
#include <memory>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "finsler_forge/dual.hpp"
#include "finsler_forge/field.hpp"
#include "finsler_forge/linalg.hpp"
#include "finsler_forge/nholon.hpp"

namespace finsler {

struct FinslerDomainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

struct F2Concept {
  virtual ~F2Concept() = default;
  virtual double call(std::span<const double> u) const = 0;
  virtual D1 call(std::span<const D1> u) const = 0;
  virtual D2 call(std::span<const D2> u) const = 0;
  virtual D3 call(std::span<const D3> u) const = 0;
  virtual D4 call(std::span<const D4> u) const = 0;
  virtual D5 call(std::span<const D5> u) const = 0;
  virtual D6 call(std::span<const D6> u) const = 0;
};

template <class F>
struct F2Model final : F2Concept {
  F f;
  explicit F2Model(F fn) : f(std::move(fn)) {}
  double call(std::span<const double> u) const override { return f(u); }
  D1 call(std::span<const D1> u) const override { return f(u); }
  D2 call(std::span<const D2> u) const override { return f(u); }
  D3 call(std::span<const D3> u) const override { return f(u); }
  D4 call(std::span<const D4> u) const override { return f(u); }
  D5 call(std::span<const D5> u) const override { return f(u); }
  D6 call(std::span<const D6> u) const override { return f(u); }
};

}  // namespace detail

class FinslerFunction {
 public:
  FinslerFunction() = default;
  FinslerFunction(int n, std::shared_ptr<const detail::F2Concept> impl)
      : n_(n), impl_(std::move(impl)) {}

  int n() const { return n_; }  // base dimension; argument dimension is 2n

  template <class T>
  T f2(std::span<const T> u) const {
    return impl_->call(u);
  }
  template <class T>
  T f2(const std::vector<T>& u) const {
    return impl_->call(std::span<const T>(u.data(), u.size()));
  }

 private:
  int n_ = 0;
  std::shared_ptr<const detail::F2Concept> impl_;
};

template <class F>
FinslerFunction make_finsler(int n, F f) {
  return FinslerFunction(n, std::make_shared<detail::F2Model<F>>(std::move(f)));
}

// ---- Hessian metric  g_ab = 1/2 d^2 F^2 / dy^a dy^b -----------------------

template <class T>
Mat<T> hessian_metric_t(const FinslerFunction& fin, std::span<const T> u) {
  const int n = fin.n();
  std::vector<Dual<Dual<T>>> su(static_cast<std::size_t>(2 * n));
  for (int i = 0; i < 2 * n; ++i) su[static_cast<std::size_t>(i)].v.v = u[static_cast<std::size_t>(i)];
  for (int a = 0; a < n; ++a) {
    auto& c = su[static_cast<std::size_t>(n + a)];
    c.v.d.assign(static_cast<std::size_t>(n), T(0.0));
    c.v.d[static_cast<std::size_t>(a)] = T(1.0);
    c.d.assign(static_cast<std::size_t>(n), Dual<T>(T(0.0)));
    c.d[static_cast<std::size_t>(a)] = Dual<T>(T(1.0));
  }
  const Dual<Dual<T>> r = fin.f2(su);
  Mat<T> g(n, n);
  for (int a = 0; a < n; ++a) {
    if (r.d.empty()) break;
    const Dual<T>& ra = r.d[static_cast<std::size_t>(a)];
    if (ra.d.empty()) continue;
    for (int b = 0; b < n; ++b) g(a, b) = 0.5 * ra.d[static_cast<std::size_t>(b)];
  }
  // enforce exact symmetry
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b) {
      const T s = 0.5 * (g(a, b) + g(b, a));
      g(a, b) = s;
      g(b, a) = s;
    }
  return g;
}

inline Eigen::MatrixXd hessian_metric(const FinslerFunction& fin, const Eigen::VectorXd& u) {
  const auto su = to_std(u);
  const auto g = hessian_metric_t(fin, std::span<const double>(su.data(), su.size()));
  Eigen::MatrixXd out(g.n, g.m);
  for (int i = 0; i < g.n; ++i)
    for (int j = 0; j < g.m; ++j) out(i, j) = g(i, j);
  return out;
}

// ---- semi-spray and Cartan N-connection -----------------------------------

// G^a = 1/4 g^{ab} ( d^2 L / dy^b dx^k  y^k - dL/dx^a-index ), L = F^2.
template <class T>
std::vector<T> semispray_t(const FinslerFunction& fin, std::span<const T> u) {
  const int n = fin.n();
  // one nested evaluation over all 2n coordinates gives L_x and L_yx
  std::vector<Dual<Dual<T>>> su(static_cast<std::size_t>(2 * n));
  for (int mu = 0; mu < 2 * n; ++mu) {
    auto& c = su[static_cast<std::size_t>(mu)];
    c.v.v = u[static_cast<std::size_t>(mu)];
    c.v.d.assign(static_cast<std::size_t>(2 * n), T(0.0));
    c.v.d[static_cast<std::size_t>(mu)] = T(1.0);
    c.d.assign(static_cast<std::size_t>(2 * n), Dual<T>(T(0.0)));
    c.d[static_cast<std::size_t>(mu)] = Dual<T>(T(1.0));
  }
  const Dual<Dual<T>> r = fin.f2(su);
  Mat<T> Lyx(n, n);  // (a, k) = d^2 L / dy^a dx^k
  Mat<T> g(n, n);
  std::vector<T> Lx(static_cast<std::size_t>(n), T(0.0));
  for (int i = 0; i < n; ++i)
    if (!r.v.d.empty()) Lx[static_cast<std::size_t>(i)] = r.v.d[static_cast<std::size_t>(i)];
  for (int a = 0; a < n; ++a) {
    const Dual<T>& ra = r.d[static_cast<std::size_t>(n + a)];
    if (ra.d.empty()) continue;
    for (int k = 0; k < n; ++k) {
      Lyx(a, k) = ra.d[static_cast<std::size_t>(k)];
      g(a, k) = 0.5 * ra.d[static_cast<std::size_t>(n + k)];
    }
  }
  const Mat<T> ginv = invert(g);
  std::vector<T> G(static_cast<std::size_t>(n), T(0.0));
  for (int a = 0; a < n; ++a) {
    T acc(0.0);
    for (int i = 0; i < n; ++i) {
      T s(0.0);
      for (int k = 0; k < n; ++k) s = s + Lyx(i, k) * u[static_cast<std::size_t>(n + k)];
      acc = acc + ginv(a, i) * (s - Lx[static_cast<std::size_t>(i)]);
    }
    G[static_cast<std::size_t>(a)] = 0.25 * acc;
  }
  return G;
}

// Cartan N-connection N_k^a = dG^a / dy^k, by one more dual level over the
// full semi-spray evaluation.
template <class T>
Mat<T> cartan_nconnection_t(const FinslerFunction& fin, std::span<const T> u) {
  const int n = fin.n();
  std::vector<Dual<T>> su(static_cast<std::size_t>(2 * n));
  for (int mu = 0; mu < 2 * n; ++mu) su[static_cast<std::size_t>(mu)].v = u[static_cast<std::size_t>(mu)];
  for (int k = 0; k < n; ++k) {
    su[static_cast<std::size_t>(n + k)].d.assign(static_cast<std::size_t>(n), T(0.0));
    su[static_cast<std::size_t>(n + k)].d[static_cast<std::size_t>(k)] = T(1.0);
  }
  const auto G = semispray_t(fin, std::span<const Dual<T>>(su.data(), su.size()));
  Mat<T> N(n, n);  // (k, a)
  for (int k = 0; k < n; ++k)
    for (int a = 0; a < n; ++a)
      if (!G[static_cast<std::size_t>(a)].d.empty())
        N(k, a) = G[static_cast<std::size_t>(a)].d[static_cast<std::size_t>(k)];
  return N;
}

inline std::vector<double> semispray(const FinslerFunction& fin, const Eigen::VectorXd& u) {
  const auto su = to_std(u);
  return semispray_t(fin, std::span<const double>(su.data(), su.size()));
}

inline Eigen::MatrixXd cartan_nconnection(const FinslerFunction& fin, const Eigen::VectorXd& u) {
  const auto su = to_std(u);
  const auto N = cartan_nconnection_t(fin, std::span<const double>(su.data(), su.size()));
  Eigen::MatrixXd out(N.n, N.m);
  for (int i = 0; i < N.n; ++i)
    for (int j = 0; j < N.m; ++j) out(i, j) = N(i, j);
  return out;
}

// ---- Sasaki lift -----------------------------------------------------------

// d-metric on TM: g_ij = h_ab = F-Hessian, N = Cartan N-connection.
inline DMetric sasaki_lift(const FinslerFunction& fin) {
  const int n = fin.n();
  DMetric dm = DMetric::single_shell(n, n);
  // Depth guard: the Hessian needs two extra dual levels over the evaluation
  // scalar and the N-connection three, so these closures support evaluation
  // depths that keep the generating function within its own depth ceiling.
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      auto fld = make_field(2 * n, [fin, i, j](auto u) {
        using T = std::decay_t<decltype(u[0])>;
        if constexpr (dual_depth_v<T> <= 4) {
          const auto H = hessian_metric_t(fin, u);
          return H(i, j);
        } else {
          throw std::logic_error("sasaki_lift: evaluation depth not supported");
          return T(0.0);
        }
      });
      dm.g[static_cast<std::size_t>(i) * n + j] = fld;
      dm.h[0][static_cast<std::size_t>(i) * n + j] = fld;
    }
  for (int k = 0; k < n; ++k)
    for (int a = 0; a < n; ++a)
      dm.N[0][static_cast<std::size_t>(k) * n + a] = make_field(2 * n, [fin, k, a](auto u) {
        using T = std::decay_t<decltype(u[0])>;
        if constexpr (dual_depth_v<T> <= 3) {
          const auto N = cartan_nconnection_t(fin, u);
          return N(k, a);
        } else {
          throw std::logic_error("sasaki_lift: evaluation depth not supported");
          return T(0.0);
        }
      });
  return dm;
}

// ---- osculation ------------------------------------------------------------

// Pull back the Hessian metric along a reference section y^a(x): fields over x.
inline std::vector<ScalarField> osculate(const FinslerFunction& fin,
                                         const std::vector<ScalarField>& section) {
  const int n = fin.n();
  std::vector<ScalarField> out(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      out[static_cast<std::size_t>(i) * n + j] = make_field(n, [fin, section, i, j, n](auto u) {
        using T = std::decay_t<decltype(u[0])>;
        if constexpr (dual_depth_v<T> <= 4) {
          std::vector<T> w(static_cast<std::size_t>(2 * n));
          for (int k = 0; k < n; ++k) w[static_cast<std::size_t>(k)] = u[k];
          for (int a = 0; a < n; ++a)
            w[static_cast<std::size_t>(n + a)] = section[static_cast<std::size_t>(a)](u);
          const auto H = hessian_metric_t(fin, std::span<const T>(w.data(), w.size()));
          return H(i, j);
        } else {
          throw std::logic_error("osculate: evaluation depth not supported");
          return T(0.0);
        }
      });
  return out;
}

// ---- builtin generating functions -----------------------------------------

// Convention: eta = diag(+, -, -, -) (resolved sign convention); direction
// vectors are supplied with upper indices and lowered with the metric.

inline FinslerFunction minkowski_quadratic() {
  return make_finsler(4, [](auto u) {
    using T = std::decay_t<decltype(u[0])>;
    T q = u[4] * u[4];
    for (int k = 1; k < 4; ++k) q = q - u[4 + k] * u[4 + k];
    return q;
  });
}

inline FinslerFunction riemann_quadratic(int n, std::vector<ScalarField> g_of_x) {
  return make_finsler(n, [n, g_of_x](auto u) {
    using T = std::decay_t<decltype(u[0])>;
    std::vector<T> x(u.begin(), u.begin() + n);
    T q(0.0);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        q = q + g_of_x[static_cast<std::size_t>(i) * n + j](x) * u[n + i] * u[n + j];
    return q;
  });
}

// F = (eta y y)^{(1-b)/2} (n_k y^k)^b with n_k = eta_{ki} n^i;
// F^2 = |eta y y|^{1-b} |n y|^{2b} carrying the sign of (eta y y).
inline FinslerFunction bogoslovsky(double b, const Eigen::Vector4d& n_up) {
  const Eigen::Vector4d eta(1.0, -1.0, -1.0, -1.0);
  const Eigen::Vector4d n_low = eta.cwiseProduct(n_up);
  return make_finsler(4, [b, n_low](auto u) {
    using T = std::decay_t<decltype(u[0])>;
    T q = u[4] * u[4];
    for (int k = 1; k < 4; ++k) q = q - u[4 + k] * u[4 + k];
    T ny(0.0);
    for (int k = 0; k < 4; ++k) ny = ny + n_low[k] * u[4 + k];
    if (value_of(q) == 0.0 || value_of(ny) == 0.0)
      throw FinslerDomainError("bogoslovsky: generating form vanishes at this y");
    const double s = sign_of(q);
    return s * pow(abs(q), 1.0 - b) * pow(abs(ny), 2.0 * b);
  });
}

inline FinslerFunction bogoslovsky_general(int n, ScalarField b_of_x,
                                           std::vector<ScalarField> g_of_x,
                                           std::vector<ScalarField> n_low_of_x) {
  return make_finsler(n, [n, b_of_x, g_of_x, n_low_of_x](auto u) {
    using T = std::decay_t<decltype(u[0])>;
    std::vector<T> x(u.begin(), u.begin() + n);
    T q(0.0);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        q = q + g_of_x[static_cast<std::size_t>(i) * n + j](x) * u[n + i] * u[n + j];
    T ny(0.0);
    for (int k = 0; k < n; ++k) ny = ny + n_low_of_x[static_cast<std::size_t>(k)](x) * u[n + k];
    if (value_of(q) == 0.0 || value_of(ny) == 0.0)
      throw FinslerDomainError("bogoslovsky_general: generating form vanishes at this y");
    const T b = b_of_x(x);
    const double s = sign_of(q);
    return s * pow(abs(q), 1.0 - b) * pow(abs(ny), 2.0 * b);
  });
}

// One monomial of the deformation tensor q: 2r spatial indices and a weight.
struct DeformTerm {
  std::vector<int> idx;  // spatial indices, 0-based, size 2r
  double coeff = 0.0;
};

// F^2 = [-(y^0)^2 if with_time] + Q (1 + (1/r) q_{i1..i2r} y^{i1}..y^{i2r} / Q^r),
// Q = ghat_ij y^i y^j over the spatial block.
inline FinslerFunction deformed(int r, const Eigen::MatrixXd& ghat,
                                std::vector<DeformTerm> q, bool with_time = false) {
  const int p = static_cast<int>(ghat.rows());
  const int n = p + (with_time ? 1 : 0);
  return make_finsler(n, [r, ghat, q, p, n, with_time](auto u) {
    using T = std::decay_t<decltype(u[0])>;
    const int y0 = n;          // start of fiber coordinates
    const int ys = y0 + (with_time ? 1 : 0);  // start of spatial fiber coords
    T Q(0.0);
    for (int i = 0; i < p; ++i)
      for (int j = 0; j < p; ++j) Q = Q + ghat(i, j) * u[ys + i] * u[ys + j];
    T corr(0.0);
    for (const auto& t : q) {
      T mono(t.coeff);
      for (int id : t.idx) mono = mono * u[ys + id];
      corr = corr + mono;
    }
    T f2 = Q + (1.0 / r) * corr / pow(Q, static_cast<double>(r - 1));
    if (with_time) f2 = f2 - u[y0] * u[y0];
    return f2;
  });
}

// ---- dispersion ------------------------------------------------------------

struct DispersionParams {
  double c = 1.0;
  int r = 1;
  Eigen::MatrixXd g;            // spatial metric at the fixed point
  std::vector<DeformTerm> q;    // 2r-index deformation coefficients
  bool linear_bracket = false;  // use [g k k] unsquared (documented variant)
};

inline double dispersion_omega2(const DispersionParams& p, const Eigen::VectorXd& k) {
  const double gkk = k.dot(p.g * k);
  double qk = 0.0;
  for (const auto& t : p.q) {
    double mono = t.coeff;
    for (int id : t.idx) mono *= k[id];
    qk += mono;
  }
  const double bracket = p.linear_bracket ? gkk : gkk * gkk;
  const double denom = p.linear_bracket ? std::pow(gkk, p.r) : std::pow(gkk, 2 * p.r);
  return p.c * p.c * bracket * (1.0 - (1.0 / p.r) * qk / denom);
}

}  // namespace finsler
