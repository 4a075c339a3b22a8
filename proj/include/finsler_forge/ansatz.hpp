#pragma once

// Exact-solution generators and field-equation residual evaluators for
// separable d-metric ansatz classes: the 2+2 separated system (canonical and
// h-v connections), its three-shell 8-d extension, the generating-function
// solution family, an off-diagonal 4-d cosmological deformation and a small
// solitonic 8-d deformation of a doubled FRW metric.

#include <array>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "finsler_forge/dconn.hpp"
#include "finsler_forge/dcurv.hpp"
#include "finsler_forge/field.hpp"
#include "finsler_forge/nholon.hpp"
#include "finsler_forge/quadrature.hpp"

namespace finsler {

struct AnsatzError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ShapeError : AnsatzError {
  using AnsatzError::AnsatzError;
};
struct SolverError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Diagonal source blocks, one value per shell pair.  Invalid fields mean a
// vanishing source.  All fields are over the full coordinate tuple.
struct Source {
  ScalarField ups2;  // horizontal pair
  ScalarField ups4;  // first vertical shell
  ScalarField ups6;  // second vertical shell
  ScalarField ups8;  // third vertical shell
};

template <class T>
T source_value(const ScalarField& f, std::span<const T> u) {
  return f.valid() ? f(u) : T(0.0);
}

struct ResidualEntry {
  std::string equation;
  double max_abs = 0.0;
  Eigen::VectorXd argmax;
  int samples = 0;
};

struct ResidualReport {
  std::vector<ResidualEntry> entries;

  ResidualEntry& entry(const std::string& id) {
    for (auto& e : entries)
      if (e.equation == id) return e;
    entries.push_back(ResidualEntry{id, 0.0, Eigen::VectorXd(), 0});
    return entries.back();
  }
  const ResidualEntry* find(std::string_view id) const {
    for (const auto& e : entries)
      if (e.equation == id) return &e;
    return nullptr;
  }
  void record(const std::string& id, double r, const Eigen::VectorXd& u) {
    ResidualEntry& e = entry(id);
    const double a = std::abs(r);
    if (e.samples == 0 || a > e.max_abs) {
      e.max_abs = a;
      e.argmax = u;
    }
    ++e.samples;
  }
  double worst() const {
    double w = 0.0;
    for (const auto& e : entries) w = std::max(w, e.max_abs);
    return w;
  }
};

namespace detail {

// Nested single-direction partial derivative of a scalar field: one dual level
// per index in `idx` (applied right to left).  The instantiation depth is
// capped at the deepest supported dual scalar.
template <class T, class F>
T nested_partial_impl(const F& f, std::span<const T> u, std::span<const int> idx) {
  if (idx.empty()) return f(u);
  if constexpr (dual_depth_v<T> >= 6) {
    throw AnsatzError("nested_partial: derivative depth exhausted");
  } else {
    const int last = idx.back();
    const auto rest = idx.first(idx.size() - 1);
    return partial(
        [&](std::span<const Dual<T>> uu) { return nested_partial_impl<Dual<T>>(f, uu, rest); }, u,
        last);
  }
}

template <class T>
T nested_partial(const ScalarField& f, std::span<const T> u, std::initializer_list<int> idx) {
  const std::vector<int> iv(idx);
  return nested_partial_impl<T>([&f](auto uu) { return f(uu); }, u,
                                std::span<const int>(iv.data(), iv.size()));
}

inline void check_small(double x, double tol, const char* what) {
  if (std::abs(x) > tol) throw ShapeError(std::string("ansatz shape violated: ") + what);
}

}  // namespace detail

// ---- separated residuals for the 2+2 ansatz -------------------------------
//
// Metric shape: n = 2, one shell of dimension 2, diagonal blocks
// g = diag(g1(x), g2(x)), h = diag(h3(x,v), h4(x,v)), N-coefficients
// w_k(x,v) (first shell coordinate) and n_k(x,v) (second, Killing direction).
// The residuals are the closed-form field equations of this ansatz class,
// evaluated directly from coefficient jets (independent of the curvature
// pipeline).

inline ResidualReport residuals_separated(const DMetric& dm, ConnKind kind, const Source& src,
                                          const std::vector<Eigen::VectorXd>& points) {
  if (kind != ConnKind::canonical && kind != ConnKind::hv)
    throw AnsatzError("residuals_separated: connection kind must be canonical or hv");
  if (dm.n != 2 || dm.shell_count() != 1 || dm.m() != 2)
    throw ShapeError("residuals_separated: expected a 2+2 d-metric");

  ResidualReport rep;
  const double stol = 1e-9;
  for (const Eigen::VectorXd& u : points) {
    const Jet2 g1 = field_jet2(dm.g_at(0, 0), u);
    const Jet2 g2 = field_jet2(dm.g_at(1, 1), u);
    const Jet2 h3 = field_jet2(dm.h_at(0, 0, 0), u);
    const Jet2 h4 = field_jet2(dm.h_at(0, 1, 1), u);
    const Jet2 w[2] = {field_jet2(dm.N_at(0, 0, 0), u), field_jet2(dm.N_at(0, 1, 0), u)};
    const Jet2 nn[2] = {field_jet2(dm.N_at(0, 0, 1), u), field_jet2(dm.N_at(0, 1, 1), u)};

    detail::check_small(field_value(dm.g_at(0, 1), u), stol, "off-diagonal g");
    detail::check_small(field_value(dm.h_at(0, 0, 1), u), stol, "off-diagonal h");
    for (const Jet2* c : {&g1, &g2, &h3, &h4, &w[0], &w[1], &nn[0], &nn[1]})
      detail::check_small(c->grad[3], stol, "Killing direction");
    detail::check_small(g1.grad[2], stol, "g depends on v");
    detail::check_small(g2.grad[2], stol, "g depends on v");

    const auto su = to_std(u);
    const double U2 = source_value(src.ups2, std::span<const double>(su.data(), su.size()));
    const double U4 = source_value(src.ups4, std::span<const double>(su.data(), su.size()));

    // horizontal pair
    const double hh = -(1.0 / (2.0 * g1.value * g2.value)) *
                      (g2.hess(0, 0) - g1.grad[0] * g2.grad[0] / (2.0 * g1.value) -
                       g2.grad[0] * g2.grad[0] / (2.0 * g2.value) + g1.hess(1, 1) -
                       g1.grad[1] * g2.grad[1] / (2.0 * g2.value) -
                       g1.grad[1] * g1.grad[1] / (2.0 * g1.value));
    rep.record("R11", hh + U2, u);

    // vertical pair
    const double h3s = h3.grad[2], h4s = h4.grad[2];
    const double br = h4.hess(2, 2) - h4s * h4s / (2.0 * h4.value) -
                      h3s * h4s / (2.0 * h3.value);
    rep.record("R33", -br / (2.0 * h3.value * h4.value) + U4, u);

    for (int k = 0; k < 2; ++k) {
      if (kind == ConnKind::canonical) {
        const double rw = w[k].value / (2.0 * h4.value) * br +
                          h4s / (4.0 * h4.value) *
                              (h3.grad[k] / h3.value + h4.grad[k] / h4.value) -
                          h4.hess(k, 2) / (2.0 * h4.value);
        rep.record("R3k_" + std::to_string(k + 1), rw, u);
        const double rn = h4.value / (2.0 * h3.value) * nn[k].hess(2, 2) +
                          (h4.value * h3s / h3.value - 1.5 * h4s) * nn[k].grad[2] /
                              (2.0 * h3.value);
        rep.record("R4k_" + std::to_string(k + 1), rn, u);
      } else {
        const double As = (h3.hess(2, 2) * h3.value - h3s * h3s) / (2.0 * h3.value * h3.value) +
                          (h4.hess(2, 2) * h4.value - h4s * h4s) / (2.0 * h4.value * h4.value);
        const double dA = (h3.hess(k, 2) * h3.value - h3s * h3.grad[k]) /
                              (2.0 * h3.value * h3.value) +
                          (h4.hess(k, 2) * h4.value - h4s * h4.grad[k]) /
                              (2.0 * h4.value * h4.value);
        const double Bk = h4s / (2.0 * h4.value) *
                              (g1.grad[k] / (2.0 * g1.value) - g2.grad[k] / (2.0 * g2.value)) -
                          dA;
        const double rw = h3s / (2.0 * h3.value) * w[k].grad[2] + As * w[k].value + Bk;
        rep.record("R3k_" + std::to_string(k + 1), rw, u);
        const double corr = (k == 0) ? g1.grad[1] / (4.0 * h3.value) *
                                           (h3s / g1.value - h4s / g2.value)
                                     : g2.grad[0] / (4.0 * h3.value) *
                                           (h4s / g2.value - h3s / g1.value);
        const double rn = -h4s / (2.0 * h3.value) * nn[k].grad[2] + corr;
        rep.record("R4k_" + std::to_string(k + 1), rn, u);
      }
    }
  }
  return rep;
}

// ---- generic residuals via the curvature pipeline -------------------------
//
// Independent oracle: Ricci components from the full d-curvature machinery,
// mapped onto the same equation ids as residuals_separated, plus the maximum
// Einstein-tensor residual against the diagonal source (in lower-index form
// the source block pairing swaps: E_ij carries the vertical source value and
// E_ab the horizontal one).

inline ResidualReport residuals_generic(const DMetric& dm, ConnKind kind, const Source& src,
                                        const std::vector<Eigen::VectorXd>& points,
                                        const CurvOptions& opt = {}) {
  ResidualReport rep;
  for (const Eigen::VectorXd& u : points) {
    const CurvaturePack p = curvature_pack(dm, kind, u, opt);
    const auto su = to_std(u);
    const auto us = std::span<const double>(su.data(), su.size());
    const auto e = eval_blocks(dm, us);
    const double U2 = source_value(src.ups2, us);
    const double U4 = source_value(src.ups4, us);
    const int n = p.n, m = p.m;

    Eigen::MatrixXd up_h = Eigen::MatrixXd::Zero(n, n), up_v = Eigen::MatrixXd::Zero(m, m);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double acc = 0.0;
        for (int k = 0; k < n; ++k) acc += e.ginv(i, k) * p.ricci(k, j);
        up_h(i, j) = acc;
      }
    for (int a = 0; a < m; ++a)
      for (int b = 0; b < m; ++b) {
        double acc = 0.0;
        for (int c = 0; c < m; ++c) acc += e.hinv(a, c) * p.ricci(n + c, n + b);
        up_v(a, b) = acc;
      }
    rep.record("R11", up_h(0, 0) + U2, u);
    rep.record("R22", up_h(1, 1) + U2, u);
    rep.record("R33", up_v(0, 0) + U4, u);
    rep.record("R44", up_v(1, 1) + U4, u);
    for (int k = 0; k < n; ++k) {
      rep.record("R3k_" + std::to_string(k + 1), p.ricci(n + 0, k), u);
      rep.record("R4k_" + std::to_string(k + 1), p.ricci(n + 1, k), u);
    }

    double emax = 0.0;
    for (int al = 0; al < n + m; ++al)
      for (int be = 0; be < n + m; ++be) {
        double tgt = 0.0;
        if (al < n && be < n) tgt = U4 * e.g(al, be);
        if (al >= n && be >= n) tgt = U2 * e.h(al - n, be - n);
        emax = std::max(emax, std::abs(p.einstein(al, be) - tgt));
      }
    rep.record("einstein", emax, u);
  }
  return rep;
}

// ---- psi solver ------------------------------------------------------------
//
// Finite-difference solution of eps1 psi_11 + eps2 psi_22 = U(x1, x2) on a
// rectangular grid with Dirichlet data.  Elliptic signature pairs go through
// a sparse direct solve; mixed signatures are marched along x1 from the first
// two grid rows.

struct PsiGrid {
  int n1 = 101, n2 = 101;
  double x1a = 0.0, x1b = 3.141592653589793;
  double x2a = 0.0, x2b = 3.141592653589793;
};

inline Eigen::MatrixXd solve_psi(const ScalarField& ups2, double eps1, double eps2,
                                 const PsiGrid& grid, const ScalarField& boundary) {
  if (grid.n1 < 3 || grid.n2 < 3 || grid.x1b <= grid.x1a || grid.x2b <= grid.x2a)
    throw SolverError("solve_psi: degenerate grid");
  if (eps1 == 0.0 || eps2 == 0.0) throw SolverError("solve_psi: degenerate signature");
  const int n1 = grid.n1, n2 = grid.n2;
  const double d1 = (grid.x1b - grid.x1a) / (n1 - 1);
  const double d2 = (grid.x2b - grid.x2a) / (n2 - 1);
  auto X1 = [&](int i) { return grid.x1a + i * d1; };
  auto X2 = [&](int j) { return grid.x2a + j * d2; };
  auto bval = [&](int i, int j) {
    return boundary.valid() ? boundary(std::vector<double>{X1(i), X2(j)}) : 0.0;
  };
  auto uval = [&](int i, int j) {
    return ups2.valid() ? ups2(std::vector<double>{X1(i), X2(j)}) : 0.0;
  };

  Eigen::MatrixXd psi = Eigen::MatrixXd::Zero(n1, n2);
  for (int i = 0; i < n1; ++i) {
    psi(i, 0) = bval(i, 0);
    psi(i, n2 - 1) = bval(i, n2 - 1);
  }
  for (int j = 0; j < n2; ++j) {
    psi(0, j) = bval(0, j);
    psi(n1 - 1, j) = bval(n1 - 1, j);
  }

  if (eps1 * eps2 > 0.0) {
    const int ni = n1 - 2, nj = n2 - 2;
    auto id = [&](int i, int j) { return (i - 1) * nj + (j - 1); };
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(ni) * nj * 5);
    Eigen::VectorXd rhs(ni * nj);
    const double c1 = eps1 / (d1 * d1), c2 = eps2 / (d2 * d2);
    for (int i = 1; i < n1 - 1; ++i)
      for (int j = 1; j < n2 - 1; ++j) {
        const int row = id(i, j);
        double b = uval(i, j);
        trip.emplace_back(row, row, -2.0 * (c1 + c2));
        if (i > 1)
          trip.emplace_back(row, id(i - 1, j), c1);
        else
          b -= c1 * psi(i - 1, j);
        if (i < n1 - 2)
          trip.emplace_back(row, id(i + 1, j), c1);
        else
          b -= c1 * psi(i + 1, j);
        if (j > 1)
          trip.emplace_back(row, id(i, j - 1), c2);
        else
          b -= c2 * psi(i, j - 1);
        if (j < n2 - 2)
          trip.emplace_back(row, id(i, j + 1), c2);
        else
          b -= c2 * psi(i, j + 1);
        rhs[row] = b;
      }
    Eigen::SparseMatrix<double> A(ni * nj, ni * nj);
    A.setFromTriplets(trip.begin(), trip.end());
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu(A);
    if (lu.info() != Eigen::Success) throw SolverError("solve_psi: factorization failed");
    const Eigen::VectorXd sol = lu.solve(rhs);
    if (lu.info() != Eigen::Success) throw SolverError("solve_psi: solve failed");
    for (int i = 1; i < n1 - 1; ++i)
      for (int j = 1; j < n2 - 1; ++j) psi(i, j) = sol[id(i, j)];
    // verify the discrete operator residual
    double res = 0.0;
    for (int i = 1; i < n1 - 1; ++i)
      for (int j = 1; j < n2 - 1; ++j) {
        const double lap = c1 * (psi(i + 1, j) - 2.0 * psi(i, j) + psi(i - 1, j)) +
                           c2 * (psi(i, j + 1) - 2.0 * psi(i, j) + psi(i, j - 1));
        res = std::max(res, std::abs(lap - uval(i, j)));
      }
    if (res > 1e-8 * (1.0 + psi.cwiseAbs().maxCoeff()))
      throw SolverError("solve_psi: discrete residual above tolerance");
    return psi;
  }

  // mixed signature: second-order marching along x1, rows 0 and 1 from the
  // boundary data
  for (int j = 0; j < n2; ++j) psi(1, j) = bval(1, j);
  const double cap = 1e6 * (1.0 + psi.cwiseAbs().maxCoeff());
  for (int i = 1; i < n1 - 1; ++i)
    for (int j = 1; j < n2 - 1; ++j) {
      const double d22 = (psi(i, j + 1) - 2.0 * psi(i, j) + psi(i, j - 1)) / (d2 * d2);
      psi(i + 1, j) = 2.0 * psi(i, j) - psi(i - 1, j) +
                      (d1 * d1 / eps1) * (uval(i, j) - eps2 * d22);
      if (!std::isfinite(psi(i + 1, j)) || std::abs(psi(i + 1, j)) > cap)
        throw SolverError("solve_psi: marching instability");
    }
  return psi;
}

// ---- generating-function solution family ----------------------------------
//
// g_i = eps_i e^psi(x); h4 = eps4 (f - f0)^2; h3 = eps3 h0 (f_v)^2 |sigma|
// with the reciprocal S = 1/sigma obeying S_v = 2 eps3 h0 U4 f_v (f - f0);
// the N-coefficients solve their first-order equations in v, marched with a
// classical RK4 scheme so the whole construction stays differentiable in x, v.

struct SolutionRecipe {
  double eps1 = 1.0, eps2 = 1.0, eps3 = 1.0, eps4 = 1.0;
  ScalarField psi;                 // psi(x); invalid -> 0
  ScalarField f;                   // generating function f(x, v)
  ScalarField f0, h0, sigma0;      // integration functions of x; -> 0, 1, 1
  ScalarField w01, w02, n01, n02;  // N-coefficient integration functions; -> 0
  Source src;
  int steps = 64;      // RK4 steps over [v_base, v]
  double v_base = 0.0; // fiber point carrying the integration data (families with
                       // f - f0 vanishing at v = 0 are singular there)
};

namespace detail {

template <class T>
T field_or(const ScalarField& f, std::span<const T> u, double dflt) {
  return f.valid() ? f(u) : T(dflt);
}

// Stage quantities of the generating-function construction at (x, v), given
// the reciprocal sigma state S (and its x-derivatives Sj).
template <class T>
struct Sol1Q {
  T b, bs;
  T h3, h4;
  T Sp;                     // dS/dv
  std::array<T, 2> dSp;     // x-derivatives of dS/dv
  T L3;                     // (ln h3)_v
  T As;                     // A_v
  std::array<T, 2> B;
  T K1, K2;
};

template <class T>
Sol1Q<T> sol1_quants(const SolutionRecipe& r, const T& x1, const T& x2, const T& v,
                     const T& p1, const T& p2, const T& S, const std::array<T, 2>& Sj) {
  const std::vector<T> u{x1, x2, v, T(0.0)};
  const std::span<const T> us(u.data(), u.size());

  Sol1Q<T> q;
  q.b = r.f(us) - field_or(r.f0, us, 0.0);
  q.bs = nested_partial(r.f, us, {2});
  if (std::abs(value_of(q.bs)) < 1e-6)
    throw AnsatzError("generate_sol1: |f_v| below bound");
  const T bss = nested_partial(r.f, us, {2, 2});
  const T bsss = nested_partial(r.f, us, {2, 2, 2});
  std::array<T, 2> db, dbs, dbss;
  for (int j = 0; j < 2; ++j) {
    db[j] = nested_partial(r.f, us, {j}) -
            (r.f0.valid() ? nested_partial(r.f0, us, {j}) : T(0.0));
    dbs[j] = nested_partial(r.f, us, {j, 2});
    dbss[j] = nested_partial(r.f, us, {j, 2, 2});
  }
  const T h0v = field_or(r.h0, us, 1.0);
  std::array<T, 2> dh0{T(0.0), T(0.0)};
  if (r.h0.valid())
    for (int j = 0; j < 2; ++j) dh0[j] = nested_partial(r.h0, us, {j});
  const T U4 = source_value(r.src.ups4, us);
  T U4s(0.0);
  std::array<T, 2> dU4{T(0.0), T(0.0)};
  if (r.src.ups4.valid()) {
    U4s = nested_partial(r.src.ups4, us, {2});
    for (int j = 0; j < 2; ++j) dU4[j] = nested_partial(r.src.ups4, us, {j});
  }

  const double c = 2.0 * r.eps3;
  q.Sp = c * h0v * U4 * q.bs * q.b;
  const T Ssp = c * h0v * (U4s * q.bs * q.b + U4 * bss * q.b + U4 * q.bs * q.bs);
  q.h3 = r.eps3 * h0v * q.bs * q.bs / abs(S);
  q.h4 = r.eps4 * q.b * q.b;
  q.L3 = 2.0 * bss / q.bs - q.Sp / S;
  const T L4s = 2.0 * (bss / q.b - (q.bs / q.b) * (q.bs / q.b));
  const T L3s =
      2.0 * (bsss / q.bs - (bss / q.bs) * (bss / q.bs)) - (Ssp * S - q.Sp * q.Sp) / (S * S);
  q.As = 0.5 * (L3s + L4s);
  for (int j = 0; j < 2; ++j) {
    q.dSp[j] = c * (dh0[j] * U4 * q.bs * q.b +
                    h0v * (dU4[j] * q.bs * q.b + U4 * dbs[j] * q.b + U4 * q.bs * db[j]));
    const T dL4 = 2.0 * (dbs[j] / q.b - q.bs * db[j] / (q.b * q.b));
    const T dL3 = 2.0 * (dbss[j] / q.bs - bss * dbs[j] / (q.bs * q.bs)) -
                  (q.dSp[j] * S - q.Sp * Sj[j]) / (S * S);
    q.B[j] = -0.5 * (dL3 + dL4);  // the g-ratio term cancels for g_i = eps_i e^psi
  }
  const T h4s = 2.0 * r.eps4 * q.b * q.bs;
  const T ratio = q.h3 * q.L3 / h4s;  // h3_v / h4_v
  q.K1 = 0.5 * p2 * (ratio - r.eps1 / r.eps2);
  q.K2 = 0.5 * p1 * (1.0 - (r.eps2 / r.eps1) * ratio);
  return q;
}

template <class T>
void sol1_psi_partials(const SolutionRecipe& r, const T& x1, const T& x2, T& p1, T& p2) {
  p1 = T(0.0);
  p2 = T(0.0);
  if (r.psi.valid()) {
    const std::vector<T> ux{x1, x2, T(0.0), T(0.0)};
    const std::span<const T> uxs(ux.data(), ux.size());
    p1 = nested_partial(r.psi, uxs, {0});
    p2 = nested_partial(r.psi, uxs, {1});
  }
}

template <class T>
T sol1_sigma0_recip(const SolutionRecipe& r, const T& x1, const T& x2,
                    std::array<T, 2>* Sj = nullptr) {
  const std::vector<T> ux{x1, x2, T(0.0), T(0.0)};
  const std::span<const T> uxs(ux.data(), ux.size());
  const T s0 = field_or(r.sigma0, uxs, 1.0);
  if (Sj) {
    (*Sj)[0] = r.sigma0.valid() ? -nested_partial(r.sigma0, uxs, {0}) / (s0 * s0) : T(0.0);
    (*Sj)[1] = r.sigma0.valid() ? -nested_partial(r.sigma0, uxs, {1}) / (s0 * s0) : T(0.0);
  }
  return T(1.0) / s0;
}

// When (ln h3)_v vanishes identically the w-equation degenerates from an ODE
// in v into an algebraic relation.  Probed with plain doubles at two interior
// points.
inline bool sol1_degenerate(const SolutionRecipe& r, double x1, double x2, double v) {
  const double p0 = 0.0;
  bool deg = true;
  const std::array<double, 2> Sj{0.0, 0.0};
  const double S = sol1_sigma0_recip<double>(r, x1, x2);
  for (double s : {1.0, 0.37}) {
    const auto q =
        sol1_quants<double>(r, x1, x2, r.v_base + s * (v - r.v_base), p0, p0, S, Sj);
    const double scale = std::abs(q.bs) + std::abs(q.b) + 1.0;
    if (std::abs(q.L3) > 1e-9 * scale || std::abs(q.Sp) > 1e-9 * scale) deg = false;
  }
  return deg;
}

// Reciprocal sigma at (x, v) by fixed Gauss-Legendre quadrature of its exact
// closure.
template <class T>
T sol1_S(const SolutionRecipe& r, const T& x1, const T& x2, const T& v) {
  const T S0 = sol1_sigma0_recip<T>(r, x1, x2);
  if (!r.src.ups4.valid()) return S0;
  auto integrand = [&](const T& s) {
    const T v1 = s + r.v_base;
    const std::vector<T> u{x1, x2, v1, T(0.0)};
    const std::span<const T> us(u.data(), u.size());
    const T b = r.f(us) - field_or(r.f0, us, 0.0);
    const T bs = nested_partial(r.f, us, {2});
    return 2.0 * r.eps3 * field_or(r.h0, us, 1.0) * source_value(r.src.ups4, us) * bs * b;
  };
  return S0 + integral_0_to(integrand, v - r.v_base);
}

// March state: S, dS/dx1, dS/dx2, w1, w2, n1, n2.
template <class T>
using Sol1State = std::array<T, 7>;

template <class T>
Sol1State<T> sol1_rhs(const SolutionRecipe& r, const T& x1, const T& x2, const T& v,
                      const T& p1, const T& p2, bool with_w, const Sol1State<T>& st) {
  const std::array<T, 2> Sj{st[1], st[2]};
  const auto q = sol1_quants(r, x1, x2, v, p1, p2, st[0], Sj);
  Sol1State<T> d;
  d[0] = q.Sp;
  for (int j = 0; j < 2; ++j) {
    d[1 + j] = q.dSp[j];
    d[3 + j] = with_w ? -(2.0 * q.As / q.L3) * st[3 + j] - 2.0 * q.B[j] / q.L3 : T(0.0);
  }
  // the n-coefficient drivers vanish identically for constant g
  d[5] = r.psi.valid() ? q.K1 : T(0.0);
  d[6] = r.psi.valid() ? q.K2 : T(0.0);
  return d;
}

template <class T>
Sol1State<T> sol1_march(const SolutionRecipe& r, const T& x1, const T& x2, const T& v,
                        bool with_w) {
  T p1, p2;
  sol1_psi_partials(r, x1, x2, p1, p2);
  const std::vector<T> ux{x1, x2, T(0.0), T(0.0)};
  const std::span<const T> uxs(ux.data(), ux.size());
  Sol1State<T> st;
  std::array<T, 2> Sj;
  st[0] = sol1_sigma0_recip<T>(r, x1, x2, &Sj);
  st[1] = Sj[0];
  st[2] = Sj[1];
  st[3] = field_or(r.w01, uxs, 0.0);
  st[4] = field_or(r.w02, uxs, 0.0);
  st[5] = field_or(r.n01, uxs, 0.0);
  st[6] = field_or(r.n02, uxs, 0.0);

  const int ns = std::max(1, r.steps);
  const T dt = (v - r.v_base) / static_cast<double>(ns);
  auto add = [](const Sol1State<T>& a, const Sol1State<T>& k, const T& s) {
    Sol1State<T> o;
    for (int i = 0; i < 7; ++i) o[i] = a[i] + s * k[i];
    return o;
  };
  for (int step = 0; step < ns; ++step) {
    const T t0 = r.v_base + dt * static_cast<double>(step);
    const T tm = t0 + 0.5 * dt;
    const T t1 = t0 + dt;
    const auto k1 = sol1_rhs(r, x1, x2, t0, p1, p2, with_w, st);
    const auto k2 = sol1_rhs(r, x1, x2, tm, p1, p2, with_w, add(st, k1, T(0.5) * dt));
    const auto k3 = sol1_rhs(r, x1, x2, tm, p1, p2, with_w, add(st, k2, T(0.5) * dt));
    const auto k4 = sol1_rhs(r, x1, x2, t1, p1, p2, with_w, add(st, k3, dt));
    for (int i = 0; i < 7; ++i)
      st[i] = st[i] + (dt / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  }
  return st;
}

// N-coefficient fields: w from the march in the generic case, from the
// algebraic relation (or the integration function) in the degenerate one;
// n always from the march.
template <class T>
T sol1_w(const SolutionRecipe& r, int j, std::span<const T> u) {
  const T x1 = u[0], x2 = u[1], v = u[2];
  if (sol1_degenerate(r, value_of(x1), value_of(x2), value_of(v))) {
    T p1, p2;
    sol1_psi_partials(r, x1, x2, p1, p2);
    std::array<T, 2> Sj;
    const T S = sol1_sigma0_recip<T>(r, x1, x2, &Sj);
    const auto q = sol1_quants(r, x1, x2, v, p1, p2, S, Sj);
    const double scale = std::abs(value_of(q.bs)) + std::abs(value_of(q.b)) + 1.0;
    if (std::abs(value_of(q.As)) > 1e-9 * scale) return -q.B[j] / q.As;
    const std::vector<T> ux{x1, x2, T(0.0), T(0.0)};
    return field_or(j == 0 ? r.w01 : r.w02, std::span<const T>(ux.data(), ux.size()), 0.0);
  }
  return sol1_march(r, x1, x2, v, true)[static_cast<std::size_t>(3 + j)];
}

}  // namespace detail

inline DMetric generate_sol1(const SolutionRecipe& r) {
  if (!r.f.valid()) throw AnsatzError("generate_sol1: missing generating function");
  DMetric dm = DMetric::single_shell(2, 2);
  const SolutionRecipe rc = r;  // captured by value below

  auto gfield = [rc](double epsv) {
    return make_field(4, [rc, epsv](auto u) {
      return epsv * exp(detail::field_or(rc.psi, u, 0.0));
    });
  };
  dm.g[0] = gfield(rc.eps1);
  dm.g[3] = gfield(rc.eps2);

  dm.h[0][0] = make_field(4, [rc](auto u) {
    using T = std::decay_t<decltype(u[0])>;
    const T S = detail::sol1_S(rc, u[0], u[1], u[2]);
    const std::vector<T> uv(u.begin(), u.end());
    const std::span<const T> us(uv.data(), uv.size());
    const T bs = detail::nested_partial(rc.f, us, {2});
    if (std::abs(value_of(bs)) < 1e-6)
      throw AnsatzError("generate_sol1: |f_v| below bound");
    return rc.eps3 * detail::field_or(rc.h0, us, 1.0) * bs * bs / abs(S);
  });
  dm.h[0][3] = make_field(4, [rc](auto u) {
    using T = std::decay_t<decltype(u[0])>;
    const std::vector<T> uv(u.begin(), u.end());
    const std::span<const T> us(uv.data(), uv.size());
    const T b = rc.f(us) - detail::field_or(rc.f0, us, 0.0);
    return rc.eps4 * b * b;
  });
  for (int k = 0; k < 2; ++k) {
    dm.N[0][static_cast<std::size_t>(k) * 2 + 0] = make_field(4, [rc, k](auto u) {
      using T = std::decay_t<decltype(u[0])>;
      return detail::sol1_w<T>(rc, k, u);
    });
    dm.N[0][static_cast<std::size_t>(k) * 2 + 1] = make_field(4, [rc, k](auto u) {
      using T = std::decay_t<decltype(u[0])>;
      return detail::sol1_march<T>(rc, u[0], u[1], u[2], false)[static_cast<std::size_t>(5 + k)];
    });
  }
  return dm;
}

// ---- 4-d off-diagonal cosmology -------------------------------------------
//
// Prime metric: coordinates (hr, t, htheta, hphi), blocks
// diag(ha^2, -1 | ha^2 hr^2, ha^2 hr^2 sin^2 htheta).  The deformed metric is
// the generating-function family with signature (+,-,+,+) and the effective
// generating function B = (f - f0) ha hr sin(htheta), which reproduces the
// angular-shape factors of the prime blocks; with no generating data the
// undeformed prime metric is returned.

struct Cosmo4dRecipe {
  ScalarField ha;                // scale factor, a function of t = u[1]
  ScalarField psi;               // psi(hr, t); invalid -> 0
  ScalarField f, f0;             // generating data in (hr, t, htheta)
  ScalarField h0, sigma0;        // integration functions; -> 1, 1
  ScalarField w01, w02, n01, n02;
  Source src;
  int steps = 64;
  double v_base = 0.0;
};

inline DMetric prime_4d_metric(const ScalarField& ha) {
  DMetric dm = DMetric::single_shell(2, 2);
  dm.g[0] = make_field(4, [ha](auto u) {
    using T = std::decay_t<decltype(u[0])>;
    const T a = ha(u);
    return a * a;
  });
  dm.g[3] = constant_field(4, -1.0);
  dm.h[0][0] = make_field(4, [ha](auto u) {
    using T = std::decay_t<decltype(u[0])>;
    const T a = ha(u);
    return a * a * u[0] * u[0];
  });
  dm.h[0][3] = make_field(4, [ha](auto u) {
    using T = std::decay_t<decltype(u[0])>;
    const T a = ha(u);
    const T s = sin(u[2]);
    return a * a * u[0] * u[0] * s * s;
  });
  return dm;
}

inline DMetric generate_4d_cosmo(const Cosmo4dRecipe& r) {
  if (!r.ha.valid()) throw AnsatzError("generate_4d_cosmo: missing scale factor");
  if (!r.f.valid()) return prime_4d_metric(r.ha);  // identity deformation
  SolutionRecipe s;
  s.eps1 = 1.0;
  s.eps2 = -1.0;
  s.eps3 = 1.0;
  s.eps4 = 1.0;
  s.psi = r.psi;
  const ScalarField f = r.f, f0 = r.f0, ha = r.ha;
  s.f = make_field(4, [f, f0, ha](auto u) {
    using T = std::decay_t<decltype(u[0])>;
    const T b = f(u) - detail::field_or(f0, u, 0.0);
    return b * ha(u) * u[0] * sin(u[2]);
  });
  s.h0 = r.h0;
  s.sigma0 = r.sigma0;
  s.w01 = r.w01;
  s.w02 = r.w02;
  s.n01 = r.n01;
  s.n02 = r.n02;
  s.src = r.src;
  s.steps = r.steps;
  s.v_base = r.v_base;
  return generate_sol1(s);
}

// ---- 8-d solitonic deformation of the doubled FRW metric ------------------
//
// Coordinates (x1, hr, t | htheta | vr, hphi | vtheta, vphi): a 3-dimensional
// base and shells of dimensions 1, 2, 2.  This grouping keeps every
// N-coefficient sourced by coordinates that precede its shell.  The small
// parameter eps multiplies the solitonic polarizations and N-coefficients;
// for eps = 0 (and no optional deformation data) the diagonal doubled FRW
// metric is recovered exactly.

struct Soliton8dParams {
  double eps1 = 1.0;
  double hk = 0.0, vk = 0.0;
  ScalarField ha, va;       // scale factors, functions of t = u[2]
  double epsilon = 0.0;     // solitonic amplitude, |epsilon| <= 0.1
  ScalarField xi;           // solitonic function xi(t, htheta, vr)
  ScalarField psi;          // psi(hr, t); invalid -> 0
  ScalarField eta4;         // polarization of the htheta block; invalid -> 1
  ScalarField w2, w3;       // first-shell N-coefficients; invalid -> 0
};

inline DMetric generate_8d_solitonic(const Soliton8dParams& p) {
  if (!p.ha.valid() || !p.va.valid())
    throw AnsatzError("generate_8d_solitonic: missing scale factors");
  if (std::abs(p.epsilon) > 0.1)
    throw AnsatzError("generate_8d_solitonic: amplitude outside perturbative range");

  DMetric dm;
  dm.n = 3;
  dm.shells = {1, 2, 2};
  const int dim = 8;
  dm.g.assign(9, constant_field(dim, 0.0));
  dm.h.resize(3);
  dm.h[0].assign(1, constant_field(dim, 0.0));
  dm.h[1].assign(4, constant_field(dim, 0.0));
  dm.h[2].assign(4, constant_field(dim, 0.0));
  dm.N.resize(3);
  dm.N[0].assign(3, constant_field(dim, 0.0));
  dm.N[1].assign(8, constant_field(dim, 0.0));
  dm.N[2].assign(12, constant_field(dim, 0.0));

  const Soliton8dParams pc = p;
  dm.g[0] = constant_field(dim, p.eps1);
  dm.g[4] = make_field(dim, [pc](auto u) {
    using T = std::decay_t<decltype(u[0])>;
    T v = pc.ha(u) * pc.ha(u) / (T(1.0) - pc.hk * u[1] * u[1]);
    if (pc.psi.valid()) v = exp(pc.psi(u)) * v;
    return v;
  });
  dm.g[8] = make_field(dim, [pc](auto u) {
    using T = std::decay_t<decltype(u[0])>;
    return pc.psi.valid() ? -exp(pc.psi(u)) : T(-1.0);
  });

  dm.h[0][0] = make_field(dim, [pc](auto u) {
    using T = std::decay_t<decltype(u[0])>;
    T v = pc.ha(u) * pc.ha(u) * u[1] * u[1];
    if (pc.eta4.valid()) v = pc.eta4(u) * v;
    return v;
  });
  if (p.w2.valid()) dm.N[0][1] = p.w2;  // d hr source
  if (p.w3.valid()) dm.N[0][2] = p.w3;  // dt source

  const bool sol = p.epsilon != 0.0 && p.xi.valid();
  dm.h[1][0] = make_field(dim, [pc, sol](auto u) {
    using T = std::decay_t<decltype(u[0])>;
    T v = pc.va(u) * pc.va(u) / (T(1.0) - pc.vk * u[4] * u[4]);
    if (sol) v = (T(1.0) + pc.epsilon * pc.xi(u)) * v;
    return v;
  });
  dm.h[1][3] = make_field(dim, [pc, sol](auto u) {
    using T = std::decay_t<decltype(u[0])>;
    const T s = sin(u[3]);
    T v = pc.ha(u) * pc.ha(u) * u[1] * u[1] * s * s;
    if (sol) v = (T(1.0) + pc.epsilon * pc.xi(u)) * v;
    return v;
  });
  if (sol) {
    // vr elongation: eps * (-d xi/dt, -d xi/d htheta); hphi elongation: eps * xi
    dm.N[1][2 * 2 + 0] = make_field(dim, [pc](auto u) {
      return -pc.epsilon * detail::nested_partial(pc.xi, u, {2});
    });
    dm.N[1][3 * 2 + 0] = make_field(dim, [pc](auto u) {
      return -pc.epsilon * detail::nested_partial(pc.xi, u, {3});
    });
    dm.N[1][2 * 2 + 1] = make_field(dim, [pc](auto u) { return pc.epsilon * pc.xi(u); });
    dm.N[1][3 * 2 + 1] = make_field(dim, [pc](auto u) { return pc.epsilon * pc.xi(u); });
  }

  dm.h[2][0] = make_field(dim, [pc](auto u) { return pc.va(u) * pc.va(u) * u[4] * u[4]; });
  dm.h[2][3] = make_field(dim, [pc](auto u) {
    using T = std::decay_t<decltype(u[0])>;
    const T s = sin(u[6]);
    return pc.va(u) * pc.va(u) * u[4] * u[4] * s * s;
  });
  return dm;
}

inline DMetric diagonal_8d_base(double eps1, double hk, double vk, const ScalarField& ha,
                                const ScalarField& va) {
  Soliton8dParams p;
  p.eps1 = eps1;
  p.hk = hk;
  p.vk = vk;
  p.ha = ha;
  p.va = va;
  return generate_8d_solitonic(p);
}

// ---- three-shell separated residuals --------------------------------------
//
// Metric shape: n = 2 with three shells of dimension 2, diagonal blocks,
// Killing symmetry along the last coordinate of each shell, shell fields
// depending on the preceding coordinates and the shell's own first ("v")
// coordinate.  Each shell reuses one kernel with substituted derivative
// directions.  Two literal-reading switches reproduce questionable printed
// index choices in the third shell.

struct Residual8dOptions {
  bool literal_third_shell_denominator = false;  // w-equation prefactor uses the
                                                 // first-shell h4 block
  bool literal_third_shell_bracket = false;      // bracket mixes in the second-shell
                                                 // h6 block (whose v-derivative
                                                 // vanishes on this shape)
};

inline ResidualReport residuals_8d(const DMetric& dm, const Source& src,
                                   const std::vector<Eigen::VectorXd>& points,
                                   const Residual8dOptions& opt = {}) {
  if (dm.n != 2 || dm.shell_count() != 3 || dm.shells != std::vector<int>{2, 2, 2})
    throw ShapeError("residuals_8d: expected a 2+2+2+2 d-metric");

  ResidualReport rep;
  const double stol = 1e-9;
  const ScalarField* ups[3] = {&src.ups4, &src.ups6, &src.ups8};
  for (const Eigen::VectorXd& u : points) {
    const auto su = to_std(u);
    const auto us = std::span<const double>(su.data(), su.size());

    const Jet2 g1 = field_jet2(dm.g_at(0, 0), u);
    const Jet2 g2 = field_jet2(dm.g_at(1, 1), u);
    detail::check_small(field_value(dm.g_at(0, 1), u), stol, "off-diagonal g");
    for (int mu = 2; mu < 8; ++mu) {
      detail::check_small(g1.grad[mu], stol, "g depends on shell coordinates");
      detail::check_small(g2.grad[mu], stol, "g depends on shell coordinates");
    }
    const double U2 = source_value(src.ups2, us);
    const double hh = -(1.0 / (2.0 * g1.value * g2.value)) *
                      (g2.hess(0, 0) - g1.grad[0] * g2.grad[0] / (2.0 * g1.value) -
                       g2.grad[0] * g2.grad[0] / (2.0 * g2.value) + g1.hess(1, 1) -
                       g1.grad[1] * g2.grad[1] / (2.0 * g2.value) -
                       g1.grad[1] * g1.grad[1] / (2.0 * g1.value));
    rep.record("R11", hh + U2, u);

    for (int s = 0; s < 3; ++s) {
      const int off = dm.offset(s);  // shell "v" coordinate index
      const Jet2 hA = field_jet2(dm.h_at(s, 0, 0), u);
      const Jet2 hB = field_jet2(dm.h_at(s, 1, 1), u);
      detail::check_small(field_value(dm.h_at(s, 0, 1), u), stol, "off-diagonal h");
      for (int mu = off + 1; mu < 8; ++mu) {
        detail::check_small(hA.grad[mu], stol, "shell block depends on later coordinates");
        detail::check_small(hB.grad[mu], stol, "shell block depends on later coordinates");
      }
      const double Uv = source_value(*ups[s], us);
      const double hAs = hA.grad[off], hBs = hB.grad[off];
      double br = hB.hess(off, off) - hBs * hBs / (2.0 * hB.value) -
                  hAs * hBs / (2.0 * hA.value);
      if (s == 2 && opt.literal_third_shell_bracket) {
        const Jet2 h6 = field_jet2(dm.h_at(1, 1, 1), u);
        br = hB.hess(off, off) - hBs * hBs / (2.0 * hB.value) -
             hAs * h6.grad[off] / (2.0 * hA.value);
      }
      const std::string sid = std::to_string(s + 1);
      rep.record("Rdiag_shell" + sid, -br / (2.0 * hA.value * hB.value) + Uv, u);

      double wden = 2.0 * hB.value;
      if (s == 2 && opt.literal_third_shell_denominator)
        wden = 2.0 * field_value(dm.h_at(0, 1, 1), u);
      for (int k = 0; k < off; ++k) {
        const Jet2 w = field_jet2(dm.N_at(s, k, 0), u);
        const Jet2 nn = field_jet2(dm.N_at(s, k, 1), u);
        const double rw = w.value / wden * br +
                          hBs / (4.0 * hB.value) *
                              (hA.grad[k] / hA.value + hB.grad[k] / hB.value) -
                          hB.hess(k, off) / (2.0 * hB.value);
        rep.record("Rw_shell" + sid + "_" + std::to_string(k + 1), rw, u);
        const double rn = hB.value / (2.0 * hA.value) * nn.hess(off, off) +
                          (hB.value * hAs / hA.value - 1.5 * hBs) * nn.grad[off] /
                              (2.0 * hA.value);
        rep.record("Rn_shell" + sid + "_" + std::to_string(k + 1), rn, u);
      }
    }
  }
  return rep;
}

}  // namespace finsler
