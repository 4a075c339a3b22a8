#pragma once

// Distinguished (N-adapted) linear connections on a single-shell DMetric:
// canonical, Cartan, h-v, Berwald, Chern, Hashiguchi, plus the Levi-Civita
// connection of the assembled off-diagonal metric and the distortion tensor
// relating it to the canonical d-connection.
//
// Coefficient layout convention: a connection coefficient array is indexed
// [upper][transported][direction]; e.g. L^i_{jk} has transported j and
// direction k, matching D_{e_k} e_j = L^i_{jk} e_i.

#include <cassert>
#include <span>
#include <stdexcept>
#include <vector>

#include "finsler_forge/nholon.hpp"

namespace finsler {

enum class ConnKind { canonical, cartan, hv, berwald, chern, hashiguchi };

struct ConnOptions {
  // Evaluate the vertical C-coefficient exactly as printed (with the repeated
  // differentiation index) instead of the symmetric Christoffel-type reading.
  bool literal_c = false;
};

template <class T>
struct ConnCoeffs {
  int n = 0, m = 0;
  std::vector<T> Lh;  // [i][j][k] : n*n*n
  std::vector<T> Lv;  // [a][b][k] : m*m*n
  std::vector<T> Ch;  // [i][j][c] : n*n*m
  std::vector<T> Cv;  // [a][b][c] : m*m*m

  T& lh(int i, int j, int k) { return Lh[(static_cast<std::size_t>(i) * n + j) * n + k]; }
  T& lv(int a, int b, int k) { return Lv[(static_cast<std::size_t>(a) * m + b) * n + k]; }
  T& ch(int i, int j, int c) { return Ch[(static_cast<std::size_t>(i) * n + j) * m + c]; }
  T& cv(int a, int b, int c) { return Cv[(static_cast<std::size_t>(a) * m + b) * m + c]; }
  const T& lh(int i, int j, int k) const { return Lh[(static_cast<std::size_t>(i) * n + j) * n + k]; }
  const T& lv(int a, int b, int k) const { return Lv[(static_cast<std::size_t>(a) * m + b) * n + k]; }
  const T& ch(int i, int j, int c) const { return Ch[(static_cast<std::size_t>(i) * n + j) * m + c]; }
  const T& cv(int a, int b, int c) const { return Cv[(static_cast<std::size_t>(a) * m + b) * m + c]; }
};

namespace detail {

// Christoffel-type horizontal coefficient built from N-adapted derivatives:
// L^i_{jk} = 1/2 g^{ir} (e_k g_jr + e_j g_kr - e_r g_jk).
template <class T>
void christoffel_h(const BlockEval<T>& e, ConnCoeffs<T>& c) {
  const int n = e.n;
  auto eg = [&](int k, int i, int j) {
    return eadapt_h(e, k, [&](int mu) { return e.gd[static_cast<std::size_t>(mu)](i, j); });
  };
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        T acc(0.0);
        for (int r = 0; r < n; ++r)
          acc = acc + e.ginv(i, r) * (eg(k, j, r) + eg(j, k, r) - eg(r, j, k));
        c.lh(i, j, k) = 0.5 * acc;
      }
}

// Cartan/h-v vertical C-coefficient.  Symmetric reading by default:
// C^a_{bc} = 1/2 h^{ad} (d_c h_bd + d_b h_cd - d_d h_bc); the literal flag
// reproduces the printed repeated index (d_c h_bd + d_c h_cd - d_d h_bc).
template <class T>
void c_vertical(const BlockEval<T>& e, bool literal, ConnCoeffs<T>& c) {
  const int n = e.n, m = e.m;
  auto dh = [&](int cc, int a, int b) { return e.hd[static_cast<std::size_t>(n + cc)](a, b); };
  for (int a = 0; a < m; ++a)
    for (int b = 0; b < m; ++b)
      for (int cc = 0; cc < m; ++cc) {
        T acc(0.0);
        for (int d = 0; d < m; ++d) {
          const T bracket = literal ? dh(cc, b, d) + dh(cc, cc, d) - dh(d, b, cc)
                                    : dh(cc, b, d) + dh(b, cc, d) - dh(d, b, cc);
          acc = acc + e.hinv(a, d) * bracket;
        }
        c.cv(a, b, cc) = 0.5 * acc;
      }
}

}  // namespace detail

template <class T>
ConnCoeffs<T> dconnection_from_blocks(const BlockEval<T>& e, ConnKind kind,
                                      const ConnOptions& opt = {}) {
  const int n = e.n, m = e.m;
  ConnCoeffs<T> c;
  c.n = n;
  c.m = m;
  c.Lh.assign(static_cast<std::size_t>(n) * n * n, T(0.0));
  c.Lv.assign(static_cast<std::size_t>(m) * m * n, T(0.0));
  c.Ch.assign(static_cast<std::size_t>(n) * n * m, T(0.0));
  c.Cv.assign(static_cast<std::size_t>(m) * m * m, T(0.0));

  auto dyN = [&](int b, int k, int a) { return e.Nd[static_cast<std::size_t>(n + b)](k, a); };
  auto require_square = [&]() {
    if (n != m)
      throw std::invalid_argument("dconnection: this kind uses h/v index identification (n == m)");
  };

  switch (kind) {
    // The cartan kind carries the canonical coefficient families: on a Sasaki
    // lift the two connections coincide component-by-component, and only this
    // completion keeps the defining metric compatibility on general d-metrics.
    case ConnKind::canonical:
    case ConnKind::cartan: {
      if (kind == ConnKind::cartan) require_square();
      detail::christoffel_h(e, c);
      // L^a_{bk} = d_b N_k^a + 1/2 h^{ac}(e_k h_bc - h_dc d_b N_k^d - h_db d_c N_k^d)
      for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b)
          for (int k = 0; k < n; ++k) {
            T acc(0.0);
            for (int cc = 0; cc < m; ++cc) {
              T br = eadapt_h(e, k, [&](int mu) { return e.hd[static_cast<std::size_t>(mu)](b, cc); });
              for (int d = 0; d < m; ++d)
                br = br - e.h(d, cc) * dyN(b, k, d) - e.h(d, b) * dyN(cc, k, d);
              acc = acc + e.hinv(a, cc) * br;
            }
            c.lv(a, b, k) = dyN(b, k, a) + 0.5 * acc;
          }
      // C^i_{jc} = 1/2 g^{ik} d_c g_jk
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          for (int cc = 0; cc < m; ++cc) {
            T acc(0.0);
            for (int k = 0; k < n; ++k)
              acc = acc + e.ginv(i, k) * e.gd[static_cast<std::size_t>(n + cc)](j, k);
            c.ch(i, j, cc) = 0.5 * acc;
          }
      detail::c_vertical(e, opt.literal_c, c);
      break;
    }
    case ConnKind::hv: {
      require_square();
      detail::christoffel_h(e, c);
      detail::c_vertical(e, false, c);
      // index identification: the vertical L copies its horizontal partner;
      // only the two defining families are kept
      for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b)
          for (int k = 0; k < n; ++k) c.lv(a, b, k) = c.lh(a, b, k);
      break;
    }
    case ConnKind::berwald: {
      for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b)
          for (int k = 0; k < n; ++k) c.lv(a, b, k) = dyN(b, k, a);
      if (n == m)
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) c.lh(i, j, k) = c.lv(i, j, k);
      break;
    }
    case ConnKind::chern: {
      require_square();
      detail::christoffel_h(e, c);
      for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b)
          for (int k = 0; k < n; ++k) c.lv(a, b, k) = c.lh(a, b, k);
      break;
    }
    case ConnKind::hashiguchi: {
      require_square();
      for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b)
          for (int k = 0; k < n; ++k) c.lv(a, b, k) = dyN(b, k, a);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          for (int k = 0; k < n; ++k) c.lh(i, j, k) = c.lv(i, j, k);
      detail::c_vertical(e, opt.literal_c, c);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          for (int cc = 0; cc < m; ++cc) c.ch(i, j, cc) = c.cv(i, j, cc);
      break;
    }
  }
  return c;
}

template <class T>
ConnCoeffs<T> dconnection_t(const DMetric& dm, ConnKind kind, std::span<const T> u,
                            const ConnOptions& opt = {}) {
  return dconnection_from_blocks(eval_blocks(dm, u), kind, opt);
}

// ---- assembled metric, generic scalar -------------------------------------

template <class T>
Mat<T> assemble_t(const DMetric& dm, std::span<const T> u) {
  const int dim = dm.dim();
  const std::vector<T> su(u.begin(), u.end());
  Mat<T> bd(dim, dim), theta(dim, dim);
  for (int i = 0; i < dim; ++i) theta(i, i) = T(1.0);
  for (int i = 0; i < dm.n; ++i)
    for (int j = 0; j < dm.n; ++j) bd(i, j) = dm.g_at(i, j)(su);
  for (int s = 0; s < dm.shell_count(); ++s) {
    const int off = dm.offset(s);
    for (int a = 0; a < dm.shell_dim(s); ++a)
      for (int b = 0; b < dm.shell_dim(s); ++b) bd(off + a, off + b) = dm.h_at(s, a, b)(su);
    for (int t = 0; t < dm.shell_dim(s); ++t)
      for (int src = 0; src < off; ++src) theta(off + t, src) = dm.N_at(s, src, t)(su);
  }
  Mat<T> r(dim, dim);
  for (int mu = 0; mu < dim; ++mu)
    for (int nu = 0; nu < dim; ++nu) {
      T acc(0.0);
      for (int al = 0; al < dim; ++al)
        for (int be = 0; be < dim; ++be) acc = acc + theta(al, mu) * bd(al, be) * theta(be, nu);
      r(mu, nu) = acc;
    }
  return r;
}

// ---- Levi-Civita of the assembled metric ----------------------------------

// Full-size coefficient array, [upper][transported][direction], flattened.
template <class T>
struct Gamma3 {
  int dim = 0;
  std::vector<T> a;
  T& at(int up, int tr, int dir) { return a[(static_cast<std::size_t>(up) * dim + tr) * dim + dir]; }
  const T& at(int up, int tr, int dir) const {
    return a[(static_cast<std::size_t>(up) * dim + tr) * dim + dir];
  }
  static Gamma3 zero(int d) {
    Gamma3 g;
    g.dim = d;
    g.a.assign(static_cast<std::size_t>(d) * d * d, T(0.0));
    return g;
  }
};

// Coordinate-frame Christoffel symbols of the assembled off-diagonal metric.
template <class T>
Gamma3<T> levi_civita_coord_t(const DMetric& dm, std::span<const T> u) {
  const int dim = dm.dim();
  const auto su = seed(std::vector<T>(u.begin(), u.end()));
  const Mat<Dual<T>> gfull = assemble_t(dm, std::span<const Dual<T>>(su.data(), su.size()));
  Mat<T> gval(dim, dim);
  std::vector<Mat<T>> gd(static_cast<std::size_t>(dim), Mat<T>(dim, dim));
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) {
      gval(i, j) = gfull(i, j).v;
      if (!gfull(i, j).d.empty())
        for (int mu = 0; mu < dim; ++mu) gd[static_cast<std::size_t>(mu)](i, j) = gfull(i, j).d[mu];
    }
  const Mat<T> ginv = invert(gval);
  Gamma3<T> G = Gamma3<T>::zero(dim);
  for (int up = 0; up < dim; ++up)
    for (int nu = 0; nu < dim; ++nu)
      for (int rho = 0; rho < dim; ++rho) {
        T acc(0.0);
        for (int s = 0; s < dim; ++s)
          acc = acc + ginv(up, s) * (gd[static_cast<std::size_t>(nu)](s, rho) +
                                     gd[static_cast<std::size_t>(rho)](nu, s) -
                                     gd[static_cast<std::size_t>(s)](nu, rho));
        G.at(up, nu, rho) = 0.5 * acc;
      }
  return G;
}

// Levi-Civita coefficients expressed in the N-adapted frame:
// D_{e_dir} e_tr = Gamma^up_{tr dir} e_up.
template <class T>
Gamma3<T> levi_civita_nadapted_t(const DMetric& dm, std::span<const T> u) {
  assert(dm.shell_count() == 1);
  const int n = dm.n, m = dm.m(), dim = dm.dim();
  const Gamma3<T> Gc = levi_civita_coord_t(dm, u);
  const auto e = eval_blocks(dm, u);
  // frame A: column alpha = e_alpha components; coframe B = A^{-1}
  Mat<T> A(dim, dim), B(dim, dim);
  for (int i = 0; i < dim; ++i) {
    A(i, i) = T(1.0);
    B(i, i) = T(1.0);
  }
  for (int k = 0; k < n; ++k)
    for (int a = 0; a < m; ++a) {
      A(n + a, k) = -e.Nc(k, a);
      B(n + a, k) = e.Nc(k, a);
    }
  // dA[mu]: coordinate derivative of the frame matrix
  std::vector<Mat<T>> dA(static_cast<std::size_t>(dim), Mat<T>(dim, dim));
  for (int k = 0; k < n; ++k)
    for (int a = 0; a < m; ++a)
      for (int mu = 0; mu < dim; ++mu)
        dA[static_cast<std::size_t>(mu)](n + a, k) = -e.Nd[static_cast<std::size_t>(mu)](k, a);
  Gamma3<T> G = Gamma3<T>::zero(dim);
  for (int up = 0; up < dim; ++up)
    for (int tr = 0; tr < dim; ++tr)
      for (int dir = 0; dir < dim; ++dir) {
        T acc(0.0);
        for (int mu = 0; mu < dim; ++mu) {
          // nabla_{e_dir} e_tr = A^nu_dir ( d_nu A^mu_tr + A^rho_tr Gamma^mu_{rho nu} ) d_mu
          T inner(0.0);
          for (int nu = 0; nu < dim; ++nu) {
            T t = dA[static_cast<std::size_t>(nu)](mu, tr);
            for (int rho = 0; rho < dim; ++rho) t = t + A(rho, tr) * Gc.at(mu, rho, nu);
            inner = inner + A(nu, dir) * t;
          }
          acc = acc + B(up, mu) * inner;
        }
        G.at(up, tr, dir) = acc;
      }
  return G;
}

// Embed d-connection coefficients into a full-size array (all mixed h/v
// coefficient types of a d-connection vanish).
template <class T>
Gamma3<T> embed_full(const ConnCoeffs<T>& c) {
  const int n = c.n, m = c.m;
  Gamma3<T> G = Gamma3<T>::zero(n + m);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      for (int k = 0; k < n; ++k) G.at(i, j, k) = c.lh(i, j, k);
      for (int a = 0; a < m; ++a) G.at(i, j, n + a) = c.ch(i, j, a);
    }
  for (int a = 0; a < m; ++a)
    for (int b = 0; b < m; ++b) {
      for (int k = 0; k < n; ++k) G.at(n + a, n + b, k) = c.lv(a, b, k);
      for (int cc = 0; cc < m; ++cc) G.at(n + a, n + b, n + cc) = c.cv(a, b, cc);
    }
  return G;
}

// ---- distortion tensor -----------------------------------------------------

// Z relates the Levi-Civita connection to the canonical d-connection:
// Gamma(LC, N-adapted) = Gamma(canonical) + Z.  Stored [upper][tr][dir] using
// the same transported/direction convention as the connection arrays.
template <class T>
Gamma3<T> distortion_t(const DMetric& dm, std::span<const T> u, const ConnOptions& opt = {}) {
  assert(dm.shell_count() == 1);
  const int n = dm.n, m = dm.m();
  const auto e = eval_blocks(dm, u);
  const auto c = dconnection_from_blocks(e, ConnKind::canonical, opt);
  const auto Om = ncurvature_t(e);  // Om[a](i,j)
  auto dyN = [&](int b, int k, int a) { return e.Nd[static_cast<std::size_t>(n + b)](k, a); };
  // hat T^c_{ja} = L^c_{aj} - d_a N_j^c
  auto hatT = [&](int cc, int j, int a) { return c.lv(cc, a, j) - dyN(a, j, cc); };
  auto Xi_h = [&](int i, int hh, int j, int k) {  // Xi^{ih}_{jk}
    T r(0.0);
    if (i == j && hh == k) r = r + 0.5;
    r = r - 0.5 * e.g(j, k) * e.ginv(i, hh);
    return r;
  };
  auto Xi_v = [&](double sgn, int a, int b, int cc, int d) {  // +-Xi^{ab}_{cd}
    T r(0.0);
    if (a == cc && b == d) r = r + 0.5;
    r = r + (0.5 * sgn) * e.h(cc, d) * e.hinv(a, b);
    return r;
  };

  Gamma3<T> Z = Gamma3<T>::zero(n + m);
  // Z^a_{jk} = -C^i_{jb} g_ik h^{ab} - 1/2 Omega^a_{jk}
  for (int a = 0; a < m; ++a)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        T acc = -0.5 * Om[static_cast<std::size_t>(a)](j, k);
        for (int i = 0; i < n; ++i)
          for (int b = 0; b < m; ++b) acc = acc - c.ch(i, j, b) * e.g(i, k) * e.hinv(a, b);
        Z.at(n + a, j, k) = acc;
      }
  // Z^i_{bk} = 1/2 Omega^c_{jk} h_cb g^{ji} - Xi^{ih}_{jk} C^j_{hb}
  for (int i = 0; i < n; ++i)
    for (int b = 0; b < m; ++b)
      for (int k = 0; k < n; ++k) {
        T acc(0.0);
        for (int j = 0; j < n; ++j) {
          for (int cc = 0; cc < m; ++cc)
            acc = acc + 0.5 * Om[static_cast<std::size_t>(cc)](j, k) * e.h(cc, b) * e.ginv(j, i);
          for (int hh = 0; hh < n; ++hh) acc = acc - Xi_h(i, hh, j, k) * c.ch(j, hh, b);
        }
        Z.at(i, n + b, k) = acc;
      }
  // vertical upper, vertical transported, horizontal direction:
  // Z^a_{bk} = - -Xi^{ad}_{cb} hatT^c_{kd}
  for (int a = 0; a < m; ++a)
    for (int b = 0; b < m; ++b)
      for (int k = 0; k < n; ++k) {
        T acc(0.0);
        for (int cc = 0; cc < m; ++cc)
          for (int d = 0; d < m; ++d) acc = acc - Xi_v(-1.0, a, d, cc, b) * hatT(cc, k, d);
        Z.at(n + a, n + b, k) = acc;
      }
  // Z^i_{kb} = 1/2 Omega^c_{jk} h_cb g^{ji} + Xi^{ih}_{jk} C^j_{hb}
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k)
      for (int b = 0; b < m; ++b) {
        T acc(0.0);
        for (int j = 0; j < n; ++j) {
          for (int cc = 0; cc < m; ++cc)
            acc = acc + 0.5 * Om[static_cast<std::size_t>(cc)](j, k) * e.h(cc, b) * e.ginv(j, i);
          for (int hh = 0; hh < n; ++hh) acc = acc + Xi_h(i, hh, j, k) * c.ch(j, hh, b);
        }
        Z.at(i, k, n + b) = acc;
      }
  // vertical upper, horizontal transported, vertical direction:
  // Z^a_{jb} = +Xi^{ad}_{cb} hatT^c_{jd}
  for (int a = 0; a < m; ++a)
    for (int j = 0; j < n; ++j)
      for (int b = 0; b < m; ++b) {
        T acc(0.0);
        for (int cc = 0; cc < m; ++cc)
          for (int d = 0; d < m; ++d) acc = acc + Xi_v(+1.0, a, d, cc, b) * hatT(cc, j, d);
        Z.at(n + a, j, n + b) = acc;
      }
  // Z^i_{ab} = -g^{ij}/2 [ hatT^c_{ja} h_cb + hatT^c_{jb} h_ca ]
  for (int i = 0; i < n; ++i)
    for (int a = 0; a < m; ++a)
      for (int b = 0; b < m; ++b) {
        T acc(0.0);
        for (int j = 0; j < n; ++j) {
          T br(0.0);
          for (int cc = 0; cc < m; ++cc)
            br = br + hatT(cc, j, a) * e.h(cc, b) + hatT(cc, j, b) * e.h(cc, a);
          acc = acc - 0.5 * e.ginv(i, j) * br;
        }
        Z.at(i, n + a, n + b) = acc;
      }
  // Z^i_{jk} = 0 and Z^a_{bc} = 0
  return Z;
}

// ---- Levi-Civita coincidence conditions -----------------------------------

struct LcConditionNorms {
  double l_minus_dN = 0.0;  // max |L^c_{aj} - d_a N_j^c|
  double c_h = 0.0;         // max |C^i_{jb}|
  double omega = 0.0;       // max |Omega^a_{ji}|
};

inline LcConditionNorms check_lc_conditions(const DMetric& dm, const Eigen::VectorXd& u,
                                            const ConnOptions& opt = {}) {
  const auto su = to_std(u);
  const auto e = eval_blocks(dm, std::span<const double>(su.data(), su.size()));
  const auto c = dconnection_from_blocks(e, ConnKind::canonical, opt);
  const auto Om = ncurvature_t(e);
  LcConditionNorms r;
  for (int cc = 0; cc < e.m; ++cc)
    for (int a = 0; a < e.m; ++a)
      for (int j = 0; j < e.n; ++j)
        r.l_minus_dN = std::max(r.l_minus_dN,
                                std::abs(c.lv(cc, a, j) - e.Nd[static_cast<std::size_t>(e.n + a)](j, cc)));
  for (double x : c.Ch) r.c_h = std::max(r.c_h, std::abs(x));
  for (int a = 0; a < e.m; ++a)
    for (int i = 0; i < e.n; ++i)
      for (int j = 0; j < e.n; ++j)
        r.omega = std::max(r.omega, std::abs(Om[static_cast<std::size_t>(a)](i, j)));
  return r;
}

}  // namespace finsler
