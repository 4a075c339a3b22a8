#pragma once

// Torsion, curvature, Ricci blocks, scalar curvature, Einstein d-tensor and
// nonmetricity for d-connections on a single-shell DMetric, plus the
// coordinate-frame Levi-Civita curvature of the assembled metric.

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "finsler_forge/dconn.hpp"

namespace finsler {

struct CurvOptions {
  ConnOptions conn;
  // Evaluate the mixed-curvature torsion term exactly as printed (with the
  // dangling contraction C^c_{bd} T^c_{ka}, the free index d summed) instead
  // of the structural reading C^c_{bd} T^d_{ka}.
  bool literal_mixed_torsion = false;
};

// ---- torsion ---------------------------------------------------------------

template <class T>
struct DTorsion {
  int n = 0, m = 0;
  std::vector<T> Tijk;  // T^i_{jk} = L^i_{jk} - L^i_{kj}
  std::vector<T> Tija;  // T^i_{ja} = C^i_{ja}
  std::vector<T> Taji;  // T^a_{ji} = Omega^a_{ji}
  std::vector<T> Tabi;  // T^a_{bi} = dN_i^a/dy^b - L^a_{bi}
  std::vector<T> Tabc;  // T^a_{bc} = C^a_{bc} - C^a_{cb}

  T& tijk(int i, int j, int k) { return Tijk[(static_cast<std::size_t>(i) * n + j) * n + k]; }
  T& tija(int i, int j, int a) { return Tija[(static_cast<std::size_t>(i) * n + j) * m + a]; }
  T& taji(int a, int j, int i) { return Taji[(static_cast<std::size_t>(a) * n + j) * n + i]; }
  T& tabi(int a, int b, int i) { return Tabi[(static_cast<std::size_t>(a) * m + b) * n + i]; }
  T& tabc(int a, int b, int c) { return Tabc[(static_cast<std::size_t>(a) * m + b) * m + c]; }
  const T& tabi(int a, int b, int i) const {
    return Tabi[(static_cast<std::size_t>(a) * m + b) * n + i];
  }
};

template <class T>
DTorsion<T> dtorsion_from_blocks(const BlockEval<T>& e, const ConnCoeffs<T>& c) {
  const int n = e.n, m = e.m;
  DTorsion<T> t;
  t.n = n;
  t.m = m;
  t.Tijk.assign(static_cast<std::size_t>(n) * n * n, T(0.0));
  t.Tija.assign(static_cast<std::size_t>(n) * n * m, T(0.0));
  t.Taji.assign(static_cast<std::size_t>(m) * n * n, T(0.0));
  t.Tabi.assign(static_cast<std::size_t>(m) * m * n, T(0.0));
  t.Tabc.assign(static_cast<std::size_t>(m) * m * m, T(0.0));
  const auto Om = ncurvature_t(e);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) t.tijk(i, j, k) = c.lh(i, j, k) - c.lh(i, k, j);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int a = 0; a < m; ++a) t.tija(i, j, a) = c.ch(i, j, a);
  for (int a = 0; a < m; ++a)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) t.taji(a, j, i) = Om[static_cast<std::size_t>(a)](j, i);
  for (int a = 0; a < m; ++a)
    for (int b = 0; b < m; ++b)
      for (int i = 0; i < n; ++i)
        t.tabi(a, b, i) = e.Nd[static_cast<std::size_t>(n + b)](i, a) - c.lv(a, b, i);
  for (int a = 0; a < m; ++a)
    for (int b = 0; b < m; ++b)
      for (int cc = 0; cc < m; ++cc) t.tabc(a, b, cc) = c.cv(a, b, cc) - c.cv(a, cc, b);
  return t;
}

template <class T>
DTorsion<T> dtorsion_t(const DMetric& dm, ConnKind kind, std::span<const T> u,
                       const ConnOptions& opt = {}) {
  const auto e = eval_blocks(dm, u);
  return dtorsion_from_blocks(e, dconnection_from_blocks(e, kind, opt));
}

// ---- curvature -------------------------------------------------------------

template <class T>
struct DCurvature {
  int n = 0, m = 0;
  // family arrays, flattened in the printed index order
  std::vector<T> R1;  // R^i_{hjk} : n n n n
  std::vector<T> R2;  // R^a_{bjk} : m m n n
  std::vector<T> R3;  // R^i_{jka} : n n n m
  std::vector<T> R4;  // R^c_{bka} : m m n m
  std::vector<T> R5;  // R^i_{jbc} : n n m m
  std::vector<T> R6;  // R^a_{bcd} : m m m m

  T& r1(int i, int h, int j, int k) {
    return R1[((static_cast<std::size_t>(i) * n + h) * n + j) * n + k];
  }
  T& r2(int a, int b, int j, int k) {
    return R2[((static_cast<std::size_t>(a) * m + b) * n + j) * n + k];
  }
  T& r3(int i, int j, int k, int a) {
    return R3[((static_cast<std::size_t>(i) * n + j) * n + k) * m + a];
  }
  T& r4(int c, int b, int k, int a) {
    return R4[((static_cast<std::size_t>(c) * m + b) * n + k) * m + a];
  }
  T& r5(int i, int j, int b, int c) {
    return R5[((static_cast<std::size_t>(i) * n + j) * m + b) * m + c];
  }
  T& r6(int a, int b, int c, int d) {
    return R6[((static_cast<std::size_t>(a) * m + b) * m + c) * m + d];
  }
};

// Connection coefficients together with their N-adapted first derivatives,
// obtained by one dual level over the whole coefficient evaluation.
template <class T>
struct ConnWithDerivs {
  ConnCoeffs<T> c;
  // derivative arrays: index layout of the base array x direction mu (coord)
  std::vector<std::vector<T>> dLh, dLv, dCh, dCv;  // [mu][flat]
};

template <class T>
ConnWithDerivs<T> dconnection_with_derivs(const DMetric& dm, ConnKind kind, std::span<const T> u,
                                          const ConnOptions& opt) {
  const int dim = dm.dim();
  const auto su = seed(std::vector<T>(u.begin(), u.end()));
  const auto cd = dconnection_t(dm, kind, std::span<const Dual<T>>(su.data(), su.size()), opt);
  ConnWithDerivs<T> r;
  r.c.n = cd.n;
  r.c.m = cd.m;
  auto split = [dim](const std::vector<Dual<T>>& src, std::vector<T>& val,
                     std::vector<std::vector<T>>& der) {
    val.assign(src.size(), T(0.0));
    der.assign(static_cast<std::size_t>(dim), std::vector<T>(src.size(), T(0.0)));
    for (std::size_t q = 0; q < src.size(); ++q) {
      val[q] = src[q].v;
      if (!src[q].d.empty())
        for (int mu = 0; mu < dim; ++mu) der[static_cast<std::size_t>(mu)][q] = src[q].d[mu];
    }
  };
  split(cd.Lh, r.c.Lh, r.dLh);
  split(cd.Lv, r.c.Lv, r.dLv);
  split(cd.Ch, r.c.Ch, r.dCh);
  split(cd.Cv, r.c.Cv, r.dCv);
  return r;
}

template <class T>
DCurvature<T> dcurvature_t(const DMetric& dm, ConnKind kind, std::span<const T> u,
                           const CurvOptions& opt = {}) {
  const int n = dm.n, m = dm.m();
  const auto e = eval_blocks(dm, u);
  const auto Om = ncurvature_t(e);
  const auto cw = dconnection_with_derivs(dm, kind, u, opt.conn);
  const ConnCoeffs<T>& c = cw.c;
  const auto t = dtorsion_from_blocks(e, c);

  // N-adapted derivative of a connection coefficient by flat index
  auto eh = [&](int k, const std::vector<std::vector<T>>& der, std::size_t q) {
    T r = der[static_cast<std::size_t>(k)][q];
    for (int a = 0; a < m; ++a) r = r - e.Nc(k, a) * der[static_cast<std::size_t>(n + a)][q];
    return r;
  };
  auto ev = [&](int a, const std::vector<std::vector<T>>& der, std::size_t q) {
    return der[static_cast<std::size_t>(n + a)][q];
  };
  auto qlh = [n](int i, int j, int k) { return (static_cast<std::size_t>(i) * n + j) * n + k; };
  auto qlv = [n, m](int a, int b, int k) { return (static_cast<std::size_t>(a) * m + b) * n + k; };
  auto qch = [n, m](int i, int j, int cc) { return (static_cast<std::size_t>(i) * n + j) * m + cc; };
  auto qcv = [m](int a, int b, int cc) { return (static_cast<std::size_t>(a) * m + b) * m + cc; };

  DCurvature<T> R;
  R.n = n;
  R.m = m;
  R.R1.assign(static_cast<std::size_t>(n) * n * n * n, T(0.0));
  R.R2.assign(static_cast<std::size_t>(m) * m * n * n, T(0.0));
  R.R3.assign(static_cast<std::size_t>(n) * n * n * m, T(0.0));
  R.R4.assign(static_cast<std::size_t>(m) * m * n * m, T(0.0));
  R.R5.assign(static_cast<std::size_t>(n) * n * m * m, T(0.0));
  R.R6.assign(static_cast<std::size_t>(m) * m * m * m, T(0.0));

  // R^i_{hjk} = e_k L^i_{hj} - e_j L^i_{hk} + L^m_{hj}L^i_{mk} - L^m_{hk}L^i_{mj}
  //             - C^i_{ha} Omega^a_{kj}
  for (int i = 0; i < n; ++i)
    for (int hh = 0; hh < n; ++hh)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) {
          T acc = eh(k, cw.dLh, qlh(i, hh, j)) - eh(j, cw.dLh, qlh(i, hh, k));
          for (int mm = 0; mm < n; ++mm)
            acc = acc + c.lh(mm, hh, j) * c.lh(i, mm, k) - c.lh(mm, hh, k) * c.lh(i, mm, j);
          for (int a = 0; a < m; ++a)
            acc = acc - c.ch(i, hh, a) * Om[static_cast<std::size_t>(a)](k, j);
          R.r1(i, hh, j, k) = acc;
        }
  // R^a_{bjk}
  for (int a = 0; a < m; ++a)
    for (int b = 0; b < m; ++b)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) {
          T acc = eh(k, cw.dLv, qlv(a, b, j)) - eh(j, cw.dLv, qlv(a, b, k));
          for (int cc = 0; cc < m; ++cc)
            acc = acc + c.lv(cc, b, j) * c.lv(a, cc, k) - c.lv(cc, b, k) * c.lv(a, cc, j);
          for (int cc = 0; cc < m; ++cc)
            acc = acc - c.cv(a, b, cc) * Om[static_cast<std::size_t>(cc)](k, j);
          R.r2(a, b, j, k) = acc;
        }
  // covariant h-derivatives of C entering the mixed families:
  // D_k C^i_{ja} = e_k C^i_{ja} + L^i_{mk}C^m_{ja} - L^m_{jk}C^i_{ma} - L^b_{ak}C^i_{jb}
  auto DkCh = [&](int k, int i, int j, int a) {
    T acc = eh(k, cw.dCh, qch(i, j, a));
    for (int mm = 0; mm < n; ++mm)
      acc = acc + c.lh(i, mm, k) * c.ch(mm, j, a) - c.lh(mm, j, k) * c.ch(i, mm, a);
    for (int b = 0; b < m; ++b) acc = acc - c.lv(b, a, k) * c.ch(i, j, b);
    return acc;
  };
  auto DkCv = [&](int k, int cc, int b, int a) {
    T acc = eh(k, cw.dCv, qcv(cc, b, a));
    for (int d = 0; d < m; ++d)
      acc = acc + c.lv(cc, d, k) * c.cv(d, b, a) - c.lv(d, b, k) * c.cv(cc, d, a) -
            c.lv(d, a, k) * c.cv(cc, b, d);
    return acc;
  };
  // mixed torsion with lower pair (k, a): T^b_{ka} = T^b_{ak} = dN_k^b/dy^a - L^b_{ak}
  auto Tmix = [&](int b, int k, int a) { return t.tabi(b, a, k); };

  // R^i_{jka} = e_a L^i_{jk} - D_k C^i_{ja} + C^i_{jb} T^b_{ka}
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int a = 0; a < m; ++a) {
          T acc = ev(a, cw.dLh, qlh(i, j, k)) - DkCh(k, i, j, a);
          for (int b = 0; b < m; ++b) acc = acc + c.ch(i, j, b) * Tmix(b, k, a);
          R.r3(i, j, k, a) = acc;
        }
  // R^c_{bka} = e_a L^c_{bk} - D_k C^c_{ba} + C^c_{bd} T^d_{ka}
  // (structural contraction; the literal switch reproduces the printed
  //  dangling-index form C^c_{bd} T^c_{ka} with d summed out)
  for (int cc = 0; cc < m; ++cc)
    for (int b = 0; b < m; ++b)
      for (int k = 0; k < n; ++k)
        for (int a = 0; a < m; ++a) {
          T acc = ev(a, cw.dLv, qlv(cc, b, k)) - DkCv(k, cc, b, a);
          if (!opt.literal_mixed_torsion) {
            for (int d = 0; d < m; ++d) acc = acc + c.cv(cc, b, d) * Tmix(d, k, a);
          } else {
            T csum(0.0);
            for (int d = 0; d < m; ++d) csum = csum + c.cv(cc, b, d);
            acc = acc + csum * Tmix(cc, k, a);
          }
          R.r4(cc, b, k, a) = acc;
        }
  // R^i_{jbc}
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int b = 0; b < m; ++b)
        for (int cc = 0; cc < m; ++cc) {
          T acc = ev(cc, cw.dCh, qch(i, j, b)) - ev(b, cw.dCh, qch(i, j, cc));
          for (int hh = 0; hh < n; ++hh)
            acc = acc + c.ch(hh, j, b) * c.ch(i, hh, cc) - c.ch(hh, j, cc) * c.ch(i, hh, b);
          R.r5(i, j, b, cc) = acc;
        }
  // R^a_{bcd}
  for (int a = 0; a < m; ++a)
    for (int b = 0; b < m; ++b)
      for (int cc = 0; cc < m; ++cc)
        for (int d = 0; d < m; ++d) {
          T acc = ev(d, cw.dCv, qcv(a, b, cc)) - ev(cc, cw.dCv, qcv(a, b, d));
          for (int ee = 0; ee < m; ++ee)
            acc = acc + c.cv(ee, b, cc) * c.cv(a, ee, d) - c.cv(ee, b, d) * c.cv(a, ee, cc);
          R.r6(a, b, cc, d) = acc;
        }
  return R;
}

// ---- Ricci, scalar, Einstein ----------------------------------------------

struct CurvaturePack {
  int n = 0, m = 0;
  Eigen::MatrixXd ricci;     // blocks: R_ij = R^k_{ijk}, R_ia = -R^k_{ika},
                             //         R_ai = R^b_{aib}, R_ab = R^c_{abc}
  double scalar_h = 0.0;     // R = g^{ij} R_ij
  double scalar_v = 0.0;     // S = h^{ab} R_ab
  double scalar = 0.0;       // sR = R + S
  Eigen::MatrixXd einstein;  // E = Ric - 1/2 sR * diag(g, h) (N-adapted basis)
};

inline CurvaturePack curvature_pack(const DMetric& dm, ConnKind kind, const Eigen::VectorXd& u,
                                    const CurvOptions& opt = {}) {
  const int n = dm.n, m = dm.m(), dim = n + m;
  const auto su = to_std(u);
  const std::span<const double> us(su.data(), su.size());
  auto Rf = dcurvature_t(dm, kind, us, opt);
  const auto e = eval_blocks(dm, us);

  CurvaturePack p;
  p.n = n;
  p.m = m;
  p.ricci = Eigen::MatrixXd::Zero(dim, dim);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int k = 0; k < n; ++k) acc += Rf.r1(k, i, j, k);
      p.ricci(i, j) = acc;
    }
  for (int i = 0; i < n; ++i)
    for (int a = 0; a < m; ++a) {
      double acc = 0.0;
      for (int k = 0; k < n; ++k) acc += Rf.r3(k, i, k, a);
      p.ricci(i, n + a) = -acc;  // R_ia = -R^k_{ika}
    }
  for (int a = 0; a < m; ++a)
    for (int i = 0; i < n; ++i) {
      double acc = 0.0;
      for (int b = 0; b < m; ++b) acc += Rf.r4(b, a, i, b);
      p.ricci(n + a, i) = acc;  // R_ai = R^b_{aib}
    }
  for (int a = 0; a < m; ++a)
    for (int b = 0; b < m; ++b) {
      double acc = 0.0;
      for (int cc = 0; cc < m; ++cc) acc += Rf.r6(cc, a, b, cc);
      p.ricci(n + a, n + b) = acc;
    }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) p.scalar_h += e.ginv(i, j) * p.ricci(i, j);
  for (int a = 0; a < m; ++a)
    for (int b = 0; b < m; ++b) p.scalar_v += e.hinv(a, b) * p.ricci(n + a, n + b);
  p.scalar = p.scalar_h + p.scalar_v;

  Eigen::MatrixXd gfull = Eigen::MatrixXd::Zero(dim, dim);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) gfull(i, j) = e.g(i, j);
  for (int a = 0; a < m; ++a)
    for (int b = 0; b < m; ++b) gfull(n + a, n + b) = e.h(a, b);
  p.einstein = p.ricci - 0.5 * p.scalar * gfull;
  return p;
}

// ---- nonmetricity Q = D g --------------------------------------------------

// max |D_gamma g_alphabeta| over all N-adapted components.
inline double nonmetricity_max(const DMetric& dm, ConnKind kind, const Eigen::VectorXd& u,
                               const ConnOptions& opt = {}) {
  const int n = dm.n, m = dm.m();
  const auto su = to_std(u);
  const auto e = eval_blocks(dm, std::span<const double>(su.data(), su.size()));
  const auto c = dconnection_from_blocks(e, kind, opt);
  auto eg = [&](int k, int i, int j) {
    return eadapt_h(e, k, [&](int mu) { return e.gd[static_cast<std::size_t>(mu)](i, j); });
  };
  auto ehh = [&](int k, int a, int b) {
    return eadapt_h(e, k, [&](int mu) { return e.hd[static_cast<std::size_t>(mu)](a, b); });
  };
  double q = 0.0;
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double acc = eg(k, i, j);
        for (int mm = 0; mm < n; ++mm)
          acc -= c.lh(mm, i, k) * e.g(mm, j) + c.lh(mm, j, k) * e.g(i, mm);
        q = std::max(q, std::abs(acc));
      }
  for (int k = 0; k < n; ++k)
    for (int a = 0; a < m; ++a)
      for (int b = 0; b < m; ++b) {
        double acc = ehh(k, a, b);
        for (int cc = 0; cc < m; ++cc)
          acc -= c.lv(cc, a, k) * e.h(cc, b) + c.lv(cc, b, k) * e.h(a, cc);
        q = std::max(q, std::abs(acc));
      }
  for (int cc = 0; cc < m; ++cc)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double acc = e.gd[static_cast<std::size_t>(n + cc)](i, j);
        for (int mm = 0; mm < n; ++mm)
          acc -= c.ch(mm, i, cc) * e.g(mm, j) + c.ch(mm, j, cc) * e.g(i, mm);
        q = std::max(q, std::abs(acc));
      }
  for (int cc = 0; cc < m; ++cc)
    for (int a = 0; a < m; ++a)
      for (int b = 0; b < m; ++b) {
        double acc = e.hd[static_cast<std::size_t>(n + cc)](a, b);
        for (int d = 0; d < m; ++d)
          acc -= c.cv(d, a, cc) * e.h(d, b) + c.cv(d, b, cc) * e.h(a, d);
        q = std::max(q, std::abs(acc));
      }
  return q;
}

// ---- coordinate-frame Levi-Civita curvature of the assembled metric -------

struct CoordCurvature {
  Eigen::MatrixXd ricci;
  double scalar = 0.0;
  Eigen::MatrixXd einstein;
};

inline CoordCurvature lc_coordinate_curvature(const DMetric& dm, const Eigen::VectorXd& u) {
  const int dim = dm.dim();
  const auto su = to_std(u);
  // Christoffels with one more dual level for their coordinate derivatives
  const auto seeded = seed(su);
  const auto Gd = levi_civita_coord_t(dm, std::span<const D1>(seeded.data(), seeded.size()));
  Gamma3<double> G = Gamma3<double>::zero(dim);
  std::vector<Gamma3<double>> dG(static_cast<std::size_t>(dim), Gamma3<double>::zero(dim));
  for (std::size_t q = 0; q < Gd.a.size(); ++q) {
    G.a[q] = Gd.a[q].v;
    if (!Gd.a[q].d.empty())
      for (int mu = 0; mu < dim; ++mu) dG[static_cast<std::size_t>(mu)].a[q] = Gd.a[q].d[mu];
  }
  // Ricci_{sn} = d_mu Gamma^mu_{sn} - d_n Gamma^mu_{s mu} + G G - G G
  Eigen::MatrixXd ric = Eigen::MatrixXd::Zero(dim, dim);
  for (int s = 0; s < dim; ++s)
    for (int nu = 0; nu < dim; ++nu) {
      double acc = 0.0;
      for (int mu = 0; mu < dim; ++mu) {
        acc += dG[static_cast<std::size_t>(mu)].at(mu, s, nu) -
               dG[static_cast<std::size_t>(nu)].at(mu, s, mu);
        for (int la = 0; la < dim; ++la)
          acc += G.at(mu, la, mu) * G.at(la, s, nu) - G.at(mu, la, nu) * G.at(la, s, mu);
      }
      ric(s, nu) = acc;
    }
  const std::span<const double> us(su.data(), su.size());
  const Mat<double> gm = assemble_t(dm, us);
  Eigen::MatrixXd g(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) g(i, j) = gm(i, j);
  const Eigen::MatrixXd ginv = invert_symmetric(g);
  CoordCurvature r;
  r.ricci = ric;
  r.scalar = (ginv * ric).trace();
  r.einstein = ric - 0.5 * r.scalar * g;
  return r;
}

}  // namespace finsler
