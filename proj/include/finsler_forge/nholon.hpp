#pragma once

// Nonholonomic splitting of a manifold into a horizontal base and up to three
// vertical shells.  A DMetric stores the block coefficient fields g (h-block),
// h (one per shell) and the nonlinear-connection coefficients N, all as scalar
// fields over the full coordinate tuple.

#include <cassert>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "finsler_forge/field.hpp"
#include "finsler_forge/linalg.hpp"

namespace finsler {

class DMetric {
 public:
  int n = 0;                    // horizontal dimension
  std::vector<int> shells;      // vertical shell dimensions (1..3)
  // g: n*n fields (row-major, symmetric).  h[s]: m_s*m_s fields.
  std::vector<ScalarField> g;
  std::vector<std::vector<ScalarField>> h;
  // N[s]: offset(s) x m_s fields; N[s][src*m_s + t] is the coefficient of
  // du^src in the elongated coframe of target coordinate (shell s, index t).
  // src runs over all coordinates preceding shell s.
  std::vector<std::vector<ScalarField>> N;

  int shell_count() const { return static_cast<int>(shells.size()); }
  int shell_dim(int s) const { return shells[static_cast<std::size_t>(s)]; }
  int offset(int s) const {
    int o = n;
    for (int r = 0; r < s; ++r) o += shells[static_cast<std::size_t>(r)];
    return o;
  }
  int dim() const { return offset(shell_count()); }
  // single-shell convenience
  int m() const {
    assert(shell_count() == 1);
    return shells[0];
  }

  const ScalarField& g_at(int i, int j) const { return g[static_cast<std::size_t>(i) * n + j]; }
  const ScalarField& h_at(int s, int a, int b) const {
    return h[static_cast<std::size_t>(s)][static_cast<std::size_t>(a) * shell_dim(s) + b];
  }
  const ScalarField& N_at(int s, int src, int t) const {
    return N[static_cast<std::size_t>(s)][static_cast<std::size_t>(src) * shell_dim(s) + t];
  }

  static DMetric single_shell(int n, int m) {
    DMetric d;
    d.n = n;
    d.shells = {m};
    const int dim = n + m;
    d.g.assign(static_cast<std::size_t>(n) * n, constant_field(dim, 0.0));
    d.h.assign(1, std::vector<ScalarField>(static_cast<std::size_t>(m) * m, constant_field(dim, 0.0)));
    d.N.assign(1, std::vector<ScalarField>(static_cast<std::size_t>(n) * m, constant_field(dim, 0.0)));
    return d;
  }
};

// ---- generic block evaluation --------------------------------------------

// Values and first partial derivatives of all block fields at a point, for an
// arbitrary dual scalar T (single-shell metrics).
template <class T>
struct BlockEval {
  int n = 0, m = 0;
  Mat<T> g, h, Nc;                       // values: g n*n, h m*m, Nc n*m
  std::vector<Mat<T>> gd, hd, Nd;        // [mu] -> partial_mu of each block
  Mat<T> ginv, hinv;
};

template <class T>
void eval_with_grad(const ScalarField& f, const std::vector<Dual<T>>& su, T& val,
                    std::vector<T>& grad) {
  const Dual<T> r = f(su);
  val = r.v;
  const std::size_t dim = su.size();
  grad.assign(dim, T(0.0));
  if (!r.d.empty())
    for (std::size_t mu = 0; mu < dim; ++mu) grad[mu] = r.d[mu];
}

template <class T>
BlockEval<T> eval_blocks(const DMetric& dm, std::span<const T> u) {
  assert(dm.shell_count() == 1);
  const int n = dm.n, m = dm.m(), dim = dm.dim();
  BlockEval<T> e;
  e.n = n;
  e.m = m;
  e.g = Mat<T>(n, n);
  e.h = Mat<T>(m, m);
  e.Nc = Mat<T>(n, m);
  e.gd.assign(dim, Mat<T>(n, n));
  e.hd.assign(dim, Mat<T>(m, m));
  e.Nd.assign(dim, Mat<T>(n, m));

  const auto su = seed(std::vector<T>(u.begin(), u.end()));
  std::vector<T> grad;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      eval_with_grad(dm.g_at(i, j), su, e.g(i, j), grad);
      for (int mu = 0; mu < dim; ++mu) e.gd[mu](i, j) = grad[mu];
    }
  for (int a = 0; a < m; ++a)
    for (int b = 0; b < m; ++b) {
      eval_with_grad(dm.h_at(0, a, b), su, e.h(a, b), grad);
      for (int mu = 0; mu < dim; ++mu) e.hd[mu](a, b) = grad[mu];
    }
  for (int i = 0; i < n; ++i)
    for (int a = 0; a < m; ++a) {
      eval_with_grad(dm.N_at(0, i, a), su, e.Nc(i, a), grad);
      for (int mu = 0; mu < dim; ++mu) e.Nd[mu](i, a) = grad[mu];
    }
  e.ginv = invert(e.g);
  e.hinv = invert(e.h);
  return e;
}

// N-adapted horizontal derivative of block entries: e_k f = d_k f - N_k^a d_a f.
template <class T, class Getter>
T eadapt_h(const BlockEval<T>& e, int k, Getter dmu) {
  T r = dmu(k);
  for (int a = 0; a < e.m; ++a) r = r - e.Nc(k, a) * dmu(e.n + a);
  return r;
}

// ---- frames ---------------------------------------------------------------

struct FramePack {
  Eigen::MatrixXd frame;    // column alpha = components of e_alpha in d/du basis
  Eigen::MatrixXd coframe;  // row alpha = components of e^alpha in du basis
};

// N-adapted frame: e_i = d_i - N_i^a d_a, e_a = d_a; coframe e^i = dx^i,
// e^a = dy^a + N_i^a dx^i.  Multi-shell: coframe of a target coordinate is
// elongated by all stored N coefficients (plain-differential convention).
inline FramePack adapted_frames(const DMetric& dm, const Eigen::VectorXd& u) {
  const int dim = dm.dim();
  Eigen::MatrixXd theta = Eigen::MatrixXd::Identity(dim, dim);
  const auto su = to_std(u);
  for (int s = 0; s < dm.shell_count(); ++s) {
    const int off = dm.offset(s);
    for (int t = 0; t < dm.shell_dim(s); ++t)
      for (int src = 0; src < off; ++src)
        theta(off + t, src) = dm.N_at(s, src, t)(su);
  }
  FramePack fp;
  fp.coframe = theta;
  fp.frame = theta.inverse().eval();  // lower triangular with unit diagonal
  return fp;
}

// Anholonomy coefficients W^gamma_{alpha beta} with
// [e_alpha, e_beta] = W^gamma_{alpha beta} e_gamma, computed from the frame
// fields by forward-mode differentiation.
inline std::vector<Eigen::MatrixXd> anholonomy(const DMetric& dm, const Eigen::VectorXd& u) {
  const int dim = dm.dim();
  // frame matrix as a function of position (value + first derivatives)
  std::vector<Eigen::MatrixXd> A(static_cast<std::size_t>(dim) + 1);  // [0]=value, [1+mu]=d_mu A
  {
    const auto su = seed(to_std(u));
    Eigen::MatrixXd theta_v = Eigen::MatrixXd::Identity(dim, dim);
    std::vector<Eigen::MatrixXd> theta_d(static_cast<std::size_t>(dim),
                                         Eigen::MatrixXd::Zero(dim, dim));
    for (int s = 0; s < dm.shell_count(); ++s) {
      const int off = dm.offset(s);
      for (int t = 0; t < dm.shell_dim(s); ++t)
        for (int src = 0; src < off; ++src) {
          const D1 r = dm.N_at(s, src, t)(su);
          theta_v(off + t, src) = r.v;
          if (!r.d.empty())
            for (int mu = 0; mu < dim; ++mu) theta_d[static_cast<std::size_t>(mu)](off + t, src) = r.d[mu];
        }
    }
    const Eigen::MatrixXd Av = theta_v.inverse();
    A[0] = Av;
    // d(theta^{-1}) = -theta^{-1} (d theta) theta^{-1}
    for (int mu = 0; mu < dim; ++mu)
      A[static_cast<std::size_t>(mu) + 1] = -Av * theta_d[static_cast<std::size_t>(mu)] * Av;
  }
  const Eigen::MatrixXd B = A[0].inverse();  // coframe matrix
  std::vector<Eigen::MatrixXd> W(static_cast<std::size_t>(dim),
                                 Eigen::MatrixXd::Zero(dim, dim));  // W[gamma](alpha,beta)
  for (int al = 0; al < dim; ++al)
    for (int be = 0; be < dim; ++be) {
      Eigen::VectorXd bracket = Eigen::VectorXd::Zero(dim);
      for (int nu = 0; nu < dim; ++nu)
        bracket += A[0](nu, al) * A[static_cast<std::size_t>(nu) + 1].col(be) -
                   A[0](nu, be) * A[static_cast<std::size_t>(nu) + 1].col(al);
      const Eigen::VectorXd w = B * bracket;
      for (int ga = 0; ga < dim; ++ga) W[static_cast<std::size_t>(ga)](al, be) = w[ga];
    }
  return W;
}

// N-connection curvature Omega^a_{ij} = e_j(N_i^a) - e_i(N_j^a) for a
// single-shell metric; returned as Omega[a](i,j).
template <class T>
std::vector<Mat<T>> ncurvature_t(const BlockEval<T>& e) {
  std::vector<Mat<T>> Om(static_cast<std::size_t>(e.m), Mat<T>(e.n, e.n));
  for (int a = 0; a < e.m; ++a)
    for (int i = 0; i < e.n; ++i)
      for (int j = 0; j < e.n; ++j)
        Om[static_cast<std::size_t>(a)](i, j) =
            eadapt_h(e, j, [&](int mu) { return e.Nd[static_cast<std::size_t>(mu)](i, a); }) -
            eadapt_h(e, i, [&](int mu) { return e.Nd[static_cast<std::size_t>(mu)](j, a); });
  return Om;
}

inline std::vector<Eigen::MatrixXd> ncurvature(const DMetric& dm, const Eigen::VectorXd& u) {
  const auto su = to_std(u);
  const auto e = eval_blocks(dm, std::span<const double>(su.data(), su.size()));
  const auto Om = ncurvature_t(e);
  std::vector<Eigen::MatrixXd> out(static_cast<std::size_t>(e.m));
  for (int a = 0; a < e.m; ++a) {
    out[static_cast<std::size_t>(a)] = Eigen::MatrixXd::Zero(e.n, e.n);
    for (int i = 0; i < e.n; ++i)
      for (int j = 0; j < e.n; ++j) out[static_cast<std::size_t>(a)](i, j) = Om[static_cast<std::size_t>(a)](i, j);
  }
  return out;
}

// Assembled off-diagonal metric in the coordinate basis:
// \hat g = Theta^T blockdiag(g, h_0, ...) Theta with Theta the elongated
// coframe matrix.  For one shell this is [[g + N h N^T, N h], [h N^T, h]].
inline Eigen::MatrixXd assemble_offdiagonal(const DMetric& dm, const Eigen::VectorXd& u) {
  const int dim = dm.dim();
  const auto su = to_std(u);
  Eigen::MatrixXd blockdiag = Eigen::MatrixXd::Zero(dim, dim);
  for (int i = 0; i < dm.n; ++i)
    for (int j = 0; j < dm.n; ++j) blockdiag(i, j) = dm.g_at(i, j)(su);
  for (int s = 0; s < dm.shell_count(); ++s) {
    const int off = dm.offset(s);
    for (int a = 0; a < dm.shell_dim(s); ++a)
      for (int b = 0; b < dm.shell_dim(s); ++b) blockdiag(off + a, off + b) = dm.h_at(s, a, b)(su);
  }
  const FramePack fp = adapted_frames(dm, u);
  return fp.coframe.transpose() * blockdiag * fp.coframe;
}

// N-adapted derivatives e_alpha(f) of a scalar field at u (single shell).
inline Eigen::VectorXd nadapted_derivative(const DMetric& dm, const ScalarField& f,
                                           const Eigen::VectorXd& u) {
  const Eigen::VectorXd df = field_gradient(f, u);
  const FramePack fp = adapted_frames(dm, u);
  return fp.frame.transpose() * df;  // (e_alpha)^mu d_mu f
}

}  // namespace finsler
