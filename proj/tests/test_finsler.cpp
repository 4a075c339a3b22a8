#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "finsler_forge/finsler.hpp"

using namespace finsler;

namespace {

// quartic deformation used across the suite:
// F^2 = (y1^2 + y2^2) + q (y1)^4 / (y1^2 + y2^2), q = 0.01
FinslerFunction quartic(double qc = 0.01) {
  std::vector<DeformTerm> q;
  q.push_back({{0, 0, 0, 0}, 2.0 * qc});  // (1/r) factor with r=2 gives qc (y1)^4 / Q
  return deformed(2, Eigen::MatrixXd::Identity(2, 2), q, false);
}

double fd2_f2(const FinslerFunction& fin, Eigen::VectorXd u, int a, int b, double h = 1e-4) {
  auto val = [&](Eigen::VectorXd w) { return fin.f2(to_std(w)); };
  Eigen::VectorXd pp = u, pm = u, mp = u, mm = u;
  pp[a] += h;
  pp[b] += h;
  pm[a] += h;
  pm[b] -= h;
  mp[a] -= h;
  mp[b] += h;
  mm[a] -= h;
  mm[b] -= h;
  return (val(pp) - val(pm) - val(mp) + val(mm)) / (4 * h * h);
}

}  // namespace

TEST_CASE("hessian metric of the quartic matches finite differences") {
  const auto fin = quartic();
  Eigen::VectorXd u(4);
  u << 0.3, -0.2, 1.0, 2.0;
  const Eigen::MatrixXd g = hessian_metric(fin, u);
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      CHECK(g(a, b) == doctest::Approx(0.5 * fd2_f2(fin, u, 2 + a, 2 + b)).epsilon(1e-6));
  CHECK((g - g.transpose()).norm() == 0.0);
}

TEST_CASE("F^2 homogeneity and Euler identity") {
  const auto fin = quartic();
  Eigen::VectorXd u(4), u2(4);
  u << 0.1, 0.4, 0.8, -1.3;
  u2 = u;
  u2.tail(2) *= 2.5;
  // degree-2 homogeneity of F^2
  CHECK(fin.f2(to_std(u2)) == doctest::Approx(2.5 * 2.5 * fin.f2(to_std(u))).epsilon(1e-13));
  // hessian metric is 0-homogeneous in y
  const Eigen::MatrixXd g = hessian_metric(fin, u);
  const Eigen::MatrixXd g2 = hessian_metric(fin, u2);
  CHECK((g - g2).cwiseAbs().maxCoeff() < 1e-12);
  // Euler: F^2 = g_ab y^a y^b
  const Eigen::Vector2d y(u[2], u[3]);
  CHECK(fin.f2(to_std(u)) == doctest::Approx(y.dot(g * y)).epsilon(1e-13));
}

TEST_CASE("bogoslovsky catalog values") {
  // b = 0 collapses to the quadratic form
  const auto f0 = bogoslovsky(0.0, Eigen::Vector4d(1, 0, 0, 1));
  std::vector<double> u = {0, 0, 0, 0, 2.0, 0.3, -0.4, 1.0};
  const double eta = 2.0 * 2.0 - 0.3 * 0.3 - 0.4 * 0.4 - 1.0 * 1.0;
  CHECK(f0.f2(u) == doctest::Approx(eta).epsilon(1e-13));
  // b = 0.2 at y = (2,0,0,1): F = 3^{0.4} * 1^{0.2}
  const auto fb = bogoslovsky(0.2, Eigen::Vector4d(1, 0, 0, 1));
  std::vector<double> w = {0, 0, 0, 0, 2.0, 0.0, 0.0, 1.0};
  const double F = std::sqrt(fb.f2(w));
  CHECK(F == doctest::Approx(std::pow(3.0, 0.4)).epsilon(1e-12));
  // vanishing base form raises a domain error
  std::vector<double> nullv = {0, 0, 0, 0, 1.0, 1.0, 0.0, 0.0};
  CHECK_THROWS_AS((void)fb.f2(nullv), FinslerDomainError);
}

TEST_CASE("deformed(r=1, q=0) reduces to the quadratic metric") {
  const auto fin = deformed(1, Eigen::MatrixXd::Identity(3, 3), {}, true);
  std::vector<double> u = {0, 0, 0, 0, 0.5, 1.0, 2.0, 3.0};
  CHECK(fin.f2(u) == doctest::Approx(-0.25 + 1.0 + 4.0 + 9.0).epsilon(1e-13));
}

TEST_CASE("semi-spray of a quadratic generating function matches Christoffel oracle") {
  // g(x) = diag(1 + x0^2, exp(x1)) on a 2-d base
  std::vector<ScalarField> gx(4);
  gx[0] = make_field(2, [](auto u) { return 1.0 + u[0] * u[0]; });
  gx[1] = constant_field(2, 0.0);
  gx[2] = constant_field(2, 0.0);
  gx[3] = make_field(2, [](auto u) {
    using std::exp;
    return exp(u[1]);
  });
  const auto fin = riemann_quadratic(2, gx);
  Eigen::VectorXd u(4);
  u << 0.4, -0.7, 1.2, 0.5;
  // Christoffels of g at x, via jets of the metric entry fields
  Eigen::VectorXd x = u.head(2);
  Eigen::MatrixXd gv(2, 2);
  std::vector<Eigen::MatrixXd> dg(2, Eigen::MatrixXd::Zero(2, 2));
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      gv(i, j) = field_value(gx[i * 2 + j], x);
      const Eigen::VectorXd gr = field_gradient(gx[i * 2 + j], x);
      for (int k = 0; k < 2; ++k) dg[k](i, j) = gr[k];
    }
  const Eigen::MatrixXd ginv = gv.inverse();
  auto gamma = [&](int a, int b, int c) {
    double acc = 0.0;
    for (int r = 0; r < 2; ++r) acc += ginv(a, r) * (dg[b](r, c) + dg[c](r, b) - dg[r](b, c));
    return 0.5 * acc;
  };
  const Eigen::Vector2d y(u[2], u[3]);
  const auto G = semispray(fin, u);
  for (int a = 0; a < 2; ++a) {
    double expect = 0.0;
    for (int b = 0; b < 2; ++b)
      for (int c = 0; c < 2; ++c) expect += gamma(a, b, c) * y[b] * y[c];
    CHECK(G[a] == doctest::Approx(0.5 * expect).epsilon(1e-9));
  }
  // Cartan N-connection: N_k^a = dG^a/dy^k = gamma^a_{kc} y^c for quadratic F^2
  const Eigen::MatrixXd N = cartan_nconnection(fin, u);
  for (int k = 0; k < 2; ++k)
    for (int a = 0; a < 2; ++a) {
      double expect = 0.0;
      for (int c = 0; c < 2; ++c) expect += gamma(a, k, c) * y[c];
      CHECK(N(k, a) == doctest::Approx(expect).epsilon(1e-9));
    }
}

TEST_CASE("osculation equals hessian metric at the composed point") {
  const auto fin = quartic();
  std::vector<ScalarField> section(2);
  section[0] = constant_field(2, 1.0);
  section[1] = make_field(2, [](auto u) { return u[0]; });
  const auto osc = osculate(fin, section);
  Eigen::VectorXd x(2);
  x << 0.5, -0.3;
  Eigen::VectorXd w(4);
  w << 0.5, -0.3, 1.0, 0.5;
  const Eigen::MatrixXd g = hessian_metric(fin, w);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      CHECK(field_value(osc[static_cast<std::size_t>(i) * 2 + j], x) ==
            doctest::Approx(g(i, j)).epsilon(1e-12));
}

TEST_CASE("dispersion relation") {
  DispersionParams p;
  p.c = 1.0;
  p.r = 1;
  p.g = Eigen::MatrixXd::Identity(3, 3);
  Eigen::VectorXd k(3);
  k << 1.0, 0.0, 0.0;
  // q = 0: omega^2 = c^2 [g k k]^2
  CHECK(dispersion_omega2(p, k) == doctest::Approx(1.0));
  Eigen::VectorXd k2 = 2.0 * k;
  CHECK(dispersion_omega2(p, k2) == doctest::Approx(16.0));  // squared bracket scaling
  // q11 = 0.1: omega^2 = 1 - 0.1
  p.q.push_back({{0, 0}, 0.1});
  CHECK(dispersion_omega2(p, k) == doctest::Approx(0.9));
  // documented linear-bracket variant
  p.linear_bracket = true;
  CHECK(dispersion_omega2(p, k) == doctest::Approx(0.9));
  CHECK(dispersion_omega2(p, k2) == doctest::Approx(4.0 * (1.0 - 0.1 * 4.0 / 4.0)));
}

TEST_CASE("sasaki lift block fields agree with direct computations") {
  const auto fin = quartic();
  const auto dm = sasaki_lift(fin);
  Eigen::VectorXd u(4);
  u << 0.3, -0.2, 1.0, 2.0;
  const Eigen::MatrixXd g = hessian_metric(fin, u);
  const Eigen::MatrixXd N = cartan_nconnection(fin, u);
  const auto su = to_std(u);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      CHECK(dm.g_at(i, j)(su) == doctest::Approx(g(i, j)).epsilon(1e-13));
      CHECK(dm.h_at(0, i, j)(su) == doctest::Approx(g(i, j)).epsilon(1e-13));
    }
  for (int k = 0; k < 2; ++k)
    for (int a = 0; a < 2; ++a)
      CHECK(dm.N_at(0, k, a)(su) == doctest::Approx(N(k, a)).epsilon(1e-13));
}
