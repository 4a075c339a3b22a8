// End-to-end acceptance checks.  Each numbered criterion prints one PASS/FAIL
// line; the exit status is the number of failures.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "finsler_forge/ansatz.hpp"
#include "finsler_forge/config.hpp"
#include "finsler_forge/cosmo.hpp"
#include "finsler_forge/finsler.hpp"

using namespace finsler;

namespace {

struct TestMetric {
  std::string name;
  DMetric dm;
  Eigen::VectorXd lo, hi;
};

Eigen::VectorXd vec4(double a, double b, double c, double d) {
  Eigen::VectorXd u(4);
  u << a, b, c, d;
  return u;
}

std::vector<Eigen::VectorXd> haltonPoints(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                                          int count, unsigned seed) {
  SampleSpec s;
  s.lo = lo;
  s.hi = hi;
  s.count = count;
  s.seed = seed;
  return sample_points(s);
}

DMetric flat22() {
  DMetric dm = DMetric::single_shell(2, 2);
  dm.g[0] = dm.g[3] = constant_field(4, 1.0);
  dm.h[0][0] = dm.h[0][3] = constant_field(4, 1.0);
  return dm;
}

DMetric conformal22() {
  DMetric dm = DMetric::single_shell(2, 2);
  auto cg = make_field(4, [](auto u) {
    using std::cos;
    using std::exp;
    using std::sin;
    return exp(0.3 * sin(u[0]) * cos(u[1]));
  });
  auto ch = make_field(4, [](auto u) {
    using std::exp;
    return exp(0.1 * u[0] + 0.05 * u[2] * u[2]);
  });
  dm.g[0] = dm.g[3] = cg;
  dm.h[0][0] = dm.h[0][3] = ch;
  dm.N[0][0] = make_field(4, [](auto u) { return 0.1 * u[0] * u[2]; });
  dm.N[0][3] = make_field(4, [](auto u) {
    using std::sin;
    return 0.05 * sin(u[1]);
  });
  return dm;
}

FinslerFunction quarticFinsler() {
  return make_finsler(2, [](auto u) {
    const auto q = u[2] * u[2] + u[3] * u[3];
    return q + 0.01 * u[2] * u[2] * u[2] * u[2] / q;
  });
}

SolutionRecipe sol1Recipe(int variant) {
  SolutionRecipe r;
  const double a = 0.1 + 0.03 * variant;
  const double b = 0.3 + 0.04 * variant;
  r.psi = make_field(4, [a](auto u) {
    using std::cos;
    using std::sin;
    return a * sin(u[0]) * cos(u[1]);
  });
  r.f = make_field(4, [b, variant](auto u) {
    using std::exp;
    using std::sin;
    return exp(b * u[2] + 0.05 * sin(u[0])) + (0.02 + 0.01 * variant) * u[1] * u[2];
  });
  r.f0 = make_field(4, [variant](auto u) { return (0.1 + 0.02 * variant) * u[1]; });
  r.h0 = make_field(4, [](auto u) { return 1.0 + 0.1 * u[0]; });
  r.sigma0 = make_field(4, [](auto u) { return 1.0 + 0.05 * u[1]; });
  r.w01 = constant_field(4, 0.01);
  r.n01 = constant_field(4, 0.02);
  r.src.ups4 = make_field(4, [variant](auto u) {
    using std::cos;
    return 0.3 + 0.05 * cos(u[0]) + (0.01 + 0.005 * variant) * u[2];
  });
  const ScalarField psi = r.psi;
  const double e1 = r.eps1, e2 = r.eps2;
  r.src.ups2 = make_field(4, [psi, e1, e2](auto u) {
    using T = std::decay_t<decltype(u[0])>;
    const std::vector<T> uv(u.begin(), u.end());
    const std::span<const T> us(uv.data(), uv.size());
    const T p11 = detail::nested_partial(psi, us, {0, 0});
    const T p22 = detail::nested_partial(psi, us, {1, 1});
    return 0.5 * exp(-psi(u)) * (e1 * p11 + e2 * p22);
  });
  return r;
}

Cosmo4dRecipe cosmo4dRecipe(int variant) {
  Cosmo4dRecipe r;
  const double rate = 0.03 + 0.01 * variant;
  const double amp = 0.03 + 0.01 * variant;
  r.ha = make_field(4, [rate](auto u) {
    using std::exp;
    return exp(rate * u[1]);
  });
  r.f = make_field(4, [amp](auto u) {
    using std::cos;
    return u[2] + amp * u[2] * u[2] * cos(u[0] + u[1]);
  });
  r.src.ups4 = constant_field(4, 0.25 + 0.02 * variant);
  r.v_base = 0.2;
  return r;
}

std::vector<Eigen::VectorXd> sol1Points() {
  return haltonPoints(vec4(-0.2, -0.2, 0.25, -0.1), vec4(0.5, 0.4, 0.6, 0.1), 4, 11);
}

std::vector<Eigen::VectorXd> cosmo4dPoints() {
  return haltonPoints(vec4(0.4, -0.2, 0.3, -0.1), vec4(0.8, 0.3, 0.6, 0.1), 4, 12);
}

std::vector<TestMetric> metricCorpus() {
  std::vector<TestMetric> ms;
  ms.push_back({"flat", flat22(), vec4(-0.5, -0.5, -0.5, -0.5), vec4(0.5, 0.5, 0.5, 0.5)});
  ms.push_back({"conformal", conformal22(), vec4(-0.5, -0.5, -0.5, -0.5), vec4(0.5, 0.5, 0.5, 0.5)});
  ms.push_back({"sasaki-quartic", sasaki_lift(quarticFinsler()), vec4(-0.5, -0.5, 0.6, 0.6),
                vec4(0.5, 0.5, 1.4, 1.4)});
  ms.push_back({"generated-2+2", generate_sol1(sol1Recipe(0)), vec4(-0.2, -0.2, 0.25, -0.1),
                vec4(0.5, 0.4, 0.6, 0.1)});
  ms.push_back({"generated-4d", generate_4d_cosmo(cosmo4dRecipe(0)), vec4(0.4, -0.2, 0.3, -0.1),
                vec4(0.8, 0.3, 0.6, 0.1)});
  return ms;
}

ScalarField scaled(const ScalarField& f, double s) {
  const int d = f.dim();
  return make_field(d, [f, s](auto u) { return s * f(u); });
}

double seconds(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](int num, const char* name, bool ok, const std::string& detail) {
    std::printf("%2d. %-34s %s%s\n", num, name, ok ? "PASS" : "FAIL",
                detail.empty() ? "" : ("   [" + detail + "]").c_str());
    if (!ok) ++failures;
  };

  const auto corpus = metricCorpus();

  // 1. metric compatibility for canonical and Cartan connections
  {
    const auto t0 = std::chrono::steady_clock::now();
    double worst = 0.0;
    for (std::size_t im = 0; im < corpus.size(); ++im) {
      const auto& tm = corpus[im];
      const auto pts = haltonPoints(tm.lo, tm.hi, 100, 100 + static_cast<unsigned>(im));
      for (ConnKind k : {ConnKind::canonical, ConnKind::cartan})
        for (const auto& u : pts) worst = std::max(worst, nonmetricity_max(tm.dm, k, u));
    }
    const double dt = seconds(t0);
    report(1, "metric compatibility", worst < 1e-8 && dt < 10.0,
           "max |Dg| = " + std::to_string(worst) + ", " + std::to_string(dt) + " s");
  }

  // 2. pure horizontal and vertical torsion of the canonical connection
  {
    const auto t0 = std::chrono::steady_clock::now();
    double worst = 0.0;
    for (std::size_t im = 0; im < corpus.size(); ++im) {
      const auto& tm = corpus[im];
      const auto pts = haltonPoints(tm.lo, tm.hi, 25, 200 + static_cast<unsigned>(im));
      for (const auto& u : pts) {
        const auto su = to_std(u);
        const auto t = dtorsion_t(tm.dm, ConnKind::canonical,
                                  std::span<const double>(su.data(), su.size()));
        for (double x : t.Tijk) worst = std::max(worst, std::abs(x));
        for (double x : t.Tabc) worst = std::max(worst, std::abs(x));
      }
    }
    const double dt = seconds(t0);
    report(2, "pure-torsion vanishing", worst < 1e-10 && dt < 5.0,
           "max = " + std::to_string(worst));
  }

  // 3. distortion closes the gap between levi-civita and the canonical
  //    connection on a generic off-diagonal metric
  {
    DMetric dm = DMetric::single_shell(2, 2);
    dm.g[0] = make_field(4, [](auto u) {
      using std::exp;
      return exp(0.3 * u[0]);
    });
    dm.g[3] = make_field(4, [](auto u) {
      using std::exp;
      return -exp(0.2 * u[1]);
    });
    dm.g[1] = dm.g[2] = make_field(4, [](auto u) { return 0.1 * u[0] * u[1]; });
    dm.h[0][0] = make_field(4, [](auto u) { return 1.0 + 0.1 * u[0] * u[0] + 0.05 * u[2] * u[2]; });
    dm.h[0][3] = make_field(4, [](auto u) {
      using std::cos;
      return 2.0 + 0.2 * cos(u[1]) + 0.1 * u[3];
    });
    dm.h[0][1] = dm.h[0][2] = make_field(4, [](auto u) { return 0.05 * u[2] * u[3]; });
    dm.N[0][0] = make_field(4, [](auto u) {
      using std::sin;
      return 0.3 * sin(u[1]) + 0.1 * u[2];
    });
    dm.N[0][1] = make_field(4, [](auto u) { return 0.2 * u[0] * u[3]; });
    dm.N[0][2] = make_field(4, [](auto u) { return 0.15 * u[1] + 0.05 * u[2] * u[2]; });
    dm.N[0][3] = make_field(4, [](auto u) {
      using std::exp;
      return 0.1 * exp(0.2 * u[0]);
    });
    double worst = 0.0;
    for (const auto& u : haltonPoints(vec4(-0.4, -0.4, -0.4, -0.4), vec4(0.4, 0.4, 0.4, 0.4), 50, 7)) {
      const auto su = to_std(u);
      const std::span<const double> us(su.data(), su.size());
      const auto Gn = levi_civita_nadapted_t(dm, us);
      const auto Gc = embed_full(dconnection_t(dm, ConnKind::canonical, us));
      const auto Z = distortion_t(dm, us);
      for (std::size_t q = 0; q < Gn.a.size(); ++q)
        worst = std::max(worst, std::abs(Gn.a[q] - Gc.a[q] - Z.a[q]));
    }
    report(3, "distortion identity", worst < 1e-7, "max = " + std::to_string(worst));
  }

  // 4. coincidence case: distortion vanishes and the einstein d-tensor matches
  //    the coordinate einstein tensor
  {
    DMetric dm = DMetric::single_shell(2, 2);
    dm.g[0] = make_field(4, [](auto u) { return 1.0 + 0.2 * u[0] * u[0]; });
    dm.g[3] = make_field(4, [](auto u) {
      using std::exp;
      return exp(0.3 * u[1]);
    });
    dm.h[0][0] = make_field(4, [](auto u) { return 2.0 + 0.1 * u[2] * u[2]; });
    dm.h[0][3] = make_field(4, [](auto u) { return 1.0 + 0.05 * u[3] * u[3]; });
    double cond = 0.0, zmax = 0.0, emax = 0.0;
    for (const auto& u : haltonPoints(vec4(-0.4, -0.4, -0.4, -0.4), vec4(0.4, 0.4, 0.4, 0.4), 10, 9)) {
      const auto norms = check_lc_conditions(dm, u);
      cond = std::max({cond, norms.l_minus_dN, norms.c_h, norms.omega});
      const auto su = to_std(u);
      const std::span<const double> us(su.data(), su.size());
      const auto Z = distortion_t(dm, us);
      for (double x : Z.a) zmax = std::max(zmax, std::abs(x));
      const auto p = curvature_pack(dm, ConnKind::canonical, u);
      const auto cc = lc_coordinate_curvature(dm, u);
      emax = std::max(emax, (p.einstein - cc.einstein).cwiseAbs().maxCoeff());
    }
    report(4, "levi-civita extraction", cond < 1e-10 && zmax < 1e-8 && emax < 1e-7,
           "cond " + std::to_string(cond) + ", Z " + std::to_string(zmax) + ", E " +
               std::to_string(emax));
  }

  // 5 & 6. generator/evaluator closure and two-path consistency
  {
    const auto t0 = std::chrono::steady_clock::now();
    double worstSep = 0.0, worstGen = 0.0, worstMatch = 0.0, perturbMin = 1e9;
    for (int variant = 0; variant < 5; ++variant) {
      struct Case {
        DMetric dm;
        Source src;
        std::vector<Eigen::VectorXd> pts;
      };
      std::vector<Case> cases;
      {
        const SolutionRecipe r = sol1Recipe(variant);
        cases.push_back({generate_sol1(r), r.src, sol1Points()});
      }
      {
        const Cosmo4dRecipe r = cosmo4dRecipe(variant);
        cases.push_back({generate_4d_cosmo(r), r.src, cosmo4dPoints()});
      }
      for (auto& c : cases) {
        const auto sep = residuals_separated(c.dm, ConnKind::hv, c.src, c.pts);
        const auto gen = residuals_generic(c.dm, ConnKind::hv, c.src, c.pts);
        worstSep = std::max(worstSep, sep.worst());
        worstGen = std::max(worstGen, gen.worst());
        for (const auto& e : sep.entries)
          if (const auto* o = gen.find(e.equation))
            worstMatch = std::max(worstMatch, std::abs(e.max_abs - o->max_abs));
        if (variant == 0) {
          DMetric bad = c.dm;
          bad.h[0][0] = scaled(c.dm.h_at(0, 0, 0), 1.01);
          perturbMin =
              std::min(perturbMin, residuals_separated(bad, ConnKind::hv, c.src, c.pts).worst());
        }
      }
    }
    const double dt = seconds(t0);
    report(5, "generator/evaluator closure",
           worstSep < 1e-6 && perturbMin > 1e-4 && dt < 60.0,
           "residual " + std::to_string(worstSep) + ", perturbed " + std::to_string(perturbMin) +
               ", " + std::to_string(dt) + " s");
    report(6, "two-path consistency", worstGen < 1e-6 && worstMatch < 1e-6,
           "full pipeline " + std::to_string(worstGen) + ", match " + std::to_string(worstMatch));
  }

  // 7. critical thresholds are exact polynomial roots
  {
    const Thresholds th = critical_thresholds();
    auto accelPoly = [](double g) { return g * g - 2.0 * g - 1.5; };
    auto flowPoly = [](double g) { return (g - 1.0) * (g * g + 2.0 * g + 0.5); };
    const double e1 = std::max(std::abs(accelPoly(th.Hplus)), std::abs(accelPoly(th.Hminus)));
    const double e2 = std::max({std::abs(flowPoly(1.0)), std::abs(flowPoly(th.Hatt)),
                                std::abs(flowPoly(th.Hrep))});
    report(7, "threshold algebra", e1 < 1e-12 && e2 < 1e-12,
           "boundary " + std::to_string(e1) + ", flow " + std::to_string(e2));
  }

  // 8. fixed point gamma = 1 and 4th-order convergence
  {
    CosmoParams p;
    double drift = 0.0;
    const Trajectory tr = integrate_trajectory(HubbleState{0.3, 0.3}, 0.0, 10.0, 1e-3, p, 1.0);
    for (const auto& r : tr.rows) drift = std::max(drift, std::abs(r.gamma - 1.0));
    auto finalVH = [&](double dt) {
      const Trajectory t = integrate_trajectory(HubbleState{0.2, 1.0}, 0.0, 1.0, dt, p, 1.0);
      return t.rows.back().vH;
    };
    const double v1 = finalVH(4e-3), v2 = finalVH(2e-3), v3 = finalVH(1e-3);
    const double ratio = (v1 - v2) / (v2 - v3);
    report(8, "fixed-point preservation", drift < 1e-9 && ratio > 12.0 && ratio < 20.0,
           "drift " + std::to_string(drift) + ", order ratio " + std::to_string(ratio));
  }

  // 9. conservation law along a dust closure trajectory
  {
    CosmoParams p;  // dust: both equation-of-state constants vanish
    CosmoState s;
    s.ha_dot = 0.05;
    s.va_dot = 0.3;
    const Trajectory tr = integrate_trajectory(s, 0.0, 1.0, 1e-4, p, 1.0);
    // density from the continuity equation, integrated independently
    double lnrho = 0.0, drift = 0.0;
    const double inv0 = tr.rows[0].ha * tr.rows[0].ha * tr.rows[0].ha * tr.rows[0].ha *
                        tr.rows[0].va * tr.rows[0].va * tr.rows[0].va;
    for (std::size_t i = 1; i < tr.rows.size(); ++i) {
      const auto& a = tr.rows[i - 1];
      const auto& b = tr.rows[i];
      const double ra = -4.0 * a.hH - 3.0 * a.vH;
      const double rb = -4.0 * b.hH - 3.0 * b.vH;
      lnrho += 0.5 * (b.t - a.t) * (ra + rb);
      const double inv = std::exp(lnrho) * b.ha * b.ha * b.ha * b.ha * b.va * b.va * b.va;
      drift = std::max(drift, std::abs(inv / inv0 - 1.0));
    }
    report(9, "conservation law", drift < 1e-6, "relative drift " + std::to_string(drift));
  }

  // 10. radiation-era stability and matter-era constant solution
  {
    CosmoParams p;
    p.v_omega = 1.0 / 3.0;  // radiation: vertical pressure rho/3, no h-pressure
    const double delta = 1e-3;
    CosmoState s;
    s.ha = 1.0 + delta;
    s.va = 1.0;
    s.va_dot = 0.5;
    // density calibrated so the constraint holds at t = 0
    const double rho0c = 3.0 / (8.0 * kPi) * (s.va_dot * s.va_dot) *
                         std::pow(s.ha, 4.0 * (1.0 + p.h_omega)) *
                         std::pow(s.va, 3.0 * (1.0 + p.v_omega));
    const Trajectory rad = integrate_trajectory(s, 0.0, 10.0, 1e-3, p, rho0c);
    double hdev = 0.0;
    for (const auto& r : rad.rows) hdev = std::max(hdev, std::abs(r.ha - s.ha));

    CosmoParams pm;
    pm.h_omega = -0.5;  // negative pressure in the h-sector
    CosmoState sm;
    sm.va_dot = 0.4;
    const double rho0m = 3.0 / (8.0 * kPi) * (sm.va_dot * sm.va_dot);
    const Trajectory mat = integrate_trajectory(sm, 0.0, 1.0, 1e-3, pm, rho0m);
    double mdev = 0.0;
    for (const auto& r : mat.rows) mdev = std::max(mdev, std::abs(r.ha - 1.0));
    report(10, "radiation stability / matter era", !rad.singular && hdev < 1e-2 && mdev < 1e-8,
           "radiation " + std::to_string(hdev) + ", matter " + std::to_string(mdev));
  }

  // 11. solitonic certificates
  {
    const auto t0 = std::chrono::steady_clock::now();
    double worst = 0.0;
    bool ok = true;
    for (const auto& [kap, l] : std::vector<std::pair<double, double>>{{1, 0}, {1, 1}, {2, 1}})
      for (int es : {1, -1}) {
        SolitonParams sp;
        sp.kappa = kap;
        sp.l = l;
        sp.eps_sign = es;
        try {
          worst = std::max(worst, kp_line_soliton(sp).residual);
        } catch (const CosmoError&) {
          ok = false;
        }
      }
    Soliton8dParams p8;
    p8.ha = make_field(8, [](auto u) {
      using std::exp;
      return exp(0.04 * u[2]);
    });
    p8.va = make_field(8, [](auto u) {
      using std::exp;
      return exp(0.03 * u[2]);
    });
    p8.epsilon = 0.0;
    p8.xi = make_field(8, [](auto u) {
      const auto c = cosh(u[3] + u[4] - 4.0 * u[2]);
      return 2.0 / (c * c);
    });
    const DMetric dm = generate_8d_solitonic(p8);
    const DMetric base = diagonal_8d_base(p8.eps1, p8.hk, p8.vk, p8.ha, p8.va);
    Eigen::VectorXd u8(8);
    u8 << 0.3, 0.7, 0.2, 0.5, -0.4, 0.6, 0.1, -0.2;
    bool exact = true;
    for (int i = 0; i < 3 && exact; ++i)
      for (int j = 0; j < 3; ++j)
        if (field_value(dm.g_at(i, j), u8) != field_value(base.g_at(i, j), u8)) {
          exact = false;
          break;
        }
    for (int s = 0; s < 3 && exact; ++s) {
      const int md = dm.shells[static_cast<std::size_t>(s)];
      for (int a = 0; a < md && exact; ++a)
        for (int b = 0; b < md; ++b)
          if (field_value(dm.h_at(s, a, b), u8) != field_value(base.h_at(s, a, b), u8)) {
            exact = false;
            break;
          }
    }
    const double dt = seconds(t0);
    report(11, "soliton certificate", ok && worst < 1e-6 && exact && dt < 60.0,
           "residual " + std::to_string(worst) + (exact ? ", base exact" : ", base differs") +
               ", " + std::to_string(dt) + " s");
  }

  // 12. automatic derivatives against central finite differences
  {
    double worstRel = 0.0;
    const double h = 1e-5;
    const double h2 = 1e-4;
    for (std::size_t im = 0; im < corpus.size(); ++im) {
      const auto& tm = corpus[im];
      std::vector<const ScalarField*> fields;
      for (const auto& f : tm.dm.g) fields.push_back(&f);
      for (const auto& shell : tm.dm.h)
        for (const auto& f : shell) fields.push_back(&f);
      for (const auto& shell : tm.dm.N)
        for (const auto& f : shell) fields.push_back(&f);
      for (const auto& u : haltonPoints(tm.lo, tm.hi, 5, 300 + static_cast<unsigned>(im))) {
        for (const ScalarField* f : fields) {
          const Jet2 j = field_jet2(*f, u);
          const double scale = std::max(1.0, std::abs(j.value));
          for (int k = 0; k < 4; ++k) {
            Eigen::VectorXd up = u, dn = u;
            up[k] += h;
            dn[k] -= h;
            const double fd = (field_value(*f, up) - field_value(*f, dn)) / (2.0 * h);
            worstRel = std::max(worstRel, std::abs(j.grad[k] - fd) /
                                              std::max(scale, std::abs(fd)));
            for (int l = 0; l <= k; ++l) {
              Eigen::VectorXd pp = u, pm = u, mp = u, mm = u;
              pp[k] += h2; pp[l] += h2;
              pm[k] += h2; pm[l] -= h2;
              mp[k] -= h2; mp[l] += h2;
              mm[k] -= h2; mm[l] -= h2;
              const double fd2 = (field_value(*f, pp) - field_value(*f, pm) -
                                  field_value(*f, mp) + field_value(*f, mm)) /
                                 (4.0 * h2 * h2);
              worstRel = std::max(worstRel, std::abs(j.hess(k, l) - fd2) /
                                                std::max(scale, std::abs(fd2)));
            }
          }
        }
      }
    }
    report(12, "derivative soundness", worstRel < 1e-6, "worst relative " + std::to_string(worstRel));
  }

  return failures;
}
