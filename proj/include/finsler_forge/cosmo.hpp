#pragma once

// Diagonal Friedmann dynamics on the doubled (h, v) cosmology: the coupled
// scale-factor equations, conservation scaling, expansion-rate differences,
// the Hubble-fraction flow with its critical thresholds, regime
// classification, fixed-step trajectory integration, KP-type line solitons
// and the solitonic modulation of the fraction function.

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "finsler_forge/ansatz.hpp"
#include "finsler_forge/field.hpp"

namespace finsler {

struct CosmoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr double kPi = 3.14159265358979323846;

struct CosmoParams {
  double hk = 0.0, vk = 0.0;        // constant curvatures of the two factors
  double h_omega = 0.0, v_omega = 0.0;  // equation-of-state constants
  double G_bar = 1.0;               // total-space gravitational constant
  double eps1 = 1.0;                // signature of the x1 direction
};

struct CosmoState {
  double ha = 1.0, va = 1.0;
  double ha_dot = 0.0, va_dot = 0.0;
};

struct HubbleState {
  double hH = 0.0, vH = 0.0;
};

struct SolitonParams {
  double kappa = 1.0;   // soliton wavenumber
  double l = 0.0;       // transverse wavenumber
  double omega = 0.0;   // frequency (filled in by the dispersion root find)
  int eps_sign = 1;     // sign of the dispersive term
  double amplitude = 0.0;  // modulation amplitude
};

namespace detail {
inline void check_cosmo(const CosmoState& s, const CosmoParams& p, const char* who) {
  if (!(s.ha > 0.0) || !(s.va > 0.0)) throw CosmoError(std::string(who) + ": scale factor <= 0");
  if (!(p.G_bar > 0.0)) throw CosmoError(std::string(who) + ": G_bar <= 0");
}
}  // namespace detail

// ---- diagonal scale-factor equations --------------------------------------
//
// Residuals (LHS - RHS) of the three coupled equations for the h- and
// v-scale factors with a perfect-fluid source (density rho, pressures hp
// and vp in the two factors).

inline std::array<double, 3> diag_friedmann_residuals(const CosmoState& s, double ha_ddot,
                                                      double va_ddot, const CosmoParams& p,
                                                      double rho, double hp, double vp) {
  detail::check_cosmo(s, p, "diag_friedmann_residuals");
  const double hH = s.ha_dot / s.ha, vH = s.va_dot / s.va;
  const double Ph = hH * hH + p.hk / (s.ha * s.ha);
  const double Pv = vH * vH + p.vk / (s.va * s.va);
  return {
      4.0 * vH * hH + 2.0 * Ph + Pv - (8.0 / 3.0) * kPi * p.G_bar * rho,
      4.0 * ha_ddot / s.ha + 2.0 * va_ddot / s.va + 6.0 * Ph + Pv + 8.0 * kPi * p.G_bar * vp,
      ha_ddot / s.ha + va_ddot / s.va + 2.0 * Ph + Pv + (8.0 / 3.0) * kPi * p.G_bar * hp,
  };
}

// Conservation scaling of the total-space energy density.
inline double conserved_density(double ha, double va, double h_omega, double v_omega,
                                double rho0) {
  if (!(ha > 0.0) || !(va > 0.0)) throw CosmoError("conserved_density: scale factor <= 0");
  return rho0 * std::pow(ha, -4.0 * (1.0 + h_omega)) * std::pow(va, -3.0 * (1.0 + v_omega));
}

// ---- Hubble-fraction flow -------------------------------------------------
//
// The flat, pressureless closure reduces the scale-factor system to an
// autonomous flow of the two Hubble rates; returns (hH_dot, vH_dot).

inline std::pair<double, double> hubble_rhs(const HubbleState& h) {
  const double vd = -2.5 * h.vH * h.vH - 2.0 * h.vH * h.hH + h.hH * h.hH;
  const double hd = 0.5 * h.vH * h.vH - h.vH * h.hH - 3.0 * h.hH * h.hH;
  return {hd, vd};
}

// d(gamma)/dt for the fraction gamma = hH/vH, by the quotient rule;
// algebraically equal to -vH (gamma - 1)(gamma^2 + 2 gamma + 1/2).
inline double gamma_rhs(double gamma, double vH) {
  if (vH == 0.0) throw CosmoError("gamma_rhs: vH = 0");
  const double hH = gamma * vH;
  const auto [hd, vd] = hubble_rhs({hH, vH});
  return (hd * vH - hH * vd) / (vH * vH);
}

struct Thresholds {
  double Hplus, Hminus;  // acceleration boundaries for the fraction
  double Hatt, Hrep;     // roots of the quadratic factor of the flow
};

inline Thresholds critical_thresholds() {
  const double s = std::sqrt(2.5), q = 1.0 / std::sqrt(2.0);
  return {1.0 + s, 1.0 - s, -1.0 + q, -1.0 - q};
}

// True when the v-factor accelerates (va_ddot > 0) for the given fraction.
inline bool acceleration_test(double gamma) {
  const Thresholds th = critical_thresholds();
  return gamma > th.Hplus || gamma < th.Hminus;
}

enum class Regime { accel_then_decel, always_decel, decel_then_accel, always_accel };

inline const char* regime_name(Regime r) {
  switch (r) {
    case Regime::accel_then_decel: return "accel_then_decel";
    case Regime::always_decel: return "always_decel";
    case Regime::decel_then_accel: return "decel_then_accel";
    case Regime::always_accel: return "always_accel";
  }
  return "unknown";
}

// Dynamical classification: integrate the fraction flow (time rescaled by
// vH > 0) and read off the acceleration flag along the way.
inline Regime classify_regime(double gamma0) {
  const bool first = acceleration_test(gamma0);
  double g = gamma0;
  const double ds = 1e-3;
  bool flipped = false;
  auto f = [](double x) { return gamma_rhs(x, 1.0); };
  for (int step = 0; step < 400000 && !flipped; ++step) {
    const double k1 = f(g);
    if (std::abs(k1) < 1e-12) break;  // fixed point reached
    const double k2 = f(g + 0.5 * ds * k1);
    const double k3 = f(g + 0.5 * ds * k2);
    const double k4 = f(g + ds * k3);
    g += ds / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (acceleration_test(g) != first) flipped = true;
  }
  if (first) return flipped ? Regime::accel_then_decel : Regime::always_accel;
  return flipped ? Regime::decel_then_accel : Regime::always_decel;
}

// Literal interval table (reported alongside the dynamical classification;
// the two disagree where the printed interval ordering is inconsistent).
inline Regime classify_regime_literal(double gamma0) {
  const Thresholds th = critical_thresholds();
  if (gamma0 > th.Hplus) return Regime::accel_then_decel;
  if (gamma0 > th.Hrep) return Regime::always_decel;
  if (gamma0 > th.Hminus) return Regime::decel_then_accel;
  return Regime::always_accel;
}

// ---- expansion-rate differences -------------------------------------------

enum class RateCase { general, radiation, equal_omega };

inline double expansion_rate_difference(const HubbleState& h, double h_omega, double v_omega,
                                        RateCase c) {
  switch (c) {
    case RateCase::general:
      return (1.0 - 3.0 * v_omega + 2.0 * h_omega) * h.vH -
             (1.0 + 3.0 * v_omega - 4.0 * h_omega) * h.hH;
    case RateCase::radiation:
      return 2.0 * h.hH;
    case RateCase::equal_omega:
      return h.vH - h.hH;
  }
  throw CosmoError("expansion_rate_difference: unknown case");
}

// ---- trajectory integration -----------------------------------------------

struct TrajectoryPoint {
  double t, hH, vH, gamma, ha, va, rho;
};

struct Trajectory {
  std::vector<TrajectoryPoint> rows;
  bool singular = false;  // finite-time blow-up; t_last is the last valid time
  double t_last = 0.0;
};

namespace detail {

constexpr double kBlowUp = 1e12;

template <int N, class F>
bool rk4_step(std::array<double, N>& y, double dt, const F& f) {
  const auto k1 = f(y);
  std::array<double, N> t;
  for (int i = 0; i < N; ++i) t[i] = y[i] + 0.5 * dt * k1[i];
  const auto k2 = f(t);
  for (int i = 0; i < N; ++i) t[i] = y[i] + 0.5 * dt * k2[i];
  const auto k3 = f(t);
  for (int i = 0; i < N; ++i) t[i] = y[i] + dt * k3[i];
  const auto k4 = f(t);
  for (int i = 0; i < N; ++i) {
    y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    if (!std::isfinite(y[i])) return false;
  }
  return true;
}

}  // namespace detail

// Flat pressureless closure: integrates the Hubble flow directly, carrying
// the scale factors and density along.
inline Trajectory integrate_trajectory(const HubbleState& init, double t0, double t1, double dt,
                                       const CosmoParams& p, double rho0) {
  if (!(dt > 0.0)) throw CosmoError("integrate_trajectory: dt <= 0");
  Trajectory tr;
  std::array<double, 4> y{init.hH, init.vH, 1.0, 1.0};  // hH, vH, ha, va
  auto f = [](const std::array<double, 4>& s) -> std::array<double, 4> {
    const auto [hd, vd] = hubble_rhs({s[0], s[1]});
    return {hd, vd, s[2] * s[0], s[3] * s[1]};
  };
  double t = t0;
  auto push = [&] {
    tr.rows.push_back({t, y[0], y[1], y[0] / y[1],
                       y[2], y[3],
                       conserved_density(y[2], y[3], p.h_omega, p.v_omega, rho0)});
  };
  push();
  while (t < t1 - 0.5 * dt) {
    if (!detail::rk4_step<4>(y, dt, f) || std::abs(y[0]) > detail::kBlowUp ||
        std::abs(y[1]) > detail::kBlowUp || !(y[2] > 0.0) || !(y[3] > 0.0)) {
      tr.singular = true;
      tr.t_last = t;
      return tr;
    }
    t += dt;
    push();
  }
  tr.t_last = t;
  return tr;
}

// Full closure: the second and third scale-factor equations solved for the
// two accelerations, density eliminated by the conservation scaling; the
// first equation is a constraint preserved along the flow.
inline Trajectory integrate_trajectory(const CosmoState& init, double t0, double t1, double dt,
                                       const CosmoParams& p, double rho0) {
  if (!(dt > 0.0)) throw CosmoError("integrate_trajectory: dt <= 0");
  detail::check_cosmo(init, p, "integrate_trajectory");
  Trajectory tr;
  std::array<double, 4> y{init.ha, init.va, init.ha_dot, init.va_dot};
  auto f = [&](const std::array<double, 4>& s) -> std::array<double, 4> {
    const double hH = s[2] / s[0], vH = s[3] / s[1];
    const double rho = conserved_density(s[0], s[1], p.h_omega, p.v_omega, rho0);
    const double hp = p.h_omega * rho, vp = p.v_omega * rho;
    const double Ph = hH * hH + p.hk / (s[0] * s[0]);
    const double Pv = vH * vH + p.vk / (s[1] * s[1]);
    const double X =
        0.5 * (-8.0 * kPi * p.G_bar * vp + (16.0 / 3.0) * kPi * p.G_bar * hp - 2.0 * Ph + Pv);
    const double Y = -(8.0 / 3.0) * kPi * p.G_bar * hp - 2.0 * Ph - Pv - X;
    return {s[2], s[3], s[0] * X, s[1] * Y};
  };
  double t = t0;
  auto push = [&] {
    const double hH = y[2] / y[0], vH = y[3] / y[1];
    tr.rows.push_back({t, hH, vH, hH / vH, y[0], y[1],
                       conserved_density(y[0], y[1], p.h_omega, p.v_omega, rho0)});
  };
  push();
  while (t < t1 - 0.5 * dt) {
    if (!(y[0] > 0.0) || !(y[1] > 0.0) || !detail::rk4_step<4>(y, dt, f) ||
        std::abs(y[2] / y[0]) > detail::kBlowUp || std::abs(y[3] / y[1]) > detail::kBlowUp ||
        !(y[0] > 0.0) || !(y[1] > 0.0)) {
      tr.singular = true;
      tr.t_last = t;
      return tr;
    }
    t += dt;
    push();
  }
  tr.t_last = t;
  return tr;
}

// ---- KP line solitons -----------------------------------------------------
//
// Travelling sech^2 profile xi(t, htheta, vr); the frequency is pinned by a
// secant root find on the residual of the third-order dispersive equation
//   d^2 xi / d vr^2 + eps (xi' + 6 xi xi* + xi***)* = 0
// (prime = d/dt, star = d/d htheta), sampled on a 21^3 grid spanning one
// soliton width.

struct SolitonWave {
  ScalarField xi;   // xi(t, htheta, vr)
  double omega;
  double residual;  // max |equation residual| over the sample grid
};

namespace detail {

inline ScalarField kp_profile(double kappa, double l, double omega) {
  return make_field(3, [kappa, l, omega](auto const& u) {
    const auto z = kappa * u[1] + l * u[2] - omega * u[0];
    return 2.0 * kappa * kappa * sech(z) * sech(z);
  });
}

// Signed residual at the grid point of largest magnitude; the max of the
// magnitude alone is also reported.
inline std::pair<double, double> kp_residual(const ScalarField& xi, double eps, double width) {
  double worst = 0.0, worst_abs = 0.0;
  for (int it = 0; it < 21; ++it)
    for (int jt = 0; jt < 21; ++jt)
      for (int kt = 0; kt < 21; ++kt) {
        const std::vector<double> u{width * (it / 10.0 - 1.0), width * (jt / 10.0 - 1.0),
                                    width * (kt / 10.0 - 1.0)};
        const std::span<const double> us(u.data(), u.size());
        const double d2r = nested_partial(xi, us, {2, 2});
        const double dth = nested_partial(xi, us, {1});
        const double d2th = nested_partial(xi, us, {1, 1});
        const double dtth = nested_partial(xi, us, {0, 1});
        const double d4th = nested_partial(xi, us, {1, 1, 1, 1});
        const double val = field_value(xi, us);
        const double r = d2r + eps * (dtth + 6.0 * (dth * dth + val * d2th) + d4th);
        if (std::abs(r) > worst_abs) {
          worst_abs = std::abs(r);
          worst = r;
        }
      }
  return {worst, worst_abs};
}

}  // namespace detail

inline SolitonWave kp_line_soliton(const SolitonParams& p) {
  if (p.kappa == 0.0) throw CosmoError("kp_line_soliton: kappa = 0");
  if (p.eps_sign != 1 && p.eps_sign != -1) throw CosmoError("kp_line_soliton: eps_sign not +-1");
  const double eps = static_cast<double>(p.eps_sign);
  const double width = 1.0 / std::abs(p.kappa);
  auto signed_res = [&](double om) {
    return detail::kp_residual(detail::kp_profile(p.kappa, p.l, om), eps, width).first;
  };
  double w0 = 0.0, w1 = 1.0;
  double r0 = signed_res(w0), r1 = signed_res(w1);
  for (int it = 0; it < 60 && std::abs(r1) > 1e-12; ++it) {
    if (r1 == r0) throw CosmoError("kp_line_soliton: dispersion root find stalled");
    const double w2 = w1 - r1 * (w1 - w0) / (r1 - r0);
    w0 = w1;
    r0 = r1;
    w1 = w2;
    r1 = signed_res(w1);
  }
  if (std::abs(r1) > 1e-8) throw CosmoError("kp_line_soliton: no dispersion solution");
  SolitonWave out;
  out.omega = w1;
  out.xi = detail::kp_profile(p.kappa, p.l, out.omega);
  out.residual = detail::kp_residual(out.xi, eps, width).second;
  return out;
}

// ---- solitonic modulation of the fraction ---------------------------------

inline double modulated_fraction(double gamma, double chi_star, double varpi5_star, double eps) {
  if (std::abs(eps) > 0.1) throw CosmoError("modulated_fraction: |eps| > 0.1");
  return gamma + eps * (chi_star - varpi5_star);
}

inline bool modulated_regime_flip(double gamma, double chi_star, double varpi5_star, double eps) {
  return classify_regime(modulated_fraction(gamma, chi_star, varpi5_star, eps)) !=
         classify_regime(gamma);
}

}  // namespace finsler
