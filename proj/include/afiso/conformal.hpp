#pragma once

// Radial solve of Delta u - f u = 0, u -> 1, on a warped metric ds^2 + rho(s)^2 g*.

#include <functional>
#include <limits>

#include "afiso/mass.hpp"
#include "afiso/smoothing.hpp"

namespace afiso {

/// A radial problem: profile rho(s), source integrals of rho^2 f, and the
/// outer chart (coordinate radius r and ds/dr) where the 1/r expansion is read.
struct RadialProblem {
  std::function<RadialProfile(double)> profile;
  /// int_a^b rho^2 f w ds for a weight w(s).
  std::function<double(double, double, const std::function<double(double)>&)> source;
  std::vector<double> anchors;  // mesh nodes that must be hit, starting at 0
  double uniform_end = 0.0;     // uniform spacing up to here, then geometric
  double s_end = 0.0;
  double length_scale = 1.0;
  double s_outer = 0.0;  // start of the outer chart
  std::function<double(double)> r_of_s;
  /// Background conformal factor Psi(r) of the outer chart (g = Psi^4 delta).
  std::function<double(double)> psi;
  double l32 = 0.0;
};

struct ConformalOptions {
  double h_factor = 1.0 / 2000.0;  // uniform spacing h0 = h_factor * length scale
  double stretch = 1.005;
  double r_max_factor = 40.0;  // in units of the length scale; >= 20
  double fit_lo = 5.0, fit_hi = 20.0;
  double f_scale = 1.0;
};

struct ConformalSolution {
  std::vector<double> s, rho, r, u;  // r is NaN inside the outer chart
  double A = 0.0, A_half = 0.0;
  std::array<double, 2> window{}, half_window{};
  double residual = 0.0;
  double energy = 0.0;         // int (-f u^2 - |grad u|^2) dV, including the 1/r tail
  double boundary_flux = 0.0;  // 4 pi rho^2 u u_s at s_end
  double min_u = 0.0;
  double far_constant = 0.0;  // max r |u - 1| over the window
  double length_scale = 1.0;
  double l32 = 0.0;
  std::function<double(double)> psi;

  double identity_error() const {
    const double sc = std::max(std::abs(4.0 * kPi * A), std::abs(energy));
    return sc > 0 ? std::abs(4.0 * kPi * A - energy) / sc : 0.0;
  }
  bool A_stable(double rel = 1e-2) const {
    return std::abs(A - A_half) <= rel * std::abs(A) + 1e-14;
  }
  /// Cubic interpolation of u in the outer chart.
  double u_of_r(double rr) const {
    const std::size_t first = static_cast<std::size_t>(
        std::find_if(r.begin(), r.end(), [](double x) { return !std::isnan(x); }) - r.begin());
    if (first >= r.size() || rr < r[first] || rr > r.back()) throw InvalidInput("u_of_r: radius outside the outer chart");
    std::size_t k = static_cast<std::size_t>(std::upper_bound(r.begin() + first, r.end(), rr) - r.begin());
    k = std::clamp<std::size_t>(k, first + 2, r.size() - 2);
    double acc = 0.0;
    for (std::size_t i = k - 2; i <= k + 1; ++i) {
      double l = 1.0;
      for (std::size_t j = k - 2; j <= k + 1; ++j)
        if (j != i) l *= (rr - r[j]) / (r[i] - r[j]);
      acc += l * u[i];
    }
    return acc;
  }
  /// Areal sup of |u - 1| over rho >= rho0.
  double sup_deviation(double rho0) const {
    double v = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i)
      if (rho[i] >= rho0) v = std::max(v, std::abs(u[i] - 1.0));
    return v;
  }
};

namespace detail {

inline std::vector<double> conformal_mesh(const RadialProblem& p, const ConformalOptions& opt) {
  const double h0 = opt.h_factor * p.length_scale;
  std::vector<double> a = p.anchors;
  a.push_back(p.uniform_end);
  std::sort(a.begin(), a.end());
  std::vector<double> s{a.front()};
  for (std::size_t i = 0; i + 1 < a.size(); ++i) {
    const double len = a[i + 1] - a[i];
    if (len <= 0) continue;
    const int n = std::max(1, static_cast<int>(std::ceil(len / h0)));
    for (int k = 1; k <= n; ++k) s.push_back(a[i] + len * k / n);
  }
  double h = s.back() - s[s.size() - 2];
  while (s.back() < p.s_end) {
    h *= opt.stretch;
    if (s.back() + 1.5 * h >= p.s_end) {
      s.push_back(p.s_end);
      break;
    }
    s.push_back(s.back() + h);
  }
  return s;
}

inline void thomas(std::vector<double>& lo, std::vector<double>& di, std::vector<double>& up, std::vector<double>& rhs) {
  const std::size_t n = di.size();
  for (std::size_t i = 1; i < n; ++i) {
    const double w = lo[i] / di[i - 1];
    di[i] -= w * up[i - 1];
    rhs[i] -= w * rhs[i - 1];
  }
  rhs[n - 1] /= di[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) rhs[i] = (rhs[i] - up[i] * rhs[i + 1]) / di[i];
}

}  // namespace detail

/// Finite-volume solve. Node 0 sits at the pole (zero flux); the last node
/// carries the Robin condition (u - 1)_r + (u - 1)/r = 0.
inline ConformalSolution solve_conformal(const RadialProblem& p, const ConformalOptions& opt = {}) {
  if (opt.r_max_factor < 20.0) throw InvalidInput("solve_conformal: r_max must be at least 20 length scales");
  if (!(opt.stretch >= 1.0) || !(opt.h_factor > 0.0)) throw InvalidInput("solve_conformal: bad mesh options");
  const auto s = detail::conformal_mesh(p, opt);
  const std::size_t n = s.size();
  std::vector<double> face_coef(n - 1), Q(n, 0.0);
  const std::function<double(double)> one = [](double) { return 1.0; };
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double mid = 0.5 * (s[i] + s[i + 1]);
    const double rm = p.profile(mid).rho;
    face_coef[i] = rm * rm / (s[i + 1] - s[i]);
    // Split each cell at its midpoint between the two control volumes.
    Q[i] += opt.f_scale * p.source(s[i], mid, one);
    Q[i + 1] += opt.f_scale * p.source(mid, s[i + 1], one);
  }
  const double rN = p.r_of_s(s.back());
  const double PN = p.psi(rN);
  const double rhoN = p.profile(s.back()).rho;
  const double robin = rhoN * rhoN / (rN * PN * PN);

  std::vector<double> lo(n, 0.0), di(n, 0.0), up(n, 0.0), rhs(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0) {
      lo[i] = face_coef[i - 1];
      di[i] -= face_coef[i - 1];
    }
    if (i + 1 < n) {
      up[i] = face_coef[i];
      di[i] -= face_coef[i];
    }
    di[i] -= Q[i];
    rhs[i] = Q[i];
  }
  di[n - 1] -= robin;
  // Unknown v = u - 1, so f = 0 gives v = 0 exactly.
  auto L = lo, D = di, U = up, b = rhs;
  detail::thomas(L, D, U, b);
  std::vector<double> u(n);
  for (std::size_t i = 0; i < n; ++i) u[i] = 1.0 + b[i];

  ConformalSolution sol;
  sol.length_scale = p.length_scale;
  sol.l32 = p.l32;
  sol.psi = p.psi;
  sol.s = s;
  sol.u = u;
  sol.rho.resize(n);
  sol.r.assign(n, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t i = 0; i < n; ++i) {
    sol.rho[i] = p.profile(s[i]).rho;
    if (s[i] >= p.s_outer) sol.r[i] = p.r_of_s(s[i]);
  }
  sol.min_u = *std::min_element(u.begin(), u.end());
  for (double v : u)
    if (!std::isfinite(v)) throw SolveFailure("solve_conformal: non-finite solution");
  if (!(sol.min_u > 0.0)) {
    std::ostringstream os;
    os << "solve_conformal: u <= 0 (min " << sol.min_u << "); int |f|^{3/2} = " << p.l32
       << " is above the smallness threshold for this background";
    throw SolveFailure(os.str());
  }

  // Discrete residual relative to the size of the balanced terms.
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double fr = i + 1 < n ? face_coef[i] * (u[i + 1] - u[i]) : -robin * (u[i] - 1.0);
    const double fl = i > 0 ? face_coef[i - 1] * (u[i] - u[i - 1]) : 0.0;
    num = std::max(num, std::abs(fr - fl - Q[i] * u[i]));
    den = std::max({den, std::abs(fr), std::abs(fl), std::abs(Q[i] * u[i])});
  }
  sol.residual = den > 0 ? num / den : num;
  sol.boundary_flux = -4.0 * kPi * robin * (u[n - 1] - 1.0) * u[n - 1];

  // A from r (u - 1) = A + B'/r on the window and on its outer half.
  auto fit = [&](double a, double c) {
    std::vector<double> x, y;
    for (std::size_t i = 0; i < n; ++i)
      if (!std::isnan(sol.r[i]) && sol.r[i] >= a && sol.r[i] <= c) {
        x.push_back(1.0 / sol.r[i]);
        y.push_back(sol.r[i] * (u[i] - 1.0));
      }
    if (x.size() < 3) throw SolveFailure("solve_conformal: too few nodes in the fit window");
    return fit_line(x, y).intercept;
  };
  const double lsc = p.length_scale;
  sol.window = {opt.fit_lo * lsc, opt.fit_hi * lsc};
  sol.half_window = {std::sqrt(opt.fit_lo * opt.fit_hi) * lsc, opt.fit_hi * lsc};
  sol.A = fit(sol.window[0], sol.window[1]);
  sol.A_half = fit(sol.half_window[0], sol.half_window[1]);
  for (std::size_t i = 0; i < n; ++i)
    if (!std::isnan(sol.r[i]) && sol.r[i] >= sol.window[0] && sol.r[i] <= sol.window[1])
      sol.far_constant = std::max(sol.far_constant, sol.r[i] * std::abs(u[i] - 1.0));

  // Quadrature of the energy with u piecewise linear between nodes.
  static const GaussLegendre gl(4);
  double energy = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double h = s[i + 1] - s[i], du = (u[i + 1] - u[i]) / h;
    const double ui = u[i];
    const double si = s[i];
    energy -= opt.f_scale * p.source(s[i], s[i + 1], [&](double x) {
      const double v = ui + du * (x - si);
      return v * v;
    });
    energy -= du * du * gl.integrate([&](double x) { const double r0 = p.profile(x).rho; return r0 * r0; }, s[i], s[i + 1]);
  }
  // Tail beyond r_max from u - 1 = A/r: int |grad u|^2 dV = A^2 / r_max to leading order.
  energy -= sol.A * sol.A / rN;
  sol.energy = 4.0 * kPi * energy;
  return sol;
}

/// Radial problem of the smoothed glued metric with f from ScalarAux.
inline RadialProblem radial_problem(std::shared_ptr<const ScalarAux> f, double r_max_factor = 40.0) {
  const auto& sm = f->metric();
  const auto& g = sm.glued();
  RadialProblem p;
  p.profile = [f](double s) { return f->metric().profile(s); };
  p.source = [f](double a, double b, const std::function<double(double)>& w) {
    return f->weighted_integral(a, b, [&](double s, const RadialProfile& pr, double fv) {
      return pr.rho * pr.rho * fv * w(s);
    });
  };
  p.anchors = {0.0, g.s_fill(), g.s_sigma()};
  p.uniform_end = g.s_sigma() + g.sigma();
  p.s_end = g.s_of_r(r_max_factor * g.sigma());
  p.length_scale = g.sigma();
  p.s_outer = g.s_sigma();
  p.r_of_s = [f](double s) { return f->metric().glued().r_of_s(s); };
  const RadialAFMetric outer = g.outer();
  p.psi = [outer](double r) { return outer.psi(r)[0]; };
  p.l32 = f->l32_integral(p.s_end);
  return p;
}

inline ConformalSolution solve_conformal(const ScalarAux& f, ConformalOptions opt = {}) {
  auto fp = std::make_shared<const ScalarAux>(f);
  return solve_conformal(radial_problem(fp, opt.r_max_factor), opt);
}

/// Flat R^3 with a radial source f(r) supported in [0, support]; length scale L.
inline RadialProblem flat_problem(std::function<double(double)> f, double support, double L, double r_max_factor = 40.0) {
  RadialProblem p;
  p.profile = [](double s) { return RadialProfile{s, 1.0, 0.0, 0.0}; };
  auto fs = std::make_shared<std::function<double(double)>>(std::move(f));
  p.source = [fs, support](double a, double b, const std::function<double(double)>& w) {
    static const GaussLegendre gl(12);
    const double bb = std::min(b, support);
    if (bb <= a) return 0.0;
    return gl.integrate([&](double x) { return x * x * (*fs)(x) * w(x); }, a, bb);
  };
  p.anchors = {0.0, support};
  p.uniform_end = std::max(support, L);
  p.s_end = r_max_factor * L;
  p.length_scale = L;
  p.s_outer = 0.0;
  p.r_of_s = [](double s) { return s; };
  p.psi = [](double) { return 1.0; };
  static const GaussLegendre gl(24);
  p.l32 = gl.integrate([&](double x) { return 4.0 * kPi * x * x * std::pow(std::abs((*fs)(x)), 1.5); }, 0.0, support);
  return p;
}

struct MassComparison {
  double m_before = 0.0, m_after = 0.0, m_direct = 0.0;
  double ratio = 1.0, epsilon0 = 0.0;
  bool consistent = true;
  MassReport direct;
};

/// m_after = m_before + 2A, cross-checked by the ADM flux of u^4 Psi^4 delta
/// with u interpolated from the solution.
inline MassComparison mass_shift(const ConformalSolution& sol, double m_before) {
  MassComparison mc;
  mc.m_before = m_before;
  mc.m_after = m_before + 2.0 * sol.A;
  const double L = sol.length_scale;
  const std::vector<double> radii{5 * L, 7.5 * L, 10 * L, 15 * L, 20 * L};
  const auto* sp = &sol;
  auto phi = [sp](double r) { return sp->u_of_r(r) * sp->psi(r); };
  mc.direct = adm_mass(conformally_flat(phi), radii);
  mc.m_direct = mc.direct.extrapolated;
  mc.ratio = m_before != 0.0 ? mc.m_after / m_before : 1.0;
  mc.epsilon0 = 1.0 - mc.ratio;
  const double sc = std::max(std::abs(mc.m_after), std::abs(m_before));
  mc.consistent = std::abs(mc.m_direct - mc.m_after) <= 1e-2 * sc + 1e-12;
  return mc;
}

struct SupEstimateReport {
  std::vector<double> sigmas, sups;
  double exponent = 0.0;
  bool degenerate = false;
  bool pass = false;
};

/// Fitted exponent of sup over areal radius >= sigma/2 of |u - 1| against sigma.
inline SupEstimateReport sup_estimate_check(const std::vector<ConformalSolution>& sols, const std::vector<double>& sigmas) {
  if (sols.size() != sigmas.size() || sols.size() < 3) throw InvalidInput("sup_estimate_check: need >= 3 sigma values");
  SupEstimateReport rep;
  rep.sigmas = sigmas;
  for (std::size_t i = 0; i < sols.size(); ++i) rep.sups.push_back(sols[i].sup_deviation(0.5 * sigmas[i]));
  rep.degenerate = std::all_of(rep.sups.begin(), rep.sups.end(), [](double v) { return v < 1e-14; });
  if (rep.degenerate) {
    rep.pass = true;
    return rep;
  }
  std::vector<double> x, y;
  for (std::size_t i = 0; i < sols.size(); ++i) {
    x.push_back(std::log(sigmas[i]));
    y.push_back(std::log(rep.sups[i]));
  }
  rep.exponent = fit_line(x, y).slope;
  rep.pass = rep.exponent <= -0.3;
  return rep;
}

}  // namespace afiso
