#pragma once

// Mass functionals: ADM flux (generic Cartesian metric and conformally flat
// closed form), Hawking mass by quadrature, Huisken's quasilocal isoperimetric
// mass, and the centered-sphere isoperimetric profile of radial metrics.

#include <functional>
#include <sstream>
#include <string>

#include "afiso/collar.hpp"

namespace afiso {

using Mat3 = std::array<std::array<double, 3>, 3>;
/// Metric components g_ij(x) in a Cartesian chart at infinity.
using CartesianMetric = std::function<Mat3(const Vec3&)>;

inline CartesianMetric conformally_flat(std::function<double(double)> phi) {
  return [phi = std::move(phi)](const Vec3& x) {
    const double w = std::pow(phi(norm(x)), 4);
    Mat3 g{};
    for (int i = 0; i < 3; ++i) g[i][i] = w;
    return g;
  };
}

inline CartesianMetric cartesian(const RadialAFMetric& m) {
  return conformally_flat([m](double r) { return m.psi(r)[0]; });
}

struct MassReport {
  std::vector<double> radii, estimates;
  double extrapolated = 0.0;
  double fit_residual = 0.0;
  /// Change of the limit when the smallest of the fitted radii is dropped.
  double drop_change = 0.0;
  bool consistent = true;
  bool monotone = true;

  std::string to_json() const {
    std::ostringstream os;
    os.precision(17);
    os << "{\"radii\":[";
    for (std::size_t i = 0; i < radii.size(); ++i) os << (i ? "," : "") << radii[i];
    os << "],\"estimates\":[";
    for (std::size_t i = 0; i < estimates.size(); ++i) os << (i ? "," : "") << estimates[i];
    os << "],\"extrapolated\":" << extrapolated << ",\"fit_residual\":" << fit_residual
       << ",\"drop_change\":" << drop_change << ",\"consistent\":" << (consistent ? "true" : "false")
       << ",\"monotone\":" << (monotone ? "true" : "false") << "}";
    return os.str();
  }
};

/// Linear fit in 1/r over the largest three radii; the intercept is the limit.
inline MassReport extrapolate_mass(std::vector<double> radii, std::vector<double> est, double rel_tol = 1e-2) {
  if (radii.size() != est.size() || radii.size() < 3) throw InvalidInput("extrapolate_mass: need >= 3 radii");
  for (std::size_t i = 1; i < radii.size(); ++i)
    if (!(radii[i] > radii[i - 1])) throw InvalidInput("extrapolate_mass: radii must be increasing");
  MassReport rep;
  rep.radii = radii;
  rep.estimates = est;
  const std::size_t n = radii.size();
  auto fit = [&](std::size_t k) {
    std::vector<double> x, y;
    for (std::size_t i = n - k; i < n; ++i) {
      x.push_back(1.0 / radii[i]);
      y.push_back(est[i]);
    }
    return fit_line(x, y);
  };
  const auto f3 = fit(3), f2 = fit(2);
  rep.extrapolated = f3.intercept;
  rep.fit_residual = f3.rms_residual;
  rep.drop_change = std::abs(f3.intercept - f2.intercept);
  double scale = 0.0;
  for (double e : est) scale = std::max(scale, std::abs(e));
  rep.consistent = rep.drop_change <= rel_tol * std::max(scale, 1e-12) + 1e-14;
  int sign = 0;
  for (std::size_t i = 1; i < n; ++i) {
    const double d = est[i] - est[i - 1];
    if (std::abs(d) <= rep.fit_residual + 1e-14 * std::max(1.0, scale)) continue;
    const int s = d > 0 ? 1 : -1;
    if (sign != 0 && s != sign) rep.monotone = false;
    sign = s;
  }
  return rep;
}

/// (1/16 pi) of the ADM flux integrand over the coordinate sphere |x| = r, with
/// fourth-order central differences and Gauss-Legendre sphere quadrature.
inline double adm_flux(const CartesianMetric& g, double r, int n_theta = 12) {
  const GaussLegendre gl(n_theta);
  const int n_phi = 2 * n_theta;
  const double h = 1e-2 * r;
  auto dg = [&](const Vec3& x, int k) {
    Vec3 e{0, 0, 0};
    e[k] = h;
    const auto a = g(x + 2.0 * e), b = g(x + e), c = g(x - e), d = g(x - 2.0 * e);
    Mat3 out{};
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) out[i][j] = (-a[i][j] + 8.0 * b[i][j] - 8.0 * c[i][j] + d[i][j]) / (12.0 * h);
    return out;
  };
  double acc = 0.0;
  for (int j = 0; j < n_theta; ++j) {
    const double ct = gl.nodes[j], st = std::sqrt(1.0 - ct * ct);
    for (int k = 0; k < n_phi; ++k) {
      const double ph = 2.0 * kPi * (k + 0.5) / n_phi;
      const Vec3 nu{st * std::cos(ph), st * std::sin(ph), ct};
      const Vec3 x = r * nu;
      const std::array<Mat3, 3> d{dg(x, 0), dg(x, 1), dg(x, 2)};
      double v = 0.0;
      for (int i = 0; i < 3; ++i)
        for (int jj = 0; jj < 3; ++jj) v += (d[i][i][jj] - d[jj][i][i]) * nu[jj];
      acc += v * gl.weights[j] * (2.0 * kPi / n_phi) * r * r;
    }
  }
  return acc / (16.0 * kPi);
}

inline MassReport adm_mass(const CartesianMetric& g, const std::vector<double>& radii) {
  std::vector<double> est;
  for (double r : radii) est.push_back(adm_flux(g, r));
  return extrapolate_mass(radii, est);
}
inline MassReport adm_mass(const RadialAFMetric& m, const std::vector<double>& radii) {
  return adm_mass(cartesian(m), radii);
}

/// Closed-form flux of Phi^4 delta through |x| = r: -2 Phi^3 r^2 Phi'.
inline double conformal_flux(double phi, double dphi, double r) { return -2.0 * phi * phi * phi * r * r * dphi; }

/// Huisken's quasilocal isoperimetric mass.
inline double quasilocal_iso_mass(double V, double A) {
  if (!(A > 0.0)) throw InvalidInput("quasilocal_iso_mass: area must be positive");
  if (V < 0.0) throw InvalidInput("quasilocal_iso_mass: volume must be >= 0");
  return 2.0 / A * (V - std::pow(A, 1.5) / (6.0 * std::sqrt(kPi)));
}

/// V - A^{3/2}/(6 sqrt pi) - (m/2) A.
inline double isoperimetric_residual(double V, double A, double m) {
  return V - std::pow(A, 1.5) / (6.0 * std::sqrt(kPi)) - 0.5 * m * A;
}

/// Centered coordinate ball {r_h <= |x| <= r} measured from the horizon.
struct CenteredBall {
  double r = 0.0, volume = 0.0, area = 0.0;
};

inline CenteredBall centered_ball(const RadialAFMetric& g, double r) {
  const double rh = g.horizon_radius();
  if (!(r > rh)) throw InvalidInput("centered_ball: radius must exceed the horizon radius");
  return {r, g.volume(rh > 0 ? rh : 0.0, r), g.area(r)};
}

inline double iso_mass_centered(const RadialAFMetric& g, double r) {
  const auto b = centered_ball(g, r);
  return quasilocal_iso_mass(b.volume, b.area);
}

/// Hawking mass of the centered sphere |x| = r with the area from sphere
/// quadrature of the induced metric and H = (dA/ds)/A from differences of areas.
inline double hawking_mass_quadrature(const CartesianMetric& g, double r, int n_theta = 16) {
  const GaussLegendre gl(n_theta);
  const int n_phi = 2 * n_theta;
  auto area = [&](double rr) {
    double acc = 0.0;
    for (int j = 0; j < n_theta; ++j) {
      const double ct = gl.nodes[j], st = std::sqrt(1.0 - ct * ct);
      for (int k = 0; k < n_phi; ++k) {
        const double ph = 2.0 * kPi * (k + 0.5) / n_phi;
        const Vec3 nu{st * std::cos(ph), st * std::sin(ph), ct};
        const Vec3 et{ct * std::cos(ph), ct * std::sin(ph), -st}, ep{-std::sin(ph), std::cos(ph), 0.0};
        const auto G = g(rr * nu);
        auto form = [&](const Vec3& a, const Vec3& b) {
          double s = 0.0;
          for (int i = 0; i < 3; ++i)
            for (int l = 0; l < 3; ++l) s += G[i][l] * a[i] * b[l];
          return s;
        };
        const double E = form(et, et), F = form(et, ep), H = form(ep, ep);
        acc += std::sqrt(E * H - F * F) * rr * rr * gl.weights[j] * (2.0 * kPi / n_phi);
      }
    }
    return acc;
  };
  // Normal length element ds = sqrt(g(nu, nu)) dr, averaged over the sphere.
  auto normal_scale = [&](double rr) {
    double acc = 0.0;
    for (int j = 0; j < n_theta; ++j) {
      const double ct = gl.nodes[j], st = std::sqrt(1.0 - ct * ct);
      const Vec3 nu{st, 0.0, ct};
      const auto G = g(rr * nu);
      double s = 0.0;
      for (int i = 0; i < 3; ++i)
        for (int l = 0; l < 3; ++l) s += G[i][l] * nu[i] * nu[l];
      acc += std::sqrt(s) * gl.weights[j] / 2.0;
    }
    return acc;
  };
  const double h = 1e-3 * r;
  const double A = area(r);
  const double dA = (-area(r + 2 * h) + 8 * area(r + h) - 8 * area(r - h) + area(r - 2 * h)) / (12 * h);
  const double H = dA / (A * normal_scale(r));
  return hawking_mass(A, H);
}

struct ProfilePoint {
  double volume = 0.0, r = 0.0, area = 0.0;
};

/// Area of the centered sphere enclosing volume V (measured from the horizon).
inline ProfilePoint iso_profile_radial(const RadialAFMetric& g, double V, double r_max = 1e8) {
  if (!(V > 0.0)) throw InvalidInput("iso_profile_radial: V must be positive");
  const double rh = g.horizon_radius();
  const double lo = rh > 0 ? rh * (1 + 1e-12) : 1e-300;
  if (V > centered_ball(g, r_max).volume) throw InvalidInput("iso_profile_radial: V outside the tabulated range");
  const double r = find_root([&](double rr) { return centered_ball(g, rr).volume - V; }, lo, r_max, 1e-15);
  return {V, r, g.area(r)};
}

}  // namespace afiso
