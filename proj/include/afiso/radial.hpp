#pragma once

// Spherically symmetric asymptotically flat metrics in isotropic form
// g = Psi(r)^4 (dr^2 + r^2 g_*), Psi = 1 + m/(2r) + kappa r^{-1-tau}.
// kappa = 0 is exact Schwarzschild.

#include <array>
#include <cmath>

#include "afiso/common.hpp"

namespace afiso {

/// Areal radius rho and its derivatives in arc length s along radial geodesics.
struct RadialProfile {
  double rho = 0.0, rho_s = 0.0, rho_ss = 0.0, rho_sss = 0.0;
};

/// Scalar curvature of ds^2 + rho(s)^2 g_*.
inline double warped_scalar_curvature(double rho, double rho_s, double rho_ss) {
  return 2.0 * (1.0 - rho_s * rho_s) / (rho * rho) - 4.0 * rho_ss / rho;
}

class RadialAFMetric {
 public:
  explicit RadialAFMetric(double m = 0.0, double kappa = 0.0, double tau = 1.0) : m_(m), kappa_(kappa), tau_(tau) {
    if (!std::isfinite(m) || m < 0.0) throw InvalidInput("RadialAFMetric: mass must be finite and >= 0");
    if (!(tau > 0.5)) throw InvalidInput("RadialAFMetric: decay rate tau must exceed 1/2");
    if (!std::isfinite(kappa)) throw InvalidInput("RadialAFMetric: kappa must be finite");
  }
  static RadialAFMetric flat() { return RadialAFMetric(0.0); }
  static RadialAFMetric schwarzschild(double m) { return RadialAFMetric(m); }

  double mass() const { return m_; }
  double kappa() const { return kappa_; }
  double tau() const { return tau_; }

  /// Psi and its first three r-derivatives.
  std::array<double, 4> psi(double r) const {
    const double p = 1.0 + tau_;
    const double k = kappa_ * std::pow(r, -p);
    return {1.0 + 0.5 * m_ / r + k, -0.5 * m_ / (r * r) - p * k / r, m_ / (r * r * r) + p * (p + 1) * k / (r * r),
            -3.0 * m_ / (r * r * r * r) - p * (p + 1) * (p + 2) * k / (r * r * r)};
  }

  /// Cartesian metric component factor Psi^4.
  double conformal_weight(double r) const { return std::pow(psi(r)[0], 4); }

  double areal_radius(double r) const {
    const double P = psi(r)[0];
    return P * P * r;
  }

  RadialProfile profile(double r) const {
    const auto P = psi(r);
    const double p = P[1] / P[0];
    const double p_r = P[2] / P[0] - p * p;
    const double p_rr = P[3] / P[0] - P[2] * P[1] / (P[0] * P[0]) - 2.0 * p * p_r;
    const double q = 1.0 + 2.0 * r * p, q_r = 2.0 * p + 2.0 * r * p_r, q_rr = 4.0 * p_r + 2.0 * r * p_rr;
    const double l = P[0] * P[0];  // ds/dr
    const double l_r = 2.0 * P[0] * P[1];
    RadialProfile out;
    out.rho = l * r;
    out.rho_s = q;
    out.rho_ss = q_r / l;
    out.rho_sss = (q_rr / l - q_r * l_r / (l * l)) / l;
    return out;
  }

  double mean_curvature(double r) const {
    const auto pr = profile(r);
    return 2.0 * pr.rho_s / pr.rho;
  }
  double scalar_curvature(double r) const {
    const auto pr = profile(r);
    return warped_scalar_curvature(pr.rho, pr.rho_s, pr.rho_ss);
  }
  double area(double r) const {
    const double rho = areal_radius(r);
    return 4.0 * kPi * rho * rho;
  }

  /// Radius of the minimal sphere (r = m/2 for Schwarzschild); 0 for flat data.
  double horizon_radius() const {
    if (m_ == 0.0 && kappa_ == 0.0) return 0.0;
    if (kappa_ == 0.0) return 0.5 * m_;
    const double hi = 2.0 * (m_ + std::abs(kappa_) + 1.0);
    return find_root([&](double r) { return profile(r).rho_s; }, 1e-6 * hi, hi, 1e-14);
  }

  /// Proper radial distance between coordinate radii r0 < r1.
  double proper_distance(double r0, double r1) const {
    if (kappa_ == 0.0) {
      auto F = [&](double r) { return r + m_ * std::log(r) - m_ * m_ / (4.0 * r); };
      return F(r1) - F(r0);
    }
    static const GaussLegendre gl(32);
    return integrate_log_panels([&](double r) { const double P = psi(r)[0]; return P * P; }, r0, r1, gl);
  }

  /// Metric volume between coordinate spheres r0 < r1.
  double volume(double r0, double r1) const {
    static const GaussLegendre gl(32);
    return integrate_log_panels(
        [&](double r) {
          const double P = psi(r)[0];
          return 4.0 * kPi * std::pow(P, 6) * r * r;
        },
        r0, r1, gl);
  }

  /// Coordinate radius of the centered sphere with mean curvature H on the
  /// outer branch (where H decreases in r).
  double radius_for_mean_curvature(double H) const {
    if (!(H > 0.0)) throw InvalidInput("radius_for_mean_curvature: H must be positive");
    const double guess = 2.0 / H;
    const double hi = 4.0 * guess + 4.0 * m_;
    auto fn = [&](double r) { return mean_curvature(r) - H; };
    // Walk out from the horizon until H exceeds the target, then bracket the descent.
    double lo = std::max(horizon_radius() * 1.0001, 1e-3 * guess);
    while (fn(lo) <= 0.0 && lo < hi) lo *= 1.05;
    if (!(fn(lo) > 0.0 && fn(hi) < 0.0))
      throw InvalidInput("radius_for_mean_curvature: no outer CMC sphere with this H (sigma too small for the mass)");
    return find_root(fn, lo, hi, 1e-15);
  }

 private:
  template <class F>
  static double integrate_log_panels(F&& fn, double r0, double r1, const GaussLegendre& gl) {
    if (!(r1 > r0)) return 0.0;
    if (r0 <= 0.0) {
      const double c = r1 / 1024.0;
      return gl.integrate(fn, 0.0, c) + integrate_log_panels(fn, c, r1, gl);
    }
    // Geometric panels resolve the 1/r structure uniformly in scale.
    const int n = std::max(4, static_cast<int>(std::ceil(8.0 * std::log2(r1 / r0))));
    double acc = 0.0;
    const double q = std::pow(r1 / r0, 1.0 / n);
    double a = r0;
    for (int i = 0; i < n; ++i) {
      const double b = (i + 1 == n) ? r1 : a * q;
      acc += gl.integrate(fn, a, b);
      a = b;
    }
    return acc;
  }

  double m_, kappa_, tau_;
};

}  // namespace afiso
