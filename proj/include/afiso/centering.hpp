#pragma once

// Centering experiment: coordinate integrals of 1/|x| over off-center balls,
// their Monte-Carlo check, and off-center versus centered balls in radial
// conformally flat metrics phi(r)^4 delta.

#include <random>

#include "afiso/mass.hpp"

namespace afiso {

/// Coordinate ball of radius rho centred at rho * xi.
struct TrialRegion {
  double rho = 1.0;
  Vec3 xi{0.0, 0.0, 0.0};

  TrialRegion() = default;
  TrialRegion(double r, Vec3 x) : rho(r), xi(x) {
    if (!(r > 0.0)) throw InvalidInput("TrialRegion: rho must be positive");
  }
  TrialRegion(double r, double xi_norm) : TrialRegion(r, Vec3{0.0, 0.0, xi_norm}) {}
  double offset() const { return norm(xi); }
};

/// Euclidean-measure integrals: rho * int_{dB} 1/|x| dS and int_B 1/|x| dV.
struct CenteringIntegrals {
  double surface = 0.0, volume = 0.0;
};

inline CenteringIntegrals centering_integrals(const TrialRegion& t) {
  const double r2 = t.rho * t.rho, x = t.offset();
  if (x <= 1.0) return {4.0 * kPi * r2, 2.0 * kPi * r2 * (1.0 - x * x / 3.0)};
  return {4.0 * kPi * r2 / x, 4.0 * kPi * r2 / (3.0 * x)};
}

struct MonteCarloEstimate {
  double mean = 0.0, standard_error = 0.0;
};
struct CenteringMonteCarlo {
  MonteCarloEstimate surface, volume;
};

/// Monte Carlo with 1/|x| sampled on the sphere by importance sampling in the
/// polar angle about the offset axis, and in the ball by stratification in
/// (volume fraction, polar angle) cells.
inline CenteringMonteCarlo centering_integrals_mc(const TrialRegion& t, std::size_t n, std::uint64_t seed) {
  constexpr std::size_t kBands = 100;
  if (n < 2 * kBands * kBands) throw InvalidInput("centering_integrals_mc: need at least 20000 samples");
  std::seed_seq seq{seed};
  std::array<std::uint64_t, 2> seeds{};
  seq.generate(seeds.begin(), seeds.end());
  std::mt19937_64 gs(seeds[0]), gv(seeds[1]);
  std::uniform_real_distribution<double> unif;
  const double x = t.offset();
  const Vec3 e3 = x > 0 ? (1.0 / x) * t.xi : Vec3{0, 0, 1};
  const Vec3 e1 = normalized(std::abs(e3[0]) < 0.9 ? cross(e3, Vec3{1, 0, 0}) : cross(e3, Vec3{0, 1, 0}));
  const Vec3 e2 = cross(e3, e1);
  const Vec3 c = t.rho * t.xi;
  auto point = [&](double radius, double ca, double ph) {
    const double sa = std::sqrt(std::max(0.0, 1.0 - ca * ca));
    return c + radius * (sa * std::cos(ph) * e1 + sa * std::sin(ph) * e2 + ca * e3);
  };
  // Accumulates equal-weight strata: mean of stratum means, variance sum / K^2.
  auto run = [](std::size_t strata, std::size_t per, auto&& sample) {
    double mean = 0.0, var = 0.0;
    for (std::size_t k = 0; k < strata; ++k) {
      double s = 0.0, s2 = 0.0;
      for (std::size_t i = 0; i < per; ++i) {
        const double v = sample(k);
        s += v;
        s2 += v * v;
      }
      const double m = s / per;
      mean += m / strata;
      var += std::max(0.0, (s2 / per - m * m) * per / (per - 1.0)) / per / (double(strata) * strata);
    }
    return MonteCarloEstimate{mean, std::sqrt(var)};
  };
  const double r = t.rho;
  // Sphere: defensive mixture of uniform cos(alpha) and density ~ (1 + cos alpha)^{-1/2},
  // which keeps the weights bounded when the sphere passes through the origin.
  double ss = 0.0, ss2 = 0.0;
  const std::size_t ns = n;
  // t = 1 + cos(alpha) in (0, 2]; |x|^2 = rho^2 ((x - 1)^2 + 2 x t) avoids cancellation near the origin.
  for (std::size_t i = 0; i < ns; ++i) {
    double tt;
    if (unif(gs) < 0.5) {
      tt = 2.0 * (1.0 - unif(gs));
    } else {
      const double q = std::sqrt(2.0) * (1.0 - unif(gs));
      tt = q * q;
    }
    const double dens = 0.25 + 0.25 / (std::sqrt(2.0) * std::sqrt(tt));
    const double dist = r * std::sqrt((x - 1.0) * (x - 1.0) + 2.0 * x * tt);
    const double w = 2.0 * kPi / (dist * dens);
    ss += w;
    ss2 += w * w;
  }
  const double sm = ss / ns;
  const MonteCarloEstimate surf{sm / (4.0 * kPi), std::sqrt(std::max(0.0, ss2 / ns - sm * sm) / (ns - 1.0)) / (4.0 * kPi)};
  auto vol = run(kBands * kBands, n / (kBands * kBands), [&](std::size_t k) {
    const std::size_t kr = k / kBands, ka = k % kBands;
    const double rad = r * std::cbrt((kr + unif(gv)) / kBands);
    const double ca = -1.0 + 2.0 * (ka + unif(gv)) / kBands;
    return 1.0 / norm(point(rad, ca, 2.0 * kPi * unif(gv)));
  });
  const double sa = r * 4.0 * kPi * r * r, va = 4.0 / 3.0 * kPi * r * r * r;
  return {{sa * surf.mean, sa * surf.standard_error}, {va * vol.mean, va * vol.standard_error}};
}

/// Lower bound on the deficit of an off-center region after the conformal shift.
inline double centering_bound(const TrialRegion& t, double m, double eps0) {
  if (!(eps0 > 0.0 && eps0 < 1.0)) throw InvalidInput("centering_bound: eps0 must lie in (0, 1)");
  if (!(m > 0.0)) throw InvalidInput("centering_bound: m must be positive");
  const double x2 = t.offset() * t.offset();
  return 2.0 * eps0 * kPi * m * x2 * t.rho * t.rho / (1.0 + x2);
}

/// Metric volume of B_rho(c) minus B_{r_in} and area of dB_rho(c) outside B_{r_in}
/// for phi(r)^4 delta, reduced to radial integrals.
struct BallMeasure {
  double volume = 0.0, area = 0.0;
};

inline BallMeasure off_center_ball(const std::function<double(double)>& phi, double r_in, double rho, double c) {
  if (!(rho > 0.0) || c < 0.0 || r_in < 0.0) throw InvalidInput("off_center_ball: bad geometry");
  static const GaussLegendre gl(32);
  auto panels = [&](auto&& fn, double a, double b) {
    if (!(b > a)) return 0.0;
    double acc = 0.0, x = a;
    if (a <= 0.0) {
      x = b / 1024.0;
      acc += gl.integrate(fn, 0.0, x);
    }
    const int n = std::max(4, static_cast<int>(std::ceil(8.0 * std::log2(b / x))));
    const double q = std::pow(b / x, 1.0 / n);
    for (int i = 0; i < n; ++i) {
      const double y = i + 1 == n ? b : x * q;
      acc += gl.integrate(fn, x, y);
      x = y;
    }
    return acc;
  };
  BallMeasure out;
  // Solid angle of |x| = r inside the ball.
  auto solid = [&](double r) {
    if (c == 0.0) return r <= rho ? 4.0 * kPi : 0.0;
    const double cb = std::clamp((r * r + c * c - rho * rho) / (2.0 * r * c), -1.0, 1.0);
    return 2.0 * kPi * (1.0 - cb);
  };
  auto vol = [&](double r) { return std::pow(phi(r), 6) * r * r * solid(r); };
  const double inner = std::abs(c - rho), outer = c + rho;
  std::vector<double> br{r_in};
  if (inner > r_in) br.push_back(inner);
  if (outer > r_in) br.push_back(outer);
  for (std::size_t i = 0; i + 1 < br.size(); ++i) {
    if (c < rho && br[i + 1] == inner) {
      // Whole spheres inside the ball.
      out.volume += panels([&](double r) { return std::pow(phi(r), 6) * r * r * 4.0 * kPi; }, br[i], br[i + 1]);
    } else {
      out.volume += panels(vol, br[i], br[i + 1]);
    }
  }
  if (c == 0.0) {
    out.area = std::pow(phi(rho), 4) * 4.0 * kPi * rho * rho;
  } else {
    const double a = std::max(inner, r_in);
    out.area = 2.0 * kPi * rho / c * panels([&](double r) { return std::pow(phi(r), 4) * r; }, a, outer);
  }
  return out;
}

struct CenteredMatch {
  double r = 0.0, area = 0.0;
};

/// Centered ball of volume V (volume measured from r_in).
inline CenteredMatch centered_equal_volume(const std::function<double(double)>& phi, double r_in, double V) {
  double hi = std::max(2.0 * r_in, 1.0);
  while (off_center_ball(phi, r_in, hi, 0.0).volume < V) hi *= 2.0;
  const double r = find_root([&](double x) { return off_center_ball(phi, r_in, x, 0.0).volume - V; },
                             std::max(r_in, 1e-12), hi, 1e-15);
  return {r, off_center_ball(phi, r_in, r, 0.0).area};
}

struct CenteringComparison {
  TrialRegion region;
  double volume = 0.0, area_off = 0.0, area_centered = 0.0;
  bool centered_smaller = false;
};

inline CenteringComparison compare_centering(const std::function<double(double)>& phi, double r_in, const TrialRegion& t) {
  CenteringComparison cc;
  cc.region = t;
  const auto b = off_center_ball(phi, r_in, t.rho, t.rho * t.offset());
  cc.volume = b.volume;
  cc.area_off = b.area;
  cc.area_centered = centered_equal_volume(phi, r_in, b.volume).area;
  cc.centered_smaller = cc.area_centered < cc.area_off;
  return cc;
}

/// Flat model shifted by u = 1 + A/r with A = -eps0 m / 2 (mass 2A), regions cut at |x| = 1/2.
struct CenteringDeficit {
  double bound = 0.0;
  double deficit = 0.0;  // V - A^{3/2}/(6 sqrt pi) - (m_model/2) A of the off-center ball
  double leading = 0.0;  // eps0 m (2 pi rho^2 + rho int 1/|x| - 3 int 1/|x|)
  bool meets = false;    // deficit >= 0.9 bound
};

inline CenteringDeficit centering_deficit(const TrialRegion& t, double m, double eps0, double r_in = 0.5) {
  CenteringDeficit d;
  d.bound = centering_bound(t, m, eps0);
  const double A = -0.5 * eps0 * m;
  const auto b = off_center_ball([A](double r) { return 1.0 + A / r; }, r_in, t.rho, t.rho * t.offset());
  d.deficit = isoperimetric_residual(b.volume, b.area, 2.0 * A);
  const auto ci = centering_integrals(t);
  d.leading = eps0 * m * (2.0 * kPi * t.rho * t.rho + ci.surface - 3.0 * ci.volume);
  d.meets = d.deficit >= 0.9 * d.bound;
  return d;
}

}  // namespace afiso
