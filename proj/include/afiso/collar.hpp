#pragma once

// Collar metric gamma = f(t) omega(t) + dt^2 with f = (1 - t/sigma)^2 over the
// area-preserving path, and the glued metric: Euclidean ball inside Sigma',
// collar between Sigma' and Sigma, outer AF metric beyond Sigma.

#include <memory>

#include "afiso/ms_path.hpp"
#include "afiso/radial.hpp"

namespace afiso {

class CollarMetric {
 public:
  explicit CollarMetric(std::shared_ptr<const MetricPath> path) : path_(std::move(path)) {
    if (!path_) throw InvalidInput("CollarMetric: null path");
  }
  const MetricPath& path() const { return *path_; }
  std::shared_ptr<const MetricPath> path_ptr() const { return path_; }
  double sigma() const { return path_->sigma(); }
  double length() const { return 0.5 * sigma(); }

  double warp(double t) const {
    const double s = 1.0 - t / sigma();
    return s * s;
  }
  double warp_derivative(double t) const { return -2.0 * (1.0 - t / sigma()) / sigma(); }

  /// Mean curvature of the slice {t} with respect to -d/dt (pointing toward Sigma).
  double slice_mean_curvature(double t) const { return -warp_derivative(t) / warp(t); }

 private:
  std::shared_ptr<const MetricPath> path_;
};

inline CollarMetric make_collar(const S2Field& u, double sigma, const PathOptions& opt = {}) {
  return CollarMetric(std::make_shared<const MetricPath>(build_path(u, sigma, opt)));
}

/// R_gamma(., t) = 2 K_h - 2/(f sigma^2) - |omega_dot|^2_omega / 4 with K_h = K_omega / f.
/// Values are returned at phi_t(p), i.e. as a function on the image sphere
/// where omega~(t) lives; sup norms and integrals are unaffected.
inline S2Field collar_scalar_curvature(const CollarMetric& collar, double t) {
  const auto& path = collar.path();
  if (!(t >= 0.0 && t <= collar.length() * (1.0 + 1e-14)))
    throw InvalidInput("collar_scalar_curvature: t outside [0, sigma/2]");
  const double sigma = collar.sigma();
  const double a = path.drift_at(t);
  const auto tilde = path.tilde_metric(t, a);
  const double ap = path.drift_rate_for(tilde);
  const auto psi = path.potential_for(tilde, ap);
  const auto od = path.omega_dot_for(tilde, psi, ap);
  const auto& w = tilde.logfactor();
  const auto lap = round_laplacian(w);
  const double f = collar.warp(t);
  std::vector<double> R(w.size());
  for (std::size_t i = 0; i < R.size(); ++i) {
    const double K = std::exp(-2.0 * w[i]) / (sigma * sigma) * (1.0 - lap[i]);
    R[i] = 2.0 * K / f - 2.0 / (f * sigma * sigma) - 0.25 * od.norm_sq[i];
  }
  return S2Field(w.grid_ptr(), std::move(R));
}

/// max over n_samples equally spaced t in [0, sigma/2] of sup |R_gamma|.
inline double max_collar_curvature(const CollarMetric& collar, int n_samples = 33) {
  double m = 0.0;
  for (int i = 0; i < n_samples; ++i) {
    const double t = collar.length() * i / (n_samples - 1);
    m = std::max(m, collar_scalar_curvature(collar, t).sup_norm());
  }
  return m;
}

struct CollarScalingReport {
  std::vector<double> sigmas, max_curvature;
  bool degenerate = false;
  double exponent = std::numeric_limits<double>::quiet_NaN();
};

inline CollarScalingReport collar_scaling_study(const std::function<S2Field(double)>& u_family,
                                                const std::vector<double>& sigmas, PathOptions opt = {},
                                                int n_samples = 33) {
  if (sigmas.size() < 3) throw InvalidInput("collar_scaling_study: need at least 3 sigma values");
  opt.track_flow = false;
  CollarScalingReport rep;
  rep.sigmas = sigmas;
  for (double s : sigmas) rep.max_curvature.push_back(max_collar_curvature(make_collar(u_family(s), s, opt), n_samples));
  if (detail::all_tiny(rep.max_curvature)) {
    rep.degenerate = true;
    return rep;
  }
  rep.exponent = detail::fit_loglog(sigmas, rep.max_curvature);
  return rep;
}

struct CollarVolumeArea {
  double volume = 0.0;
  std::vector<double> times, areas;
};

/// A(t) = f(t) Area(omega(t)) sampled at the path times; V = int_0^{sigma/2} A dt.
inline CollarVolumeArea collar_volume_and_area(const CollarMetric& collar) {
  const auto& path = collar.path();
  CollarVolumeArea out;
  for (std::size_t k = 0; k < path.times().size(); ++k) {
    const double t = path.times()[k];
    out.times.push_back(t);
    out.areas.push_back(collar.warp(t) * path.tilde_metric(t, path.drift()[k]).area());
  }
  static const GaussLegendre gl(16);
  const int panels = 8;
  const double L = collar.length();
  for (int p = 0; p < panels; ++p)
    out.volume += gl.integrate(
        [&](double t) { return collar.warp(t) * path.tilde_metric(t).area(); }, L * p / panels, L * (p + 1) / panels);
  return out;
}

/// Hawking mass of a CMC sphere.
inline double hawking_mass(double area, double H) {
  if (!(area > 0.0)) throw InvalidInput("hawking_mass: area must be positive");
  return std::sqrt(area / (16.0 * kPi)) * (1.0 - area * H * H / (16.0 * kPi));
}

enum class GluedPiece { ball, collar, outer };

/// Glued metric over a spherically symmetric outer end. In arc length s from
/// the center: ball on [0, s_fill], collar on [s_fill, s_sigma], outer beyond.
class GluedMetric {
 public:
  GluedMetric(RadialAFMetric outer, double sigma, double r_sigma, CollarMetric collar)
      : outer_(outer), sigma_(sigma), r_sigma_(r_sigma), R_sigma_(outer.areal_radius(r_sigma)), collar_(std::move(collar)) {}

  const RadialAFMetric& outer() const { return outer_; }
  const CollarMetric& collar() const { return collar_; }
  double sigma() const { return sigma_; }
  /// Coordinate radius of Sigma in the outer chart.
  double r_sigma() const { return r_sigma_; }
  /// Areal radius of Sigma; the fill ball has radius R_sigma / 2.
  double R_sigma() const { return R_sigma_; }
  double s_fill() const { return 0.5 * R_sigma_; }
  double s_sigma() const { return s_fill() + 0.5 * sigma_; }

  /// Relative mismatch of the induced metrics at Sigma and at Sigma'.
  double mismatch_sigma = 0.0, mismatch_fill = 0.0;

  double s_of_r(double r) const { return s_sigma() + outer_.proper_distance(r_sigma_, r); }
  double r_of_s(double s) const {
    double r = r_sigma_ + (s - s_sigma());
    r = std::max(r, 0.5 * r_sigma_);
    for (int it = 0; it < 100; ++it) {
      const double P = outer_.psi(r)[0];
      const double dr = (s_of_r(r) - s) / (P * P);
      r -= dr;
      if (std::abs(dr) <= 1e-15 * r) break;
    }
    return r;
  }

  GluedPiece piece_at(double s) const {
    if (s < s_fill()) return GluedPiece::ball;
    if (s < s_sigma()) return GluedPiece::collar;
    return GluedPiece::outer;
  }

  /// Profile of one piece's formula at s, extended past its own interval.
  RadialProfile piece_profile(GluedPiece piece, double s) const {
    RadialProfile p;
    switch (piece) {
      case GluedPiece::ball:
        p.rho = s;
        p.rho_s = 1.0;
        break;
      case GluedPiece::collar:
        p.rho = (1.0 - (s_sigma() - s) / sigma_) * R_sigma_;
        p.rho_s = R_sigma_ / sigma_;
        break;
      case GluedPiece::outer:
        p = outer_.profile(r_of_s(s));
        break;
    }
    return p;
  }
  RadialProfile profile(double s) const { return piece_profile(piece_at(s), s); }
  double scalar_curvature(double s) const {
    const auto p = profile(s);
    return warped_scalar_curvature(p.rho, p.rho_s, p.rho_ss);
  }

 private:
  RadialAFMetric outer_;
  double sigma_, r_sigma_, R_sigma_;
  CollarMetric collar_;
};

struct GlueOptions {
  int n_theta = 16;
  PathOptions path{};
};

/// Glues the collar over the centered CMC sphere of mean curvature 2/sigma.
inline GluedMetric glue(const RadialAFMetric& outer, double sigma, const GlueOptions& opt = {}) {
  if (!(sigma > 0.0)) throw InvalidInput("glue: sigma must be positive");
  const double r_sigma = outer.radius_for_mean_curvature(2.0 / sigma);
  const double R = outer.areal_radius(r_sigma);
  const auto grid = make_grid(opt.n_theta);
  auto popt = opt.path;
  if (popt.steps == 0) popt.steps = 16;  // symmetric data: the path is exactly conformal
  popt.track_flow = true;
  const auto u = S2Field::constant(grid, std::log(R / sigma));
  GluedMetric g(outer, sigma, r_sigma, make_collar(u, sigma, popt));

  const auto& path = g.collar().path();
  double ms = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i)
    ms = std::max(ms, std::abs(std::exp(2.0 * u[i]) * sigma * sigma / (R * R) - 1.0));
  g.mismatch_sigma = ms;
  const auto m = path.pulled_back_metric(path.snapshots().back());
  const double f = g.collar().warp(g.collar().length()), r2 = 0.25 * R * R;
  double mf = 0.0;
  for (int j = 0; j < grid->n_theta(); ++j)
    for (int k = 0; k < grid->n_phi(); ++k) {
      const auto i = grid->index(j, k);
      const double s2 = grid->sin_theta(j) * grid->sin_theta(j);
      mf = std::max({mf, std::abs(f * m.E[i] / r2 - 1.0), std::abs(f * m.G[i] / (r2 * s2) - 1.0),
                     std::abs(f * m.F[i] / r2)});
    }
  g.mismatch_fill = mf;
  return g;
}

struct BoundaryMeanCurvatures {
  /// H(Sigma, g) and H(Sigma, gamma).
  double H_inner_g = 0.0, H_inner_gamma = 0.0;
  /// H(Sigma', gamma) and H(Sigma', g_E).
  double H_outer_gamma = 0.0, H_outer_E = 0.0;
  double jump() const { return H_outer_E - H_outer_gamma; }
};

/// Naming follows the collar: "inner" is Sigma (t = 0), "outer" is Sigma' (t = sigma/2).
inline BoundaryMeanCurvatures boundary_mean_curvatures(const GluedMetric& g) {
  BoundaryMeanCurvatures h;
  h.H_inner_g = g.outer().mean_curvature(g.r_sigma());
  h.H_inner_gamma = g.collar().slice_mean_curvature(0.0);
  h.H_outer_gamma = g.collar().slice_mean_curvature(g.collar().length());
  h.H_outer_E = 4.0 / g.R_sigma();
  return h;
}

}  // namespace afiso
