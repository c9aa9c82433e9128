#pragma once

// Area-preserving path of metrics on S^2 joining e^{2u} sigma^2 g_* to a round
// metric: conformal path omega~(t) with drift a(t), per-time Poisson potential
// psi(t) and the flow of X_t = grad psi(t). The drift ODE and the flow are
// advanced together with classical RK4.

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "afiso/s2_field.hpp"

namespace afiso {

/// Thrown by build_path when a step cannot be completed.
class PathFailure : public SolveFailure {
 public:
  PathFailure(int step, const std::string& what)
      : SolveFailure("build_path: step " + std::to_string(step) + ": " + what), step_(step) {}
  int step() const { return step_; }

 private:
  int step_;
};

/// One RK4 step of dx/dt = X(t, x) on the unit sphere, followed by projection
/// back onto the sphere. X returns ambient vectors; their normal part is discarded.
template <class VectorField>
std::vector<Vec3> flow_step(const std::vector<Vec3>& positions, VectorField&& X, double t, double dt) {
  if (!(dt > 0.0)) throw InvalidInput("flow_step: dt must be positive");
  auto tangent = [&](double s, const std::vector<Vec3>& p) {
    std::vector<Vec3> v(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
      const Vec3 x = normalized(p[i]);
      const Vec3 w = X(s, x);
      v[i] = w - dot(w, x) * x;
    }
    return v;
  };
  auto axpy = [](const std::vector<Vec3>& p, const std::vector<Vec3>& v, double h) {
    std::vector<Vec3> out(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) out[i] = p[i] + h * v[i];
    return out;
  };
  const auto k1 = tangent(t, positions);
  const auto k2 = tangent(t + 0.5 * dt, axpy(positions, k1, 0.5 * dt));
  const auto k3 = tangent(t + 0.5 * dt, axpy(positions, k2, 0.5 * dt));
  const auto k4 = tangent(t + dt, axpy(positions, k3, dt));
  std::vector<Vec3> out(positions.size());
  for (std::size_t i = 0; i < positions.size(); ++i)
    out[i] = normalized(positions[i] + (dt / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
  return out;
}

struct PathOptions {
  /// Number of time steps on [0, sigma/2]; 0 selects max(200, 4 sigma).
  int steps = 0;
  /// Track the diffeomorphism (needed for pointwise area-form checks).
  bool track_flow = true;
  /// Keep every n-th flow/potential snapshot (0: about 20 snapshots).
  int snapshot_stride = 0;
  PoissonOptions poisson{};
};

/// Per-step diagnostics.
struct PathStepRecord {
  double t = 0.0;
  double a = 0.0;
  double a_prime = 0.0;
  /// Area of omega~(t) relative to the initial area, minus one.
  double total_area_deviation = 0.0;
  /// max_p |dA_{omega(t)}(p) / dA_{omega(0)}(p) - 1|; NaN when the flow is not tracked.
  double area_form_deviation = 0.0;
  double psi_sup = 0.0;
  /// sup |Hess psi|_{omega~}.
  double hessian_sup = 0.0;
  /// sup |tr_{omega} omega_dot|.
  double trace_omega_dot = 0.0;
  /// sup |omega_dot|^2_{omega}.
  double omega_dot_sq_sup = 0.0;
};

struct PathSnapshot {
  int step = 0;
  double t = 0.0;
  S2Field potential;
  /// phi_t applied to every grid node (empty when the flow is not tracked).
  std::vector<Vec3> flowmap;
};

/// omega_dot in an ambient 3x3 representation (xx, yy, zz, xy, xz, yz) on the grid.
struct AmbientTensorField {
  std::vector<std::array<double, 6>> comps;
};

/// First fundamental form (E, F, G) in the reference (theta, phi) chart.
struct ChartMetric {
  std::vector<double> E, F, G;
};

class MetricPath {
 public:
  double sigma() const { return sigma_; }
  const S2Field& initial_logfactor() const { return u_; }
  const std::vector<double>& times() const { return times_; }
  const std::vector<double>& drift() const { return a_; }
  const std::vector<double>& drift_rate() const { return a_prime_; }
  const std::vector<PathStepRecord>& records() const { return records_; }
  const std::vector<PathSnapshot>& snapshots() const { return snapshots_; }
  const std::vector<std::string>& warnings() const { return warnings_; }
  bool tracks_flow() const { return track_flow_; }
  int steps() const { return static_cast<int>(times_.size()) - 1; }
  double end_time() const { return 0.5 * sigma_; }

  /// a(t) by cubic Hermite interpolation of the integrated drift.
  double drift_at(double t) const {
    if (t <= 0.0) return a_.front();
    if (t >= times_.back()) return a_.back();
    const double dt = times_[1] - times_[0];
    const auto k = std::min(static_cast<std::size_t>(t / dt), times_.size() - 2);
    const double s = (t - times_[k]) / dt;
    const double h00 = 2 * s * s * s - 3 * s * s + 1, h10 = s * s * s - 2 * s * s + s;
    const double h01 = -2 * s * s * s + 3 * s * s, h11 = s * s * s - s * s;
    return h00 * a_[k] + h10 * dt * a_prime_[k] + h01 * a_[k + 1] + h11 * dt * a_prime_[k + 1];
  }

  /// Log-conformal factor of omega~(t): u (1 - 2t/sigma) + a(t).
  S2Field logfactor_at(double t, std::optional<double> drift = std::nullopt) const {
    const double a = drift ? *drift : drift_at(t);
    std::vector<double> w(u_.size());
    const double s = 1.0 - 2.0 * t / sigma_;
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = u_[i] * s + a;
    return S2Field(u_.grid_ptr(), std::move(w));
  }
  S2ConformalMetric tilde_metric(double t, std::optional<double> drift = std::nullopt) const {
    return S2ConformalMetric(sigma_, logfactor_at(t, drift));
  }

  /// a'(t) = (2/sigma) average of u over omega~(t).
  double drift_rate_for(const S2ConformalMetric& tilde) const {
    return 2.0 / sigma_ * quadrature(u_, tilde) / tilde.area();
  }

  /// psi(t) solving Delta_{omega~} psi = 4u/sigma - 2a'.
  S2Field potential_for(const S2ConformalMetric& tilde, double a_prime) const {
    std::vector<double> rhs(u_.size());
    for (std::size_t i = 0; i < rhs.size(); ++i) rhs[i] = 4.0 * u_[i] / sigma_ - 2.0 * a_prime;
    auto opt = poisson_;
    opt.reference_scale = std::max(opt.reference_scale, 4.0 * u_.sup_norm() / sigma_ + 2.0 * std::abs(a_prime));
    return solve_poisson(S2Field(u_.grid_ptr(), std::move(rhs)), tilde, opt);
  }

  /// omega_dot (before pull-back) = (2a' - 4u/sigma) omega~ + 2 Hess psi, in frame
  /// components, together with tr and |.|^2 with respect to omega~.
  struct OmegaDot {
    std::vector<FrameTensor> frame;
    std::vector<double> trace, norm_sq;
  };
  OmegaDot omega_dot_for(const S2ConformalMetric& tilde, const S2Field& psi, double a_prime) const {
    const auto gh = gradient_and_hessian(psi, tilde);
    OmegaDot out;
    const auto n = u_.size();
    out.frame.resize(n);
    out.trace.resize(n);
    out.norm_sq.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double rho = gh.density[i];
      const double c = (2.0 * a_prime - 4.0 * u_[i] / sigma_) * rho;
      FrameTensor T;
      T.tt = c + 2.0 * gh.hessian[i].tt;
      T.pp = c + 2.0 * gh.hessian[i].pp;
      T.tp = 2.0 * gh.hessian[i].tp;
      out.frame[i] = T;
      out.trace[i] = (T.tt + T.pp) / rho;
      out.norm_sq[i] = (T.tt * T.tt + 2 * T.tp * T.tp + T.pp * T.pp) / (rho * rho);
    }
    return out;
  }

  /// omega_dot at time t of the stored grid (image coordinates).
  OmegaDot omega_dot_at_step(int k) const {
    const auto tilde = tilde_metric(times_[k], a_[k]);
    return omega_dot_for(tilde, potential_for(tilde, a_prime_[k]), a_prime_[k]);
  }

  /// omega_dot as an ambient tensor field on the grid at step k.
  AmbientTensorField omega_dot_ambient(int k) const {
    const auto od = omega_dot_at_step(k);
    const auto& g = u_.grid();
    AmbientTensorField out;
    out.comps.resize(g.size());
    for (int j = 0; j < g.n_theta(); ++j)
      for (int kk = 0; kk < g.n_phi(); ++kk) {
        const auto i = g.index(j, kk);
        const Vec3 et = g.e_theta(j, kk), ep = g.e_phi(j, kk);
        const auto& T = od.frame[i];
        auto c = [&](int a, int b) {
          return T.tt * et[a] * et[b] + T.pp * ep[a] * ep[b] + T.tp * (et[a] * ep[b] + ep[a] * et[b]);
        };
        out.comps[i] = {c(0, 0), c(1, 1), c(2, 2), c(0, 1), c(0, 2), c(1, 2)};
      }
    return out;
  }

  /// omega(t) = phi_t^* omega~(t) in the reference chart, for a stored snapshot.
  ChartMetric pulled_back_metric(const PathSnapshot& snap) const {
    require_flow(snap);
    const auto& g = u_.grid();
    const auto d = flow_derivatives(snap.flowmap);
    const auto w = logfactor_at(snap.t, a_[snap.step]).values();
    GridInterpolator interp(u_.grid_ptr());
    ChartMetric out;
    out.E.resize(g.size());
    out.F.resize(g.size());
    out.G.resize(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double dens = std::exp(2.0 * interp(w, snap.flowmap[i])) * sigma_ * sigma_;
      out.E[i] = dens * dot(d.first[i], d.first[i]);
      out.F[i] = dens * dot(d.first[i], d.second[i]);
      out.G[i] = dens * dot(d.second[i], d.second[i]);
    }
    return out;
  }

  /// phi_t^* omega_dot in the reference chart, for a stored snapshot.
  ChartMetric pulled_back_omega_dot(const PathSnapshot& snap) const {
    require_flow(snap);
    const auto& g = u_.grid();
    const auto d = flow_derivatives(snap.flowmap);
    const auto amb = omega_dot_ambient(snap.step);
    std::array<std::vector<double>, 6> comp;
    for (int c = 0; c < 6; ++c) {
      comp[c].resize(g.size());
      for (std::size_t i = 0; i < g.size(); ++i) comp[c][i] = amb.comps[i][c];
    }
    GridInterpolator interp(u_.grid_ptr());
    ChartMetric out;
    out.E.resize(g.size());
    out.F.resize(g.size());
    out.G.resize(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
      const auto st = interp.stencil(snap.flowmap[i]);
      std::array<double, 6> T;
      for (int c = 0; c < 6; ++c) T[c] = GridInterpolator::apply(st, comp[c]);
      auto form = [&](const Vec3& a, const Vec3& b) {
        return T[0] * a[0] * b[0] + T[1] * a[1] * b[1] + T[2] * a[2] * b[2] +
               T[3] * (a[0] * b[1] + a[1] * b[0]) + T[4] * (a[0] * b[2] + a[2] * b[0]) +
               T[5] * (a[1] * b[2] + a[2] * b[1]);
      };
      out.E[i] = form(d.first[i], d.first[i]);
      out.F[i] = form(d.first[i], d.second[i]);
      out.G[i] = form(d.second[i], d.second[i]);
    }
    return out;
  }

  /// Jacobian of phi_t relative to the round area form, at every grid node.
  std::vector<double> flow_jacobian(const std::vector<Vec3>& flowmap) const {
    const auto& g = u_.grid();
    const auto d = flow_derivatives(flowmap);
    std::vector<double> J(g.size());
    for (int j = 0; j < g.n_theta(); ++j)
      for (int k = 0; k < g.n_phi(); ++k) {
        const auto i = g.index(j, k);
        J[i] = norm(cross(d.first[i], d.second[i])) / g.sin_theta(j);
      }
    return J;
  }

  /// Oscillation of the log-conformal factor of omega~(sigma/2).
  double endpoint_oscillation() const { return logfactor_at(end_time(), a_.back()).oscillation(); }

  /// max over recorded steps of the pointwise area-form deviation.
  double max_area_form_deviation() const {
    double m = 0.0;
    for (const auto& r : records_) m = std::max(m, r.area_form_deviation);
    return m;
  }
  double max_total_area_deviation() const {
    double m = 0.0;
    for (const auto& r : records_) m = std::max(m, std::abs(r.total_area_deviation));
    return m;
  }

 private:
  friend MetricPath build_path(const S2Field& u, double sigma, const PathOptions& opt);

  void require_flow(const PathSnapshot& snap) const {
    if (snap.flowmap.empty()) throw InvalidInput("MetricPath: snapshot has no flow map");
  }

  // d(phi)/d(theta) and d(phi)/d(phi) by spectral differentiation of the components.
  std::pair<std::vector<Vec3>, std::vector<Vec3>> flow_derivatives(const std::vector<Vec3>& flowmap) const {
    const auto& g = u_.grid();
    std::pair<std::vector<Vec3>, std::vector<Vec3>> out;
    out.first.resize(g.size());
    out.second.resize(g.size());
    for (int c = 0; c < 3; ++c) {
      std::vector<double> comp(g.size());
      for (std::size_t i = 0; i < g.size(); ++i) comp[i] = flowmap[i][c];
      const auto d = g.synthesize_all(g.analyze(comp));
      for (std::size_t i = 0; i < g.size(); ++i) {
        out.first[i][c] = d.d_theta[i];
        out.second[i][c] = d.d_phi[i];
      }
    }
    return out;
  }

  double sigma_ = 1.0;
  S2Field u_;
  bool track_flow_ = true;
  PoissonOptions poisson_{};
  std::vector<double> times_, a_, a_prime_;
  std::vector<PathStepRecord> records_;
  std::vector<PathSnapshot> snapshots_;
  std::vector<std::string> warnings_;
};

inline int default_path_steps(double sigma) { return std::max(200, static_cast<int>(std::ceil(4.0 * sigma))); }

/// Builds the path from omega(0) = e^{2u} sigma^2 g_* to the round metric at t = sigma/2.
inline MetricPath build_path(const S2Field& u, double sigma, const PathOptions& opt = {}) {
  if (!(sigma > 0.0)) throw InvalidInput("build_path: sigma must be positive");
  const int steps = opt.steps > 0 ? opt.steps : default_path_steps(sigma);
  if (steps < 16) throw InvalidInput("build_path: need at least 16 steps");

  MetricPath path;
  path.sigma_ = sigma;
  path.u_ = u;
  path.track_flow_ = opt.track_flow;
  path.poisson_ = opt.poisson;
  if (u.sup_norm() > 1.0) {
    std::ostringstream os;
    os << "sup|u| = " << u.sup_norm() << " > 1: e^{2u} may be under-resolved";
    path.warnings_.push_back(os.str());
  }

  const auto& g = u.grid();
  const auto gp = u.grid_ptr();
  const double dt = 0.5 * sigma / steps;
  const int stride = opt.snapshot_stride > 0 ? opt.snapshot_stride : std::max(1, steps / 20);
  const GridInterpolator interp(gp);
  const double area0 = S2ConformalMetric(sigma, u).area();

  struct StageOut {
    double a_prime;
    S2Field psi;
    std::array<std::vector<double>, 3> X;  // ambient components of grad psi on the grid
  };
  int current_step = 0;
  auto stage = [&](double t, double a) {
    const auto tilde = path.tilde_metric(t, a);
    StageOut s;
    s.a_prime = path.drift_rate_for(tilde);
    try {
      s.psi = path.potential_for(tilde, s.a_prime);
    } catch (const std::exception& e) {
      throw PathFailure(current_step, e.what());
    }
    if (opt.track_flow) {
      const auto gh = gradient_and_hessian(s.psi, tilde);
      for (int c = 0; c < 3; ++c) {
        s.X[c].resize(g.size());
        for (std::size_t i = 0; i < g.size(); ++i) s.X[c][i] = gh.gradient[i][c];
      }
    }
    return s;
  };
  auto velocity = [&](const StageOut& s, const std::vector<Vec3>& pos) {
    std::vector<Vec3> v(pos.size());
    for (std::size_t i = 0; i < pos.size(); ++i) {
      const auto st = interp.stencil(pos[i]);
      const Vec3 w = {GridInterpolator::apply(st, s.X[0]), GridInterpolator::apply(st, s.X[1]),
                      GridInterpolator::apply(st, s.X[2])};
      const Vec3 x = normalized(pos[i]);
      v[i] = w - dot(w, x) * x;
    }
    return v;
  };
  auto axpy = [](const std::vector<Vec3>& p, const std::vector<Vec3>& v, double h) {
    std::vector<Vec3> out(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) out[i] = p[i] + h * v[i];
    return out;
  };

  std::vector<Vec3> pos;
  if (opt.track_flow) {
    pos.resize(g.size());
    for (int j = 0; j < g.n_theta(); ++j)
      for (int k = 0; k < g.n_phi(); ++k) pos[g.index(j, k)] = g.point(j, k);
  }

  auto record = [&](int k, double t, double a, const StageOut& s) {
    PathStepRecord r;
    r.t = t;
    r.a = a;
    r.a_prime = s.a_prime;
    const auto tilde = path.tilde_metric(t, a);
    r.total_area_deviation = tilde.area() / area0 - 1.0;
    r.psi_sup = s.psi.sup_norm();
    const auto od = path.omega_dot_for(tilde, s.psi, s.a_prime);
    const auto gh = gradient_and_hessian(s.psi, tilde);
    for (std::size_t i = 0; i < g.size(); ++i) {
      r.hessian_sup = std::max(r.hessian_sup, gh.hessian_norm[i]);
      r.trace_omega_dot = std::max(r.trace_omega_dot, std::abs(od.trace[i]));
      r.omega_dot_sq_sup = std::max(r.omega_dot_sq_sup, od.norm_sq[i]);
    }
    if (opt.track_flow) {
      const auto J = path.flow_jacobian(pos);
      const auto& w = tilde.logfactor().values();
      double dev = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double now = std::exp(2.0 * interp(w, pos[i])) * J[i];
        dev = std::max(dev, std::abs(now / std::exp(2.0 * u[i]) - 1.0));
      }
      r.area_form_deviation = dev;
    } else {
      r.area_form_deviation = std::numeric_limits<double>::quiet_NaN();
    }
    path.records_.push_back(r);
    if (k % stride == 0 || k == steps) path.snapshots_.push_back({k, t, s.psi, pos});
  };

  double a = 0.0;
  StageOut s1 = stage(0.0, a);
  path.times_.push_back(0.0);
  path.a_.push_back(a);
  path.a_prime_.push_back(s1.a_prime);
  record(0, 0.0, a, s1);

  for (int k = 0; k < steps; ++k) {
    current_step = k + 1;
    const double t = k * dt;
    // s1 holds the stage at (t, a, pos).
    std::vector<Vec3> v1, v2, v3, v4;
    if (opt.track_flow) v1 = velocity(s1, pos);
    const auto s2 = stage(t + 0.5 * dt, a + 0.5 * dt * s1.a_prime);
    if (opt.track_flow) v2 = velocity(s2, axpy(pos, v1, 0.5 * dt));
    const auto s3 = stage(t + 0.5 * dt, a + 0.5 * dt * s2.a_prime);
    if (opt.track_flow) v3 = velocity(s3, axpy(pos, v2, 0.5 * dt));
    const auto s4 = stage(t + dt, a + dt * s3.a_prime);
    if (opt.track_flow) {
      v4 = velocity(s4, axpy(pos, v3, dt));
      for (std::size_t i = 0; i < pos.size(); ++i)
        pos[i] = normalized(pos[i] + (dt / 6.0) * (v1[i] + 2.0 * v2[i] + 2.0 * v3[i] + v4[i]));
    }
    a += dt / 6.0 * (s1.a_prime + 2.0 * s2.a_prime + 2.0 * s3.a_prime + s4.a_prime);
    const double tn = (k + 1 == steps) ? 0.5 * sigma : (k + 1) * dt;
    s1 = stage(tn, a);
    path.times_.push_back(tn);
    path.a_.push_back(a);
    path.a_prime_.push_back(s1.a_prime);
    record(k + 1, tn, a, s1);
  }
  return path;
}

/// Fitted sigma-exponents of the path's Poisson data.
struct PathScalingReport {
  std::vector<double> sigmas;
  std::vector<double> max_a_prime, max_hessian, max_psi;
  bool degenerate = false;
  double a_prime_exponent = std::numeric_limits<double>::quiet_NaN();
  double hessian_exponent = std::numeric_limits<double>::quiet_NaN();
  double psi_exponent = std::numeric_limits<double>::quiet_NaN();
};

namespace detail {
inline double fit_loglog(const std::vector<double>& x, const std::vector<double>& y) {
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < x.size(); ++i) {
    lx.push_back(std::log(x[i]));
    ly.push_back(std::log(y[i]));
  }
  return fit_line(lx, ly).slope;
}
inline bool all_tiny(const std::vector<double>& v) {
  for (double x : v)
    if (x > 1e-300) return false;
  return true;
}
}  // namespace detail

/// Sweeps sigma, building the conformal part of the path for u_family(sigma).
/// max_t of |a'| and of sup|Hess psi|_{omega~} are fitted against sigma in log-log.
inline PathScalingReport path_scaling_study(const std::function<S2Field(double)>& u_family,
                                            const std::vector<double>& sigmas, PathOptions opt = {}) {
  if (sigmas.size() < 3) throw InvalidInput("path_scaling_study: need at least 3 sigma values");
  opt.track_flow = false;
  PathScalingReport rep;
  rep.sigmas = sigmas;
  for (double s : sigmas) {
    const auto path = build_path(u_family(s), s, opt);
    double ap = 0, hs = 0, ps = 0;
    for (const auto& r : path.records()) {
      ap = std::max(ap, std::abs(r.a_prime));
      hs = std::max(hs, r.hessian_sup);
      ps = std::max(ps, r.psi_sup);
    }
    rep.max_a_prime.push_back(ap);
    rep.max_hessian.push_back(hs);
    rep.max_psi.push_back(ps);
  }
  if (detail::all_tiny(rep.max_a_prime) && detail::all_tiny(rep.max_hessian)) {
    rep.degenerate = true;
    return rep;
  }
  if (!detail::all_tiny(rep.max_a_prime)) rep.a_prime_exponent = detail::fit_loglog(sigmas, rep.max_a_prime);
  if (!detail::all_tiny(rep.max_hessian)) rep.hessian_exponent = detail::fit_loglog(sigmas, rep.max_hessian);
  if (!detail::all_tiny(rep.max_psi)) rep.psi_exponent = detail::fit_loglog(sigmas, rep.max_psi);
  return rep;
}

}  // namespace afiso
