#pragma once

// Scalar fields and conformal metrics e^{2u} sigma^2 g_* on the unit sphere, with
// quadrature, Laplace-Beltrami, Poisson solve, gradient/Hessian and pointwise
// interpolation.

#include <algorithm>
#include <sstream>
#include <utility>
#include <vector>

#include "afiso/s2_grid.hpp"

namespace afiso {

class S2Field {
 public:
  S2Field() = default;
  S2Field(S2GridPtr grid, std::vector<double> values) : grid_(std::move(grid)), values_(std::move(values)) {
    if (!grid_) throw InvalidInput("S2Field: null grid");
    if (values_.size() != grid_->size())
      throw InvalidInput("S2Field: value count does not match N_theta x N_phi");
    for (double v : values_)
      if (!std::isfinite(v)) throw InvalidInput("S2Field: non-finite value");
  }

  static S2Field constant(S2GridPtr grid, double c) {
    const auto n = grid->size();
    return S2Field(std::move(grid), std::vector<double>(n, c));
  }
  template <class F>
  static S2Field from_function(S2GridPtr grid, F&& fn) {
    auto v = grid->sample(std::forward<F>(fn));
    return S2Field(std::move(grid), std::move(v));
  }
  static S2Field from_coefficients(S2GridPtr grid, const std::vector<double>& coeffs) {
    auto v = grid->synthesize(coeffs);
    return S2Field(std::move(grid), std::move(v));
  }

  const S2Grid& grid() const { return *grid_; }
  const S2GridPtr& grid_ptr() const { return grid_; }
  const std::vector<double>& values() const { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }
  std::size_t size() const { return values_.size(); }
  int degree() const { return grid_->degree(); }
  std::vector<double> coefficients() const { return grid_->analyze(values_); }

  double sup_norm() const {
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::abs(v));
    return m;
  }
  double oscillation() const {
    const auto [lo, hi] = std::minmax_element(values_.begin(), values_.end());
    return *hi - *lo;
  }

 private:
  S2GridPtr grid_;
  std::vector<double> values_;
};

/// The metric e^{2u} sigma^2 g_* with g_* the unit round metric.
class S2ConformalMetric {
 public:
  S2ConformalMetric(double sigma, S2Field logfactor) : sigma_(sigma), logfactor_(std::move(logfactor)) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw InvalidInput("S2ConformalMetric: sigma must be > 0");
  }
  static S2ConformalMetric round(S2GridPtr grid, double sigma = 1.0) {
    return S2ConformalMetric(sigma, S2Field::constant(std::move(grid), 0.0));
  }

  double sigma() const { return sigma_; }
  const S2Field& logfactor() const { return logfactor_; }
  const S2Grid& grid() const { return logfactor_.grid(); }

  /// e^{2u} sigma^2 at node i: density of dA_metric relative to dA_*.
  double area_density(std::size_t i) const { return std::exp(2.0 * logfactor_[i]) * sigma_ * sigma_; }

  double area() const {
    const auto& g = grid();
    double acc = 0.0;
    for (int j = 0; j < g.n_theta(); ++j)
      for (int k = 0; k < g.n_phi(); ++k) acc += g.area_weight(j) * area_density(g.index(j, k));
    return acc;
  }

 private:
  double sigma_;
  S2Field logfactor_;
};

namespace detail {
inline void require_same_grid(const S2Field& f, const S2ConformalMetric& g) {
  if (f.grid().n_theta() != g.grid().n_theta())
    throw InvalidInput("S2 operator: field and metric resolutions differ");
}
inline std::vector<double> round_laplacian_coeffs(std::vector<double> c, int L) {
  for (int l = 0; l <= L; ++l)
    for (int m = -l; m <= l; ++m) c[sh_index(l, m)] *= -static_cast<double>(l) * (l + 1);
  return c;
}
}  // namespace detail

/// Integral of `field` against dA of `metric`.
inline double quadrature(const S2Field& field, const S2ConformalMetric& metric) {
  detail::require_same_grid(field, metric);
  const auto& g = field.grid();
  double acc = 0.0;
  for (int j = 0; j < g.n_theta(); ++j) {
    double row = 0.0;
    for (int k = 0; k < g.n_phi(); ++k) {
      const auto i = g.index(j, k);
      row += field[i] * metric.area_density(i);
    }
    acc += g.area_weight(j) * row;
  }
  return acc;
}

/// Laplacian of the unit round sphere, computed spectrally.
inline S2Field round_laplacian(const S2Field& field) {
  const auto& g = field.grid();
  auto c = detail::round_laplacian_coeffs(field.coefficients(), g.degree());
  return S2Field::from_coefficients(field.grid_ptr(), c);
}

/// Delta_g f = e^{-2u} sigma^{-2} Delta_* f for g = e^{2u} sigma^2 g_*.
inline S2Field laplace_beltrami(const S2Field& field, const S2ConformalMetric& metric) {
  detail::require_same_grid(field, metric);
  auto lap = round_laplacian(field).values();
  for (std::size_t i = 0; i < lap.size(); ++i) lap[i] /= metric.area_density(i);
  return S2Field(field.grid_ptr(), std::move(lap));
}

struct PoissonOptions {
  /// Relative solvability tolerance: |int rhs dA| <= rel * |rhs|_inf * Area.
  double solvability_rel = 1e-8;
  /// Allowed sup-norm residual of Delta psi - rhs.
  double residual_tol = 1e-6;
  /// Magnitude of the terms that cancel in rhs, if larger than |rhs|_inf.
  double reference_scale = 0.0;
};

/// Solves Delta_g psi = rhs with int psi dA_g = 0. The right-hand side is
/// multiplied by the conformal density, which turns the equation into a round
/// Poisson problem that is diagonal in spherical harmonics.
inline S2Field solve_poisson(const S2Field& rhs, const S2ConformalMetric& metric,
                             const PoissonOptions& opt = {}) {
  detail::require_same_grid(rhs, metric);
  const auto& g = rhs.grid();
  const double area = metric.area();
  const double imbalance = quadrature(rhs, metric);
  const double scale = std::max({rhs.sup_norm(), opt.reference_scale, 1e-300});
  if (std::abs(imbalance) > opt.solvability_rel * scale * area) {
    std::ostringstream os;
    os << "solve_poisson: right-hand side not mean-zero, integral = " << imbalance
       << " (tolerance " << opt.solvability_rel * scale * area << ")";
    throw InvalidInput(os.str());
  }
  std::vector<double> src(rhs.size());
  for (std::size_t i = 0; i < src.size(); ++i) src[i] = rhs[i] * metric.area_density(i);
  auto c = g.analyze(src);
  c[0] = 0.0;
  for (int l = 1; l <= g.degree(); ++l)
    for (int m = -l; m <= l; ++m) c[sh_index(l, m)] /= -static_cast<double>(l) * (l + 1);
  auto psi = g.synthesize(c);
  S2Field tmp(rhs.grid_ptr(), psi);
  const double shift = quadrature(tmp, metric) / area;
  for (double& v : psi) v -= shift;
  S2Field out(rhs.grid_ptr(), std::move(psi));

  if (rhs.sup_norm() > 0.0) {
    const auto lap = laplace_beltrami(out, metric);
    double res = 0.0;
    for (std::size_t i = 0; i < rhs.size(); ++i) res = std::max(res, std::abs(lap[i] - rhs[i]));
    if (res > opt.residual_tol * std::max(1.0, rhs.sup_norm())) {
      std::ostringstream os;
      os << "solve_poisson: residual " << res << " exceeds tolerance; rhs is under-resolved";
      throw SolveFailure(os.str());
    }
  }
  return out;
}

/// Symmetric 2-tensor in the g_*-orthonormal frame (e_theta, e_phi).
struct FrameTensor {
  double tt = 0.0, tp = 0.0, pp = 0.0;
};

struct GradHess {
  /// Metric gradient grad_g f as an ambient R^3 vector tangent to the sphere.
  std::vector<Vec3> gradient;
  /// |grad_g f|_g.
  std::vector<double> gradient_norm;
  /// Covariant Hessian of g, frame components.
  std::vector<FrameTensor> hessian;
  /// tr_g Hess_g f and |Hess_g f|_g.
  std::vector<double> hessian_trace, hessian_norm;
  /// Density e^{2u} sigma^2 needed to raise frame indices.
  std::vector<double> density;
};

/// Gradient and covariant Hessian of `field` for the conformal metric.
inline GradHess gradient_and_hessian(const S2Field& field, const S2ConformalMetric& metric) {
  detail::require_same_grid(field, metric);
  const auto& g = field.grid();
  const auto cf = field.coefficients();
  const auto d = g.synthesize_all(cf);
  const auto lap = g.synthesize(detail::round_laplacian_coeffs(cf, g.degree()));
  const auto dw = g.synthesize_all(metric.logfactor().coefficients());

  GradHess out;
  const auto n = g.size();
  out.gradient.resize(n);
  out.gradient_norm.resize(n);
  out.hessian.resize(n);
  out.hessian_trace.resize(n);
  out.hessian_norm.resize(n);
  out.density.resize(n);
  for (int j = 0; j < g.n_theta(); ++j) {
    const double s = g.sin_theta(j), cot = g.cos_theta(j) / s;
    for (int k = 0; k < g.n_phi(); ++k) {
      const auto i = g.index(j, k);
      const double rho = metric.area_density(i);
      const double ft = d.d_theta[i], fp = d.d_phi[i] / s;
      const double wt = dw.d_theta[i], wp = dw.d_phi[i] / s;
      out.density[i] = rho;
      out.gradient[i] = (1.0 / rho) * (ft * g.e_theta(j, k) + fp * g.e_phi(j, k));
      out.gradient_norm[i] = std::sqrt((ft * ft + fp * fp) / rho);

      FrameTensor h;
      h.pp = d.d_phiphi[i] / (s * s) + cot * d.d_theta[i];
      h.tt = lap[i] - h.pp;
      h.tp = (d.d_thetaphi[i] - cot * d.d_phi[i]) / s;
      // Conformal change of the Levi-Civita connection.
      const double cross = wt * ft + wp * fp;
      h.tt += -2.0 * wt * ft + cross;
      h.pp += -2.0 * wp * fp + cross;
      h.tp += -(wt * fp + wp * ft);
      out.hessian[i] = h;
      out.hessian_trace[i] = (h.tt + h.pp) / rho;
      out.hessian_norm[i] = std::sqrt(h.tt * h.tt + 2.0 * h.tp * h.tp + h.pp * h.pp) / rho;
    }
  }
  return out;
}

/// Fourth-order Lagrange interpolation of grid samples at arbitrary points,
/// continued across the poles by theta -> -theta, phi -> phi + pi.
class GridInterpolator {
 public:
  struct Stencil {
    std::array<std::size_t, 16> node{};
    std::array<double, 16> weight{};
  };

  explicit GridInterpolator(S2GridPtr grid) : grid_(std::move(grid)) {
    const int n = grid_->n_theta();
    ext_theta_.resize(n + 4);
    for (int e = -2; e < n + 2; ++e) ext_theta_[e + 2] = ext_theta(e);
  }

  const S2Grid& grid() const { return *grid_; }

  Stencil stencil(const Vec3& x) const {
    const auto& g = *grid_;
    const int n = g.n_theta(), np = g.n_phi();
    const double th = std::acos(std::clamp(x[2] / norm(x), -1.0, 1.0));
    double ph = std::atan2(x[1], x[0]);
    if (ph < 0) ph += 2.0 * kPi;
    // Interval e0 with ext(e0) <= th < ext(e0+1), e0 in [-1, n-1].
    auto it = std::upper_bound(ext_theta_.begin(), ext_theta_.end(), th);
    int e0 = static_cast<int>(it - ext_theta_.begin()) - 1 - 2;
    e0 = std::clamp(e0, -1, n - 1);
    std::array<double, 4> wt{};
    for (int a = 0; a < 4; ++a) {
      const double ta = ext_theta(e0 - 1 + a);
      double w = 1.0;
      for (int b = 0; b < 4; ++b)
        if (b != a) w *= (th - ext_theta(e0 - 1 + b)) / (ta - ext_theta(e0 - 1 + b));
      wt[a] = w;
    }
    const double h = 2.0 * kPi / np;
    const int k0 = static_cast<int>(std::floor(ph / h));
    const double t = ph / h - k0;
    const std::array<double, 4> wp = {-t * (t - 1) * (t - 2) / 6.0, (t + 1) * (t - 1) * (t - 2) / 2.0,
                                      -(t + 1) * t * (t - 2) / 2.0, (t + 1) * t * (t - 1) / 6.0};
    Stencil s;
    for (int a = 0; a < 4; ++a) {
      const int e = e0 - 1 + a;
      int j = e;
      int shift = 0;
      if (e < 0) {
        j = -e - 1;
        shift = np / 2;
      } else if (e >= n) {
        j = 2 * n - 1 - e;
        shift = np / 2;
      }
      for (int b = 0; b < 4; ++b) {
        const int k = ((k0 - 1 + b + shift) % np + np) % np;
        s.node[a * 4 + b] = g.index(j, k);
        s.weight[a * 4 + b] = wt[a] * wp[b];
      }
    }
    return s;
  }

  static double apply(const Stencil& s, const std::vector<double>& v) {
    double acc = 0.0;
    for (int i = 0; i < 16; ++i) acc += s.weight[i] * v[s.node[i]];
    return acc;
  }

  double operator()(const std::vector<double>& v, const Vec3& x) const { return apply(stencil(x), v); }

 private:
  double ext_theta(int e) const {
    const int n = grid_->n_theta();
    if (e < 0) return -grid_->theta(-e - 1);
    if (e >= n) return 2.0 * kPi - grid_->theta(2 * n - 1 - e);
    return grid_->theta(e);
  }

  S2GridPtr grid_;
  std::vector<double> ext_theta_;
};

}  // namespace afiso
