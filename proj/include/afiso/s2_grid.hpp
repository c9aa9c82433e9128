#pragma once

// Gauss-Legendre x uniform-longitude grid on the unit sphere together with the
// real spherical-harmonic transform used by every S^2 operator.

#include <algorithm>
#include <memory>
#include <vector>

#include "afiso/common.hpp"

namespace afiso {

/// Real orthonormal spherical harmonics Y_lm, coefficients stored at l*l + l + m
/// (m < 0 holds the sin(|m| phi) part).
inline std::size_t sh_index(int l, int m) { return static_cast<std::size_t>(l * l + l + m); }

/// Samples of a field and of its angular derivatives on the grid.
struct GridDerivatives {
  std::vector<double> value, d_theta, d_phi, d_phiphi, d_thetaphi;
};

class S2Grid {
 public:
  explicit S2Grid(int n_theta) : n_theta_(n_theta), n_phi_(2 * n_theta), degree_(n_theta - 1) {
    if (n_theta < 4) throw InvalidInput("S2Grid: n_theta must be >= 4");
    GaussLegendre gl(n_theta);
    // Node 0 sits near the north pole.
    theta_.resize(n_theta_);
    cos_theta_.resize(n_theta_);
    sin_theta_.resize(n_theta_);
    weight_.resize(n_theta_);
    for (int j = 0; j < n_theta_; ++j) {
      const double x = gl.nodes[n_theta_ - 1 - j];
      cos_theta_[j] = x;
      sin_theta_[j] = std::sqrt(1.0 - x * x);
      theta_[j] = std::acos(x);
      weight_[j] = gl.weights[n_theta_ - 1 - j];
    }
    phi_.resize(n_phi_);
    for (int k = 0; k < n_phi_; ++k) phi_[k] = 2.0 * kPi * k / n_phi_;
    cos_mphi_.assign(static_cast<std::size_t>(degree_ + 1) * n_phi_, 0.0);
    sin_mphi_.assign(cos_mphi_.size(), 0.0);
    for (int m = 0; m <= degree_; ++m)
      for (int k = 0; k < n_phi_; ++k) {
        cos_mphi_[m * n_phi_ + k] = std::cos(m * phi_[k]);
        sin_mphi_[m * n_phi_ + k] = std::sin(m * phi_[k]);
      }
    const std::size_t nlm = static_cast<std::size_t>(degree_ + 1) * (degree_ + 2) / 2;
    plm_.assign(nlm * n_theta_, 0.0);
    dplm_.assign(nlm * n_theta_, 0.0);
    std::vector<double> p, dp;
    for (int j = 0; j < n_theta_; ++j) {
      legendre_at(cos_theta_[j], sin_theta_[j], degree_, p, dp);
      for (std::size_t i = 0; i < nlm; ++i) {
        plm_[i * n_theta_ + j] = p[i];
        dplm_[i * n_theta_ + j] = dp[i];
      }
    }
  }

  int n_theta() const { return n_theta_; }
  int n_phi() const { return n_phi_; }
  int degree() const { return degree_; }
  std::size_t size() const { return static_cast<std::size_t>(n_theta_) * n_phi_; }
  std::size_t n_coeffs() const { return static_cast<std::size_t>(degree_ + 1) * (degree_ + 1); }
  std::size_t index(int j, int k) const { return static_cast<std::size_t>(j) * n_phi_ + k; }

  double theta(int j) const { return theta_[j]; }
  double cos_theta(int j) const { return cos_theta_[j]; }
  double sin_theta(int j) const { return sin_theta_[j]; }
  double phi(int k) const { return phi_[k]; }
  /// Round-sphere quadrature weight of node (j, k); weights sum to 4 pi.
  double area_weight(int j) const { return weight_[j] * 2.0 * kPi / n_phi_; }

  Vec3 point(int j, int k) const {
    return {sin_theta_[j] * std::cos(phi_[k]), sin_theta_[j] * std::sin(phi_[k]), cos_theta_[j]};
  }
  Vec3 e_theta(int j, int k) const {
    return {cos_theta_[j] * std::cos(phi_[k]), cos_theta_[j] * std::sin(phi_[k]), -sin_theta_[j]};
  }
  Vec3 e_phi(int, int k) const { return {-std::sin(phi_[k]), std::cos(phi_[k]), 0.0}; }

  /// Tabulates a function of (theta, phi) on the grid.
  template <class F>
  std::vector<double> sample(F&& fn) const {
    std::vector<double> v(size());
    for (int j = 0; j < n_theta_; ++j)
      for (int k = 0; k < n_phi_; ++k) v[index(j, k)] = fn(theta_[j], phi_[k]);
    return v;
  }

  /// Grid values -> harmonic coefficients (exact for degree <= n_theta - 1).
  std::vector<double> analyze(const std::vector<double>& values) const {
    check_size(values.size());
    const int L = degree_;
    std::vector<double> fc(static_cast<std::size_t>(L + 1) * n_theta_), fs(fc.size());
    for (int j = 0; j < n_theta_; ++j) {
      const double* row = &values[index(j, 0)];
      for (int m = 0; m <= L; ++m) {
        const double* c = &cos_mphi_[m * n_phi_];
        const double* s = &sin_mphi_[m * n_phi_];
        double ac = 0, as = 0;
        for (int k = 0; k < n_phi_; ++k) {
          ac += row[k] * c[k];
          as += row[k] * s[k];
        }
        const double w = area_weight(j);
        fc[m * n_theta_ + j] = ac * w;
        fs[m * n_theta_ + j] = as * w;
      }
    }
    std::vector<double> coeffs(n_coeffs(), 0.0);
    for (int m = 0; m <= L; ++m) {
      const double scale = (m == 0) ? 1.0 : std::sqrt(2.0);
      for (int l = m; l <= L; ++l) {
        const double* p = &plm_[tri(l, m) * n_theta_];
        double ac = 0, as = 0;
        for (int j = 0; j < n_theta_; ++j) {
          ac += p[j] * fc[m * n_theta_ + j];
          as += p[j] * fs[m * n_theta_ + j];
        }
        coeffs[sh_index(l, m)] = scale * ac;
        if (m > 0) coeffs[sh_index(l, -m)] = scale * as;
      }
    }
    return coeffs;
  }

  /// Harmonic coefficients -> grid values.
  std::vector<double> synthesize(const std::vector<double>& coeffs) const {
    return synthesize_all(coeffs, false).value;
  }

  /// Harmonic coefficients -> values and first/mixed angular derivatives.
  GridDerivatives synthesize_all(const std::vector<double>& coeffs, bool with_derivatives = true) const {
    if (coeffs.size() != n_coeffs()) throw InvalidInput("S2Grid: coefficient count mismatch");
    const int L = degree_;
    const std::size_t n = static_cast<std::size_t>(L + 1) * n_theta_;
    std::vector<double> gc(n, 0.0), gs(n, 0.0), dgc, dgs;
    if (with_derivatives) {
      dgc.assign(n, 0.0);
      dgs.assign(n, 0.0);
    }
    for (int m = 0; m <= L; ++m) {
      const double scale = (m == 0) ? 1.0 : std::sqrt(2.0);
      for (int l = m; l <= L; ++l) {
        const double cc = scale * coeffs[sh_index(l, m)];
        const double cs = (m > 0) ? scale * coeffs[sh_index(l, -m)] : 0.0;
        if (cc == 0.0 && cs == 0.0) continue;
        const double* p = &plm_[tri(l, m) * n_theta_];
        const double* dp = &dplm_[tri(l, m) * n_theta_];
        for (int j = 0; j < n_theta_; ++j) {
          gc[m * n_theta_ + j] += cc * p[j];
          gs[m * n_theta_ + j] += cs * p[j];
          if (with_derivatives) {
            dgc[m * n_theta_ + j] += cc * dp[j];
            dgs[m * n_theta_ + j] += cs * dp[j];
          }
        }
      }
    }
    GridDerivatives out;
    out.value.assign(size(), 0.0);
    if (with_derivatives) {
      out.d_theta.assign(size(), 0.0);
      out.d_phi.assign(size(), 0.0);
      out.d_phiphi.assign(size(), 0.0);
      out.d_thetaphi.assign(size(), 0.0);
    }
    for (int j = 0; j < n_theta_; ++j)
      for (int m = 0; m <= L; ++m) {
        const double a = gc[m * n_theta_ + j], b = gs[m * n_theta_ + j];
        const double* c = &cos_mphi_[m * n_phi_];
        const double* s = &sin_mphi_[m * n_phi_];
        double* v = &out.value[index(j, 0)];
        for (int k = 0; k < n_phi_; ++k) v[k] += a * c[k] + b * s[k];
        if (!with_derivatives) continue;
        const double da = dgc[m * n_theta_ + j], db = dgs[m * n_theta_ + j];
        const double mm = m;
        double* vt = &out.d_theta[index(j, 0)];
        double* vp = &out.d_phi[index(j, 0)];
        double* vpp = &out.d_phiphi[index(j, 0)];
        double* vtp = &out.d_thetaphi[index(j, 0)];
        for (int k = 0; k < n_phi_; ++k) {
          vt[k] += da * c[k] + db * s[k];
          vp[k] += mm * (-a * s[k] + b * c[k]);
          vpp[k] += -mm * mm * (a * c[k] + b * s[k]);
          vtp[k] += mm * (-da * s[k] + db * c[k]);
        }
      }
    return out;
  }

  /// Evaluates a harmonic expansion at an arbitrary unit vector.
  double evaluate(const std::vector<double>& coeffs, const Vec3& x) const {
    const double ct = std::clamp(x[2], -1.0, 1.0);
    const double st = std::sqrt(std::max(0.0, 1.0 - ct * ct));
    const double ph = std::atan2(x[1], x[0]);
    std::vector<double> p, dp;
    legendre_at(ct, st, degree_, p, dp, false);
    double acc = 0.0;
    for (int m = 0; m <= degree_; ++m) {
      const double scale = (m == 0) ? 1.0 : std::sqrt(2.0);
      const double c = std::cos(m * ph), s = std::sin(m * ph);
      for (int l = m; l <= degree_; ++l) {
        double y = coeffs[sh_index(l, m)] * c;
        if (m > 0) y += coeffs[sh_index(l, -m)] * s;
        acc += scale * p[tri(l, m)] * y;
      }
    }
    return acc;
  }

  /// Value and first (theta, phi) derivatives of a band-limited field at an
  /// arbitrary point off the poles.
  std::array<double, 3> evaluate_with_gradient(const std::vector<double>& coeffs, double theta, double ph) const {
    const double ct = std::cos(theta), st = std::sin(theta);
    std::vector<double> p, dp;
    legendre_at(ct, st, degree_, p, dp, true);
    std::array<double, 3> acc{0.0, 0.0, 0.0};
    for (int m = 0; m <= degree_; ++m) {
      const double scale = (m == 0) ? 1.0 : std::sqrt(2.0);
      const double c = std::cos(m * ph), s = std::sin(m * ph);
      for (int l = m; l <= degree_; ++l) {
        const double a = coeffs[sh_index(l, m)], b = (m > 0) ? coeffs[sh_index(l, -m)] : 0.0;
        const auto q = tri(l, m);
        acc[0] += scale * p[q] * (a * c + b * s);
        acc[1] += scale * dp[q] * (a * c + b * s);
        acc[2] += scale * p[q] * m * (b * c - a * s);
      }
    }
    return acc;
  }

  /// Packed index of (l, m >= 0) in the associated-Legendre tables.
  static std::size_t tri(int l, int m) {
    return static_cast<std::size_t>(l) * (l + 1) / 2 + m;
  }

  /// Normalized associated Legendre functions and their theta-derivatives.
  static void legendre_at(double x, double s, int L, std::vector<double>& p, std::vector<double>& dp,
                          bool with_derivative = true) {
    const std::size_t nlm = static_cast<std::size_t>(L + 1) * (L + 2) / 2;
    p.assign(nlm, 0.0);
    double pmm = 1.0 / std::sqrt(4.0 * kPi);
    for (int m = 0; m <= L; ++m) {
      if (m > 0) pmm *= std::sqrt((2.0 * m + 1.0) / (2.0 * m)) * s;
      p[tri(m, m)] = pmm;
      if (m + 1 <= L) p[tri(m + 1, m)] = std::sqrt(2.0 * m + 3.0) * x * pmm;
      for (int l = m + 2; l <= L; ++l) {
        const double a = std::sqrt((4.0 * l * l - 1.0) / (static_cast<double>(l) * l - m * m));
        const double b =
            std::sqrt(((l - 1.0) * (l - 1.0) - m * m) / (4.0 * (l - 1.0) * (l - 1.0) - 1.0));
        p[tri(l, m)] = a * (x * p[tri(l - 1, m)] - b * p[tri(l - 2, m)]);
      }
    }
    if (!with_derivative) return;
    dp.assign(nlm, 0.0);
    // sin(theta) dP_l^m/dtheta = l x P_l^m - sqrt((2l+1)(l^2-m^2)/(2l-1)) P_{l-1}^m
    for (int m = 0; m <= L; ++m)
      for (int l = m; l <= L; ++l) {
        double v = l * x * p[tri(l, m)];
        if (l > m)
          v -= std::sqrt((2.0 * l + 1.0) * (static_cast<double>(l) * l - m * m) / (2.0 * l - 1.0)) *
               p[tri(l - 1, m)];
        dp[tri(l, m)] = v / s;
      }
  }

 private:
  void check_size(std::size_t n) const {
    if (n != size()) throw InvalidInput("S2Grid: sample count does not match grid resolution");
  }

  int n_theta_, n_phi_, degree_;
  std::vector<double> theta_, cos_theta_, sin_theta_, weight_, phi_;
  std::vector<double> cos_mphi_, sin_mphi_;
  std::vector<double> plm_, dplm_;
};

using S2GridPtr = std::shared_ptr<const S2Grid>;

inline S2GridPtr make_grid(int n_theta) { return std::make_shared<const S2Grid>(n_theta); }

}  // namespace afiso
