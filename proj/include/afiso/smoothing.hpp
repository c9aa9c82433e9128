#pragma once

// C^2 smoothing of the glued radial metric ds^2 + rho(s)^2 g_* across its two
// corners. The slope jump is mollified at scale eps = delta^2 and the remaining
// (second-order) mismatch is blended at scale delta. Inside a band the profile is
// evaluated in offset coordinates x = s - s_corner from third-order jets of the
// two sides, so nothing cancels catastrophically when delta is tiny.

#include <memory>
#include <string>

#include "afiso/collar.hpp"

namespace afiso {

/// phi: 1 on [-1/3, 1/3], smooth monotone transition to 0 on 1/3 <= |z| <= 2/3.
class Mollifier {
 public:
  static double value(double z) {
    const double a = std::abs(z);
    if (a <= 1.0 / 3.0) return 1.0;
    if (a >= 2.0 / 3.0) return 0.0;
    const double A = h(2.0 / 3.0 - a), B = h(a - 1.0 / 3.0);
    return A / (A + B);
  }
  static double derivative(double z) {
    const double a = std::abs(z);
    if (a <= 1.0 / 3.0 || a >= 2.0 / 3.0) return 0.0;
    const double y1 = 2.0 / 3.0 - a, y2 = a - 1.0 / 3.0;
    const double A = h(y1), B = h(y2), dA = -A / (y1 * y1), dB = B / (y2 * y2);
    const double d = (dA * B - A * dB) / ((A + B) * (A + B));
    return z < 0 ? -d : d;
  }
  /// Theta(z) = int_{-1}^{z} phi.
  static double integral(double z) {
    if (z <= -2.0 / 3.0) return 0.0;
    if (z >= 2.0 / 3.0) return 1.0;
    if (z > 0.0) return 1.0 - integral(-z);
    // z in (-2/3, 0]
    if (z <= -1.0 / 3.0) return step_area(-2.0 / 3.0, z);
    return step_area(-2.0 / 3.0, -1.0 / 3.0) + (z + 1.0 / 3.0);
  }
  /// Lambda(z) = int_{-1}^{z} (z - y) phi(y) dy; equals z for z >= 2/3.
  static double second_integral(double z) {
    if (z <= -2.0 / 3.0) return 0.0;
    if (z >= 2.0 / 3.0) return z;
    return z * integral(z) - first_moment(z);
  }

 private:
  static double h(double y) { return y > 0.0 ? std::exp(-1.0 / y) : 0.0; }
  static const GaussLegendre& rule() {
    static const GaussLegendre gl(40);
    return gl;
  }
  // Integral of phi over [a, b] inside one transition interval, by composite GL.
  static double step_area(double a, double b) {
    double acc = 0.0;
    const int n = 4;
    for (int i = 0; i < n; ++i)
      acc += rule().integrate(value, a + (b - a) * i / n, a + (b - a) * (i + 1) / n);
    return acc;
  }
  // M(z) = int_{-1}^{z} y phi(y) dy; M is even and M(+-2/3) = 0.
  static double first_moment(double z) {
    if (z > 0.0) return first_moment(-z);
    if (z <= -2.0 / 3.0) return 0.0;
    auto yphi = [](double y) { return y * value(y); };
    auto part = [&](double a, double b) {
      double acc = 0.0;
      const int n = 4;
      for (int i = 0; i < n; ++i)
        acc += rule().integrate(yphi, a + (b - a) * i / n, a + (b - a) * (i + 1) / n);
      return acc;
    };
    if (z <= -1.0 / 3.0) return part(-2.0 / 3.0, z);
    return part(-2.0 / 3.0, -1.0 / 3.0) + 0.5 * (z * z - 1.0 / 9.0);
  }
};

enum class Corner { sigma, fill };

inline const char* corner_name(Corner c) { return c == Corner::sigma ? "sigma" : "fill"; }

/// Value and derivatives rho, rho', rho'', rho''' of one side at a corner.
using Jet = std::array<double, 4>;

class SmoothedMetric {
 public:
  SmoothedMetric(std::shared_ptr<const GluedMetric> glued, double delta) : glued_(std::move(glued)), delta_(delta) {
    const auto& g = *glued_;
    if (!(delta > 0.0)) throw InvalidInput("smooth_corner: delta must be positive");
    if (delta >= g.sigma() / 8.0 || delta >= 0.25 * g.s_fill())
      throw InvalidInput("smooth_corner: delta too large for the collar chart (need delta < sigma/8 and < R_sigma/8)");
    if (delta > std::pow(g.sigma(), -3.0))
      warnings_.push_back("delta = " + std::to_string(delta) + " exceeds sigma^-3; outside the small-delta regime");
    for (Corner c : {Corner::sigma, Corner::fill}) {
      auto& d = data_[idx(c)];
      const double s = position(c);
      const GluedPiece lo = c == Corner::sigma ? GluedPiece::collar : GluedPiece::ball;
      const GluedPiece hi = c == Corner::sigma ? GluedPiece::outer : GluedPiece::collar;
      const auto L = g.piece_profile(lo, s), R = g.piece_profile(hi, s);
      d.left = {L.rho, L.rho_s, L.rho_ss, L.rho_sss};
      d.right = {R.rho, R.rho_s, R.rho_ss, R.rho_sss};
      d.slope_jump = R.rho_s - L.rho_s;
    }
  }

  const GluedMetric& glued() const { return *glued_; }
  std::shared_ptr<const GluedMetric> glued_ptr() const { return glued_; }
  double delta() const { return delta_; }
  double epsilon() const { return delta_ * delta_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

  double position(Corner c) const { return c == Corner::sigma ? glued_->s_sigma() : glued_->s_fill(); }
  const Jet& left_jet(Corner c) const { return data_[idx(c)].left; }
  const Jet& right_jet(Corner c) const { return data_[idx(c)].right; }
  /// rho'_+ - rho'_- at the corner.
  double slope_jump(Corner c) const { return data_[idx(c)].slope_jump; }
  /// Mean-curvature jump H(inner side) - H(outer side).
  double mean_curvature_jump(Corner c) const { return -2.0 * slope_jump(c) / left_jet(c)[0]; }

  /// Profile at offset x = s - s_corner, |x| <= delta.
  RadialProfile band_profile(Corner c, double x) const {
    const auto& d = data_[idx(c)];
    const double eps = epsilon(), del = delta_;
    auto poly = [x](const Jet& j) {
      return std::array<double, 3>{j[0] + x * (j[1] + x * (j[2] / 2 + x * j[3] / 6)), j[1] + x * (j[2] + x * j[3] / 2),
                                   j[2] + x * j[3]};
    };
    const auto L = poly(d.left);
    // G = (rho_+ - rho_-) - D x, from the jets: starts at second order.
    const double d2 = d.right[2] - d.left[2], d3 = d.right[3] - d.left[3];
    const double G = x * x * (d2 / 2 + x * d3 / 6), G1 = x * (d2 + x * d3 / 2), G2 = d2 + x * d3;
    const double D = d.slope_jump;
    const double ze = x / eps, zd = x / del;
    const double Te = Mollifier::integral(ze), Td = Mollifier::integral(zd);
    const double pe = Mollifier::value(ze), pd = Mollifier::value(zd), dpd = Mollifier::derivative(zd);
    RadialProfile p;
    p.rho = L[0] + D * eps * Mollifier::second_integral(ze) + Td * G;
    p.rho_s = L[1] + D * Te + Td * G1 + pd * G / del;
    p.rho_ss = L[2] + D * pe / eps + Td * G2 + 2.0 * pd * G1 / del + dpd * G / (del * del);
    return p;
  }

  /// Returns the band and offset containing s, if any.
  std::optional<std::pair<Corner, double>> band_of(double s) const {
    for (Corner c : {Corner::fill, Corner::sigma}) {
      const double x = s - position(c);
      if (std::abs(x) < delta_) return std::make_pair(c, x);
    }
    return std::nullopt;
  }

  RadialProfile profile(double s) const {
    if (auto b = band_of(s)) return band_profile(b->first, b->second);
    return glued_->profile(s);
  }
  double scalar_curvature(double s) const {
    const auto p = profile(s);
    return warped_scalar_curvature(p.rho, p.rho_s, p.rho_ss);
  }
  /// Scalar curvature at signed offset x from the corner.
  double curvature_profile(Corner c, double x) const {
    if (!(std::abs(x) <= delta_)) throw InvalidInput("curvature_profile: |t| must be <= delta");
    const auto p = band_profile(c, x);
    return warped_scalar_curvature(p.rho, p.rho_s, p.rho_ss);
  }

  /// Sub-interval edges (offsets) on which the band profile is smooth.
  std::vector<double> band_edges() const {
    std::vector<double> e;
    for (double k : {-3.0, -2.0, -1.0, 1.0, 2.0, 3.0}) e.push_back(k / 3.0 * delta_);
    for (double k : {-2.0, -1.0, 1.0, 2.0}) e.push_back(k / 3.0 * epsilon());
    e.push_back(0.0);
    std::sort(e.begin(), e.end());
    return e;
  }

  /// int_{-eps}^{eps} R dx across the spike.
  double band_integral(Corner c) const {
    static const GaussLegendre gl(40);
    const double eps = epsilon();
    std::vector<double> edges;
    for (int k = -3; k <= 3; ++k) edges.push_back(k / 3.0 * eps);
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < edges.size(); ++i)
      for (int q = 0; q < 4; ++q) {
        const double a = edges[i] + (edges[i + 1] - edges[i]) * q / 4, b = edges[i] + (edges[i + 1] - edges[i]) * (q + 1) / 4;
        acc += gl.integrate([&](double x) { return curvature_profile(c, x); }, a, b);
      }
    return acc;
  }

  /// max |R| over the band, sampled.
  double max_band_curvature(Corner c, int n = 2001) const {
    double m = 0.0;
    for (int i = 0; i < n; ++i) {
      // Dense near the spike, covering the whole band.
      const double z = -1.0 + 2.0 * i / (n - 1);
      m = std::max({m, std::abs(curvature_profile(c, z * epsilon())), std::abs(curvature_profile(c, z * delta_))});
    }
    return m;
  }

  /// max over both bands of |rho_delta - rho| / rho.
  double metric_deviation(int n = 401) const {
    double m = 0.0;
    for (Corner c : {Corner::sigma, Corner::fill})
      for (int i = 0; i < n; ++i) {
        const double x = delta_ * (-1.0 + 2.0 * i / (n - 1));
        const auto& d = data_[idx(c)];
        const auto& side = x < 0 ? d.left : d.right;
        const double exact = side[0] + x * (side[1] + x * (side[2] / 2 + x * side[3] / 6));
        m = std::max(m, std::abs(band_profile(c, x).rho - exact) / exact);
      }
    return m;
  }

  /// Largest mismatch of rho, rho', rho'' between the band formula and the
  /// unsmoothed pieces at the band edges x = +-delta.
  double edge_mismatch(Corner c) const {
    const double s = position(c);
    const GluedPiece lo = c == Corner::sigma ? GluedPiece::collar : GluedPiece::ball;
    const GluedPiece hi = c == Corner::sigma ? GluedPiece::outer : GluedPiece::collar;
    double m = 0.0;
    for (double sign : {-1.0, 1.0}) {
      const auto b = band_profile(c, sign * delta_);
      const auto e = glued_->piece_profile(sign < 0 ? lo : hi, s + sign * delta_);
      m = std::max({m, std::abs(b.rho - e.rho) / e.rho, std::abs(b.rho_s - e.rho_s), std::abs(b.rho_ss - e.rho_ss)});
    }
    return m;
  }

 private:
  struct CornerData {
    Jet left{}, right{};
    double slope_jump = 0.0;
  };
  static int idx(Corner c) { return c == Corner::sigma ? 0 : 1; }

  std::shared_ptr<const GluedMetric> glued_;
  double delta_;
  std::array<CornerData, 2> data_{};
  std::vector<std::string> warnings_;
};

inline SmoothedMetric smooth_corner(std::shared_ptr<const GluedMetric> glued, double delta) {
  return SmoothedMetric(std::move(glued), delta);
}

/// f = R/8 except in the fill band, where f = min(R/8, C0).
class ScalarAux {
 public:
  explicit ScalarAux(std::shared_ptr<const SmoothedMetric> sm) : sm_(std::move(sm)) {
    const double d = sm_->delta();
    C0_ = std::max({1.0, std::abs(sm_->curvature_profile(Corner::fill, -d)) / 8.0,
                    std::abs(sm_->curvature_profile(Corner::fill, d)) / 8.0});
  }
  const SmoothedMetric& metric() const { return *sm_; }
  std::shared_ptr<const SmoothedMetric> metric_ptr() const { return sm_; }
  double C0() const { return C0_; }

  double operator()(double s) const {
    if (auto b = sm_->band_of(s)) return in_band(b->first, b->second);
    return sm_->scalar_curvature(s) / 8.0;
  }
  double in_band(Corner c, double x) const {
    const double r8 = sm_->curvature_profile(c, x) / 8.0;
    return c == Corner::fill ? std::min(r8, C0_) : r8;
  }

  /// Breakpoints in s where f or the profile changes smoothness.
  std::vector<double> breakpoints() const {
    const auto& g = sm_->glued();
    std::vector<double> e{0.0};
    for (Corner c : {Corner::fill, Corner::sigma})
      for (double x : sm_->band_edges()) e.push_back(sm_->position(c) + x);
    e.push_back(g.s_fill());
    e.push_back(g.s_sigma());
    std::sort(e.begin(), e.end());
    e.erase(std::unique(e.begin(), e.end()), e.end());
    return e;
  }

  /// int rho^2 f over [a, b] (times 4 pi gives the volume integral), accurate across bands.
  template <class G>
  double weighted_integral(double a, double b, G&& weight) const {
    static const GaussLegendre gl(12);
    double acc = 0.0;
    // Each band is integrated in offset coordinates to keep eps-scale structure.
    double lo = a;
    for (Corner c : {Corner::fill, Corner::sigma}) {
      const double s0 = sm_->position(c), d = sm_->delta();
      if (b <= s0 - d || a >= s0 + d) continue;
      const double ba = std::max(a, s0 - d), bb = std::min(b, s0 + d);
      if (ba > lo) acc += smooth_part(lo, ba, weight, gl);
      const auto edges = sm_->band_edges();
      for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
        const double xa = std::max(edges[i], ba - s0), xb = std::min(edges[i + 1], bb - s0);
        if (xb <= xa) continue;
        acc += gl.integrate(
            [&](double x) {
              const auto p = sm_->band_profile(c, x);
              return weight(s0 + x, p, in_band(c, x));
            },
            xa, xb);
      }
      lo = bb;
    }
    if (b > lo) acc += smooth_part(lo, b, weight, gl);
    return acc;
  }

  /// int |f|^{3/2} dV over s in [0, s_max].
  double l32_integral(double s_max) const {
    return weighted_integral(0.0, s_max, [](double, const RadialProfile& p, double f) {
      return 4.0 * kPi * p.rho * p.rho * std::pow(std::abs(f), 1.5);
    });
  }

 private:
  template <class G>
  double smooth_part(double a, double b, G& weight, const GaussLegendre& gl) const {
    const auto& g = sm_->glued();
    std::vector<double> e{a};
    for (double k : {g.s_fill(), g.s_sigma()})
      if (k > a && k < b) e.push_back(k);
    e.push_back(b);
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < e.size(); ++i) {
      const int n = std::max(1, static_cast<int>(std::ceil((e[i + 1] - e[i]) / (0.05 * g.sigma()))));
      for (int q = 0; q < n; ++q) {
        const double xa = e[i] + (e[i + 1] - e[i]) * q / n, xb = e[i] + (e[i + 1] - e[i]) * (q + 1) / n;
        acc += gl.integrate(
            [&](double s) {
              const auto p = sm_->profile(s);
              return weight(s, p, warped_scalar_curvature(p.rho, p.rho_s, p.rho_ss) / 8.0);
            },
            xa, xb);
      }
    }
    return acc;
  }

  std::shared_ptr<const SmoothedMetric> sm_;
  double C0_ = 1.0;
};

inline ScalarAux build_scalar_aux(std::shared_ptr<const SmoothedMetric> sm) { return ScalarAux(std::move(sm)); }

}  // namespace afiso
