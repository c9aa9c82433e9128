#include <catch_amalgamated.hpp>

#include "afiso/smoothing.hpp"

using namespace afiso;
using Catch::Approx;

namespace {

std::shared_ptr<const GluedMetric> schwarzschild_glued(double sigma, double m = 1.0) {
  return std::make_shared<const GluedMetric>(glue(RadialAFMetric::schwarzschild(m), sigma));
}

// 1-D oracle: curvature of the band profile from finite differences of rho alone.
double fd_band_integral(const SmoothedMetric& sm, Corner c, int n) {
  const double eps = sm.epsilon(), h = 2 * eps / n, k = eps / 200;
  auto rho = [&](double x) { return sm.band_profile(c, x).rho; };
  double acc = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double x = -eps + i * h;
    const double r0 = rho(x), rp = rho(x + k), rm = rho(x - k);
    const double d1 = (rp - rm) / (2 * k), d2 = (rp - 2 * r0 + rm) / (k * k);
    const double R = warped_scalar_curvature(r0, d1, d2);
    acc += (i == 0 || i == n ? 0.5 : 1.0) * R * h;
  }
  return acc;
}

}  // namespace

TEST_CASE("mollifier", "[smooth]") {
  for (double z = -1.0; z <= 1.0; z += 0.01) {
    CHECK(Mollifier::value(z) >= 0.0);
    CHECK(Mollifier::value(z) <= 1.0);
  }
  CHECK(Mollifier::value(0.0) == 1.0);
  CHECK(Mollifier::value(1.0 / 3.0) == 1.0);
  CHECK(Mollifier::value(-0.3) == 1.0);
  CHECK(Mollifier::value(0.7) == 0.0);
  // Dense midpoint sum as an independent check of the normalization.
  double sum = 0.0;
  const int n = 2000000;
  for (int i = 0; i < n; ++i) sum += Mollifier::value(-1.0 + (i + 0.5) * 2.0 / n) * 2.0 / n;
  CHECK(sum == Approx(1.0).epsilon(1e-10));
  CHECK(Mollifier::integral(1.0) == Approx(1.0).epsilon(1e-14));
  CHECK(Mollifier::integral(0.0) == Approx(0.5).epsilon(1e-14));
  CHECK(Mollifier::second_integral(0.9) == 0.9);
  CHECK(Mollifier::second_integral(2.0 / 3.0 - 1e-12) == Approx(2.0 / 3.0).epsilon(1e-10));
  for (double z : {-0.6, -0.45, 0.4, 0.55}) {
    const double h = 1e-6;
    CHECK(Mollifier::derivative(z) ==
          Approx((Mollifier::value(z + h) - Mollifier::value(z - h)) / (2 * h)).epsilon(1e-6));
    CHECK(Mollifier::integral(z + h) - Mollifier::integral(z - h) == Approx(2 * h * Mollifier::value(z)).epsilon(1e-6));
  }
}

TEST_CASE("smooth_corner construction", "[smooth]") {
  const auto g = schwarzschild_glued(64.0);
  CHECK_THROWS_AS(smooth_corner(g, 10.0), InvalidInput);
  CHECK_THROWS_AS(smooth_corner(g, 0.0), InvalidInput);
  CHECK_FALSE(smooth_corner(g, 0.01).warnings().empty());
  CHECK(smooth_corner(g, std::pow(64.0, -4)).warnings().empty());

  const auto sm = smooth_corner(g, 1e-3);
  SECTION("C2 at band edges and identical outside") {
    for (Corner c : {Corner::sigma, Corner::fill}) CHECK(sm.edge_mismatch(c) <= 1e-6);
    for (double s : {1.0, g->s_fill() + 1.0, g->s_sigma() + 2.0, g->s_sigma() + 500.0}) {
      const auto a = sm.profile(s), b = g->profile(s);
      CHECK(a.rho == b.rho);
      CHECK(a.rho_ss == b.rho_ss);
    }
  }
  SECTION("closeness is O(delta)") {
    for (double d : {1e-2, 1e-3, 1e-4}) CHECK(smooth_corner(g, d).metric_deviation() <= d);
  }
  SECTION("inner corner has no jump") {
    CHECK(std::abs(sm.mean_curvature_jump(Corner::sigma)) < 1e-12);
    const double J = sm.mean_curvature_jump(Corner::fill);
    CHECK(J == Approx(4 / g->R_sigma() - 4 / 64.0).epsilon(1e-10));
  }
}

TEST_CASE("band curvature", "[smooth]") {
  const double sigma = 64.0;
  const auto g = schwarzschild_glued(sigma);
  std::vector<double> cs;
  for (double k : {1e-4, 1e-5, 1e-6, 1e-7}) {
    const auto sm = smooth_corner(g, k * sigma);
    const double J = sm.mean_curvature_jump(Corner::fill);
    cs.push_back(sm.band_integral(Corner::fill) / J);
    // Spike height: R(0) eps -> c J phi(0).
    CHECK(sm.curvature_profile(Corner::fill, 0.0) * sm.epsilon() == Approx(cs.back() * J).epsilon(1e-3));
    // Away from the spike the curvature stays bounded independently of delta.
    for (double z : {0.5, 0.9, -0.5, -0.9}) {
      CHECK(std::abs(sm.curvature_profile(Corner::fill, z * sm.delta())) < 1e-3);
      CHECK(std::abs(sm.curvature_profile(Corner::sigma, z * sm.delta())) < 1e-3);
    }
    CHECK(sm.max_band_curvature(Corner::sigma) < 1e-3);
  }
  for (std::size_t i = 1; i < cs.size(); ++i) CHECK(cs[i] == Approx(cs[i - 1]).epsilon(1e-2));
  // The measured constant.
  CHECK(cs.back() == Approx(2.0).epsilon(1e-6));

  SECTION("finite-difference oracle on the profile") {
    // Wide band so second differences of rho ~ 30 stay above round-off.
    const auto sm = smooth_corner(g, 0.1);
    const double J = sm.mean_curvature_jump(Corner::fill);
    const double fd = fd_band_integral(sm, Corner::fill, 4000);
    CHECK(fd / J == Approx(sm.band_integral(Corner::fill) / J).epsilon(1e-3));
  }
  SECTION("rejects t outside the band") {
    const auto sm = smooth_corner(g, 1e-3);
    CHECK_THROWS_AS(sm.curvature_profile(Corner::fill, 2e-3), InvalidInput);
  }
}

TEST_CASE("scalar aux", "[smooth]") {
  SECTION("flat glued metric") {
    const auto g = std::make_shared<const GluedMetric>(glue(RadialAFMetric::flat(), 64.0));
    const auto sm = std::make_shared<const SmoothedMetric>(g, 1e-4);
    const auto f = build_scalar_aux(sm);
    for (double s : {1.0, g->s_fill(), g->s_fill() + 1e-9, 50.0, g->s_sigma(), 200.0}) CHECK(std::abs(f(s)) < 1e-15);
  }
  SECTION("clamp only in the fill band") {
    const auto g = schwarzschild_glued(128.0);
    const auto sm = std::make_shared<const SmoothedMetric>(g, 1e-7);
    const auto f = build_scalar_aux(sm);
    CHECK(f.C0() >= 1.0);
    for (double s : {10.0, g->s_fill() + 5.0, g->s_sigma() - 1e-8, g->s_sigma() + 3.0})
      CHECK(f(s) == Approx(sm->scalar_curvature(s) / 8).epsilon(1e-14));
    for (int i = -50; i <= 50; ++i) {
      const double x = i / 50.0 * sm->delta();
      const double r8 = sm->curvature_profile(Corner::fill, x) / 8;
      CHECK(f.in_band(Corner::fill, x) <= r8);
      CHECK(f.in_band(Corner::fill, x) >= -f.C0());
    }
  }
  SECTION("L^{3/2} norm decays like 1/sigma or faster") {
    std::vector<double> ls, lv, sig{64, 128, 256};
    for (double s : sig) {
      const auto g = schwarzschild_glued(s);
      const auto f = build_scalar_aux(std::make_shared<const SmoothedMetric>(g, std::pow(s, -4)));
      const double v = f.l32_integral(g->s_of_r(40 * s));
      ls.push_back(std::log(s));
      lv.push_back(std::log(v));
    }
    CHECK(fit_line(ls, lv).slope <= -1.0);
  }
}
