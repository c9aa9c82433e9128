#include <catch_amalgamated.hpp>

#include <chrono>

#include "afiso/centering.hpp"

using namespace afiso;
using Catch::Approx;

namespace {

// Antiderivative of 4 pi (r + a)^6 / r^4, a = m/2.
double schwarzschild_volume_primitive(double m, double r) {
  const double a = 0.5 * m;
  return 4.0 * kPi *
         (r * r * r / 3 + 3 * a * r * r + 15 * a * a * r + 20 * std::pow(a, 3) * std::log(r) - 15 * std::pow(a, 4) / r -
          3 * std::pow(a, 5) / (r * r) - std::pow(a, 6) / (3 * r * r * r));
}

}  // namespace

TEST_CASE("mass extrapolation", "[mass]") {
  CHECK_THROWS_AS(extrapolate_mass({1, 2}, {1, 1}), InvalidInput);
  CHECK_THROWS_AS(extrapolate_mass({1, 3, 2}, {1, 1, 1}), InvalidInput);
  std::vector<double> r{10, 20, 40, 80}, e;
  for (double x : r) e.push_back(2.0 + 3.0 / x);
  const auto rep = extrapolate_mass(r, e);
  CHECK(rep.extrapolated == Approx(2.0).epsilon(1e-12));
  CHECK(rep.consistent);
  CHECK(rep.monotone);
  e[1] = 5.0;
  CHECK_FALSE(extrapolate_mass(r, e).monotone);
  CHECK(rep.to_json().find("\"extrapolated\":") != std::string::npos);
}

TEST_CASE("ADM mass", "[mass]") {
  std::vector<double> radii{32, 64, 128, 256, 512};
  SECTION("flat") {
    const auto rep = adm_mass(RadialAFMetric::flat(), radii);
    for (double v : rep.estimates) CHECK(std::abs(v) < 1e-12);
  }
  SECTION("Schwarzschild against the conformally flat closed form") {
    for (double m : {0.5, 1.0, 2.0}) {
      std::vector<double> rm;
      for (double r : radii) rm.push_back(r * m);
      const auto t0 = std::chrono::steady_clock::now();
      const auto rep = adm_mass(RadialAFMetric::schwarzschild(m), rm);
      CHECK(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() < 1.0);
      for (std::size_t i = 0; i < rm.size(); ++i) {
        const double P = 1 + m / (2 * rm[i]);
        CHECK(rep.estimates[i] == Approx(conformal_flux(P, -m / (2 * rm[i] * rm[i]), rm[i]) / 1.0).epsilon(1e-7));
      }
      CHECK(rep.extrapolated == Approx(m).epsilon(1e-2));
      CHECK(rep.consistent);
    }
  }
  SECTION("additive under u = 1 + A/r") {
    const double m = 1.0, A = -0.3;
    auto phi = [&](double r) { return (1 + A / r) * (1 + m / (2 * r)); };
    std::vector<double> big{64, 128, 256, 512, 1024};
    const auto rep = adm_mass(conformally_flat(phi), big);
    CHECK(rep.extrapolated == Approx(m + 2 * A).epsilon(1e-2));
  }
  SECTION("non-conformally-flat perturbation with the same mass") {
    // g = Psi^4 delta + eps x_i x_j / r^4 decays like r^-2 and adds no flux at infinity.
    const double m = 1.0;
    auto g = [&](const Vec3& x) {
      const double r = norm(x), w = std::pow(1 + m / (2 * r), 4);
      Mat3 out{};
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) out[i][j] = (i == j ? w : 0.0) + 0.5 * x[i] * x[j] / std::pow(r, 4);
      return out;
    };
    CHECK(adm_mass(g, radii).extrapolated == Approx(m).epsilon(1e-2));
  }
}

TEST_CASE("Hawking mass of centered spheres", "[mass]") {
  for (double m : {0.5, 1.0}) {
    const auto g = RadialAFMetric::schwarzschild(m);
    for (double k : {10.0, 100.0, 1000.0}) {
      const double r = k * m;
      CHECK(hawking_mass(g.area(r), g.mean_curvature(r)) == Approx(m).epsilon(1e-8));
      CHECK(hawking_mass_quadrature(cartesian(g), r) == Approx(m).epsilon(1e-4));
    }
  }
}

TEST_CASE("quasilocal isoperimetric mass", "[mass]") {
  for (double r : {0.5, 3.0, 100.0}) CHECK(quasilocal_iso_mass(4.0 / 3 * kPi * r * r * r, 4 * kPi * r * r) == Approx(0.0).margin(1e-12 * r));
  for (double A : {10.0, 1e4}) {
    const double V = std::pow(A, 1.5) / (6 * std::sqrt(kPi)) + 0.5 * 1.7 * A;
    CHECK(quasilocal_iso_mass(V, A) == Approx(1.7).epsilon(1e-10));
  }
  CHECK_THROWS_AS(quasilocal_iso_mass(1.0, 0.0), InvalidInput);
  CHECK_THROWS_AS(quasilocal_iso_mass(-1.0, 1.0), InvalidInput);
}

TEST_CASE("centered balls in Schwarzschild", "[mass]") {
  const auto g = RadialAFMetric::schwarzschild(1.0);
  SECTION("volume against the binomial closed form") {
    for (double r : {1.0, 100.0, 1e4})
      CHECK(centered_ball(g, r).volume ==
            Approx(schwarzschild_volume_primitive(1.0, r) - schwarzschild_volume_primitive(1.0, 0.5)).epsilon(1e-13));
  }
  SECTION("m_iso recovers the mass") {
    const double a = iso_mass_centered(g, 1e2), b = iso_mass_centered(g, 1e3), c = iso_mass_centered(g, 1e4);
    CHECK(b == Approx(1.0).epsilon(0.05));
    CHECK(std::abs(c - 1) < std::abs(b - 1));
    CHECK(std::abs(b - 1) < std::abs(a - 1));
  }
  SECTION("sharp inequality residual") {
    double prev = std::numeric_limits<double>::infinity();
    for (double r : {1e2, 1e3, 1e4}) {
      const auto b = centered_ball(g, r);
      const double q = std::abs(isoperimetric_residual(b.volume, b.area, 1.0) / b.area);
      CHECK(q < prev);
      prev = q;
    }
  }
  SECTION("profile inversion") {
    const auto flat = RadialAFMetric::flat();
    for (double V : {1.0, 1e3, 1e6})
      CHECK(iso_profile_radial(flat, V).area == Approx(std::cbrt(36 * kPi) * std::pow(V, 2.0 / 3)).epsilon(1e-12));
    const auto b = centered_ball(g, 100.0);
    const auto p = iso_profile_radial(g, b.volume);
    CHECK(p.r == Approx(100.0).epsilon(1e-12));
    CHECK(p.area == Approx(b.area).epsilon(1e-12));
    CHECK(std::abs(isoperimetric_residual(b.volume, b.area, 1.0)) / b.area < 0.02);
    CHECK_THROWS_AS(iso_profile_radial(g, -1.0), InvalidInput);
    CHECK_THROWS_AS(iso_profile_radial(g, 1e30), InvalidInput);
  }
  SECTION("centered sphere beats off-center balls at equal volume") {
    auto psi = [g](double r) { return g.psi(r)[0]; };
    for (double rho : {50.0, 100.0, 200.0})
      for (double x : {0.25, 0.5, 1.0, 2.0})
        for (const Vec3& dir : {Vec3{0, 0, 1}, normalized(Vec3{1, 1, 0}), normalized(Vec3{-1, 2, 3})}) {
          const auto cc = compare_centering(psi, g.horizon_radius(), TrialRegion(rho, x * dir));
          CHECK(cc.centered_smaller);
        }
  }
}

TEST_CASE("off-center ball measures", "[centering]") {
  auto one = [](double) { return 1.0; };
  for (double c : {0.0, 3.0, 10.0, 25.0}) {
    const auto b = off_center_ball(one, 0.0, 10.0, c);
    CHECK(b.volume == Approx(4.0 / 3 * kPi * 1000).epsilon(1e-12));
    CHECK(b.area == Approx(4 * kPi * 100).epsilon(1e-12));
  }
  // With a hole: the ball minus B_{1/2} when the hole is inside.
  const auto h = off_center_ball(one, 0.5, 10.0, 5.0);
  CHECK(h.volume == Approx(4.0 / 3 * kPi * (1000 - 0.125)).epsilon(1e-12));
  CHECK_THROWS_AS(off_center_ball(one, 0.0, -1.0, 0.0), InvalidInput);
}

TEST_CASE("centering integrals", "[centering]") {
  const auto z = centering_integrals(TrialRegion(10.0, 0.0));
  CHECK(z.surface == Approx(4 * kPi * 100));
  CHECK(z.volume == Approx(2 * kPi * 100));
  const auto t = centering_integrals(TrialRegion(10.0, 2.0));
  CHECK(t.surface == Approx(200 * kPi));
  CHECK(t.volume == Approx(209.44).epsilon(1e-4));
  // Both branches agree at |xi| = 1.
  const double r2 = 49.0;
  CHECK(4 * kPi * r2 == Approx(4 * kPi * r2 / 1.0));
  CHECK(2 * kPi * r2 * (1 - 1.0 / 3) == Approx(4 * kPi * r2 / 3.0));
  const auto below = centering_integrals(TrialRegion(7.0, 1.0 - 1e-12)), above = centering_integrals(TrialRegion(7.0, 1.0 + 1e-12));
  CHECK(below.surface == Approx(above.surface).epsilon(1e-10));
  CHECK(below.volume == Approx(above.volume).epsilon(1e-10));
  CHECK_THROWS_AS(TrialRegion(0.0, 1.0), InvalidInput);

  SECTION("Monte Carlo") {
    for (double rho : {1.0, 30.0})
      for (double x : {0.0, 0.7, 1.0, 3.0}) {
        const TrialRegion tr(rho, x * normalized(Vec3{1, -2, 0.5}));
        const auto c = centering_integrals(tr);
        const auto mc = centering_integrals_mc(tr, 200000, 777);
        CHECK(std::abs(mc.surface.mean - c.surface) <= 4 * mc.surface.standard_error + 1e-12 * c.surface);
        CHECK(std::abs(mc.volume.mean - c.volume) <= 4 * mc.volume.standard_error);
      }
    CHECK_THROWS_AS(centering_integrals_mc(TrialRegion(1.0, 0.5), 100, 1), InvalidInput);
    const auto a = centering_integrals_mc(TrialRegion(2.0, 0.5), 20000, 5), b = centering_integrals_mc(TrialRegion(2.0, 0.5), 20000, 5);
    CHECK(a.volume.mean == b.volume.mean);
  }
}

TEST_CASE("centering deficit", "[centering]") {
  CHECK(centering_bound(TrialRegion(100.0, 0.0), 1.0, 0.125) == 0.0);
  CHECK(centering_bound(TrialRegion(100.0, 1.0), 1.0, 0.125) == Approx(1250 * kPi));
  CHECK(centering_bound(TrialRegion(100.0, 1e6), 1.0, 0.125) == Approx(2 * 0.125 * kPi * 1e4).epsilon(1e-10));
  CHECK_THROWS_AS(centering_bound(TrialRegion(1.0, 1.0), 1.0, 1.5), InvalidInput);
  CHECK_THROWS_AS(centering_bound(TrialRegion(1.0, 1.0), -1.0, 0.5), InvalidInput);
  for (double x : {0.5, 1.0, 2.0}) {
    const auto d = centering_deficit(TrialRegion(100.0, x), 1.0, 0.125);
    CHECK(d.meets);
    CHECK(d.deficit >= d.bound);
    // Leading order in rho: the remainder is O(rho).
    CHECK(std::abs(d.deficit - d.leading) <= 0.1 * d.bound);
  }
  SECTION("off-center balls win in the negative-mass model") {
    // Positive deficit means more volume than the centered prediction at equal area.
    const double A = -1.0 / 16;
    auto u = [A](double r) { return 1 + A / r; };
    for (double x : {0.5, 1.0, 2.0}) CHECK_FALSE(compare_centering(u, 0.5, TrialRegion(100.0, x)).centered_smaller);
  }
}
