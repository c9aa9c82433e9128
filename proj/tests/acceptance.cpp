// Acceptance run: one PASS/FAIL line per criterion on stdout.

#include <catch_amalgamated.hpp>

#include <chrono>
#include <cstdio>
#include <iostream>
#include <sstream>

#include "afiso/centering.hpp"
#include "afiso/conformal.hpp"
#include "collar_oracle.hpp"

using namespace afiso;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void report(int id, const std::string& title, bool pass, const std::string& detail) {
  std::cout << (pass ? "PASS" : "FAIL") << "  criterion " << id << "  " << title << "  [" << detail << "]" << std::endl;
  CHECK(pass);
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::shared_ptr<const GluedMetric> schwarzschild_glued(double sigma) {
  return std::make_shared<const GluedMetric>(glue(RadialAFMetric::schwarzschild(1.0), sigma));
}

}  // namespace

TEST_CASE("criterion 1: ADM exactness") {
  bool ok = true;
  std::ostringstream d;
  const auto t0 = std::chrono::steady_clock::now();
  for (double m : {0.5, 1.0, 2.0}) {
    std::vector<double> radii;
    for (int k = 5; k <= 9; ++k) radii.push_back(std::ldexp(1.0, k) * m);
    const auto rep = adm_mass(RadialAFMetric::schwarzschild(m), radii);
    const double rel = std::abs(rep.extrapolated - m) / m;
    ok = ok && rel <= 1e-2;
    d << "m=" << m << " rel " << fmt(rel) << "; ";
  }
  const double t = seconds_since(t0);
  d << "runtime " << fmt(t) << " s";
  report(1, "ADM mass of Schwarzschild within 1%, < 1 s", ok && t < 1.0, d.str());
}

TEST_CASE("criterion 2: Hawking exactness") {
  double closed = 0.0, quad = 0.0;
  for (double m : {0.5, 1.0, 2.0}) {
    const auto g = RadialAFMetric::schwarzschild(m);
    for (double k : {10.0, 100.0, 1000.0}) {
      const double r = k * m;
      closed = std::max(closed, std::abs(hawking_mass(g.area(r), g.mean_curvature(r)) - m) / m);
      quad = std::max(quad, std::abs(hawking_mass_quadrature(cartesian(g), r) - m) / m);
    }
  }
  report(2, "Hawking mass of centered spheres equals m", closed <= 1e-8 && quad <= 1e-4,
         "closed form " + fmt(closed) + ", quadrature " + fmt(quad));
}

TEST_CASE("criterion 3: isoperimetric-mass recovery") {
  const auto g = RadialAFMetric::schwarzschild(1.0);
  const double a = iso_mass_centered(g, 1e2), b = iso_mass_centered(g, 1e3), c = iso_mass_centered(g, 1e4);
  const bool mono = std::abs(c - 1) < std::abs(b - 1) && std::abs(b - 1) < std::abs(a - 1);
  report(3, "m_iso within 5% at 1e3 and approaching m", std::abs(b - 1) <= 0.05 && mono,
         "m_iso = " + fmt(a) + ", " + fmt(b) + ", " + fmt(c));
}

TEST_CASE("criterion 4: MS-path area preservation") {
  auto run = [](int n, int steps) {
    const auto g = make_grid(n);
    const auto u = S2Field::from_function(g, [](double th, double) { return 0.05 * std::cos(th); });
    return build_path(u, 64.0, {.steps = steps});
  };
  const auto t0 = std::chrono::steady_clock::now();
  const auto fine = run(64, 200);
  const double t = seconds_since(t0);
  const auto coarse = run(32, 100);
  const double df = fine.max_area_form_deviation(), dc = coarse.max_area_form_deviation();
  const double osc = fine.endpoint_oscillation();
  report(4, "area form preserved along the path",
         df <= 1e-3 && df <= 0.5 * dc && osc <= 1e-3 && t < 60.0,
         "deviation " + fmt(df) + " (coarse " + fmt(dc) + "), oscillation " + fmt(osc) + ", runtime " + fmt(t) + " s");
}

TEST_CASE("criterion 5: collar curvature decay") {
  const double tau = 1.0;
  const auto g = make_grid(16);
  const auto rep = collar_scaling_study([&](double s) { return testing::generic_data(g, std::pow(s, -tau)); },
                                        {32, 64, 128, 256});
  const bool decay = !rep.degenerate && std::abs(rep.exponent + (2 + tau)) <= 0.3;

  // Assembled curvature against finite differences of the metric in the image chart.
  const auto c = make_collar(testing::generic_data(g, 0.3), 2.0, {.steps = 32, .track_flow = false});
  double worst_order = 1e9;
  for (int node : {4, 20}) {
    const testing::ImageChartMetric metric(c, node);
    const oracle::MetricFn fn = [&](const oracle::Point3& x) { return metric(x); };
    const auto R = collar_scalar_curvature(c, c.path().times()[node]);
    for (auto [j, k] : {std::pair{5, 3}, std::pair{9, 20}}) {
      const oracle::Point3 x{g->theta(j), g->phi(k), c.path().times()[node]};
      const double ref = R[g->index(j, k)];
      const double e1 = std::abs(oracle::scalar_curvature_fd(fn, x, 2e-2) - ref);
      const double e2 = std::abs(oracle::scalar_curvature_fd(fn, x, 1e-2) - ref);
      const double e3 = std::abs(oracle::scalar_curvature_fd(fn, x, 5e-3) - ref);
      worst_order = std::min({worst_order, std::log2(e1 / e2), std::log2(e2 / e3)});
    }
  }
  report(5, "collar curvature decays like sigma^-(2+tau); formula matches FD oracle",
         decay && worst_order > 1.7, "exponent " + fmt(rep.exponent) + ", FD order " + fmt(worst_order));
}

TEST_CASE("criterion 6: mean-curvature identities") {
  double worst = 0.0;
  bool corner = true;
  std::ostringstream d;
  for (double sigma : {64.0, 128.0, 256.0}) {
    const auto g = schwarzschild_glued(sigma);
    const auto h = boundary_mean_curvatures(*g);
    worst = std::max({worst, std::abs(h.H_inner_gamma * sigma / 2 - 1), std::abs(h.H_outer_gamma * sigma / 4 - 1)});
    const double gap = 1 - std::pow(g->R_sigma() / sigma, 2);
    corner = corner && h.jump() > 0 && gap >= 1.0 / sigma;
    d << "sigma " << sigma << ": jump " << fmt(h.jump()) << ", gap " << fmt(gap) << "; ";
  }
  d << "max relative H error " << fmt(worst);
  report(6, "H = 2/sigma and 4/sigma; outer corner jump positive", worst <= 4 * std::numeric_limits<double>::epsilon() && corner,
         d.str());
}

TEST_CASE("criterion 7: smoothing spike") {
  const auto g = schwarzschild_glued(64.0);
  std::vector<double> cs;
  for (double delta = 1e-4 * 64.0; delta >= 1e-7 * 64.0 * (1 - 1e-12); delta /= 2) {
    const auto sm = smooth_corner(g, delta);
    cs.push_back(sm.band_integral(Corner::fill) / sm.mean_curvature_jump(Corner::fill));
  }
  double drift = 0.0;
  for (std::size_t i = 1; i < cs.size(); ++i) drift = std::max(drift, std::abs(cs[i] / cs[i - 1] - 1));
  report(7, "band curvature proportional to the jump, constant invariant under halving", drift <= 1e-2,
         std::to_string(cs.size()) + " deltas, c = " + fmt(cs.back()) + ", max change " + fmt(drift));
}

namespace {

struct PipelinePoint {
  double sigma;
  ConformalSolution sol;
  MassComparison mc;
};

double pipeline_seconds = 0.0;

const std::vector<PipelinePoint>& pipeline_runs() {
  static const std::vector<PipelinePoint> runs = [] {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<PipelinePoint> out;
    for (double sigma : {64.0, 128.0, 256.0}) {
      auto sm = std::make_shared<const SmoothedMetric>(smooth_corner(schwarzschild_glued(sigma), std::pow(sigma, -4)));
      auto sol = solve_conformal(build_scalar_aux(sm));
      auto mc = mass_shift(sol, 1.0);
      out.push_back({sigma, std::move(sol), mc});
    }
    pipeline_seconds = seconds_since(t0);
    return out;
  }();
  return runs;
}

}  // namespace

TEST_CASE("criterion 8: conformal integral identity") {
  double id = 0.0, adm = 0.0;
  for (const auto& p : pipeline_runs()) {
    id = std::max(id, p.sol.identity_error());
    adm = std::max(adm, std::abs(p.mc.m_direct - p.mc.m_after) / p.mc.m_after);
  }
  report(8, "4 pi A equals the energy integral; direct ADM of u^4 g matches m + 2A", id <= 1e-3 && adm <= 1e-2,
         "identity " + fmt(id) + ", ADM mismatch " + fmt(adm));
}

TEST_CASE("criterion 9: mass comparison") {
  const auto& runs = pipeline_runs();
  const double t = pipeline_seconds;
  bool below = true;
  double mn = 1e300;
  std::ostringstream d;
  for (const auto& p : runs) {
    below = below && p.mc.m_after < p.mc.m_before;
    mn = std::min(mn, p.mc.ratio);
    d << "sigma " << p.sigma << " ratio " << fmt(p.mc.ratio) << "; ";
  }
  d << "runtime " << fmt(t) << " s";
  report(9, "mass strictly decreases, ratio <= 7/8 attained", below && mn <= 7.0 / 8.0 && t < 300.0, d.str());
}

TEST_CASE("criterion 10: centering integrals") {
  bool ok = true;
  double worst = 0.0;
  std::uint64_t seed = 20261016;
  for (double rho : {1.0, 10.0, 50.0, 100.0})
    for (double x : {0.0, 0.5, 1.0, 2.0}) {
      const TrialRegion t(rho, x * normalized(Vec3{1, 2, -2}));
      const auto c = centering_integrals(t);
      const auto mc = centering_integrals_mc(t, 1000000, seed++);
      const double ds = std::abs(mc.surface.mean - c.surface), dv = std::abs(mc.volume.mean - c.volume);
      // The xi = 0 surface integrand is constant: zero variance.
      const double zs = mc.surface.standard_error > 0 ? ds / mc.surface.standard_error : (ds <= 1e-12 * c.surface ? 0 : 1e9);
      const double zv = dv / mc.volume.standard_error;
      worst = std::max({worst, zs, zv});
      ok = ok && zs <= 3 && zv <= 3;
    }
  report(10, "closed forms match Monte Carlo on a 4x4 grid within 3 SE", ok, "largest |z| " + fmt(worst));
}

TEST_CASE("criterion 11: centering comparison") {
  const double m = 1.0, eps0 = 0.125, A = -0.5 * eps0 * m;
  auto u = [A](double r) { return 1 + A / r; };
  bool centered = true;
  std::ostringstream d;
  for (double rho : {50.0, 100.0})
    for (double x : {0.5, 1.0, 2.0}) {
      const auto cc = compare_centering(u, 0.5, TrialRegion(rho, x));
      centered = centered && cc.centered_smaller;
      if (!cc.centered_smaller) d << "rho " << rho << " xi " << x << ": off " << fmt(cc.area_off) << " < centered " << fmt(cc.area_centered) << "; ";
    }
  bool deficit = true;
  for (double x : {0.5, 1.0, 2.0}) {
    const auto df = centering_deficit(TrialRegion(100.0, x), m, eps0);
    deficit = deficit && df.deficit >= 0.5 * df.bound;
    d << "xi " << x << " deficit/bound " << fmt(df.deficit / df.bound) << "; ";
  }
  d << "centered smaller everywhere: " << (centered ? "yes" : "no");
  report(11, "centered balls smaller at equal volume; deficit >= 50% of bound", centered && deficit, d.str());
}

TEST_CASE("criterion 12: isoperimetric residual") {
  const auto g = RadialAFMetric::schwarzschild(1.0);
  std::vector<double> q;
  for (double r : {1e2, 1e3, 1e4}) {
    const auto b = centered_ball(g, r);
    q.push_back(std::abs(isoperimetric_residual(b.volume, b.area, 1.0) / b.area));
  }
  report(12, "residual / area decreases in magnitude", q[1] < q[0] && q[2] < q[1],
         fmt(q[0]) + ", " + fmt(q[1]) + ", " + fmt(q[2]));
}
