#include <catch_amalgamated.hpp>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>

#include "afiso/conformal.hpp"

using namespace afiso;
using Catch::Approx;

namespace {

ScalarAux pipeline_aux(double sigma, double delta) {
  auto g = std::make_shared<const GluedMetric>(glue(RadialAFMetric::schwarzschild(1.0), sigma));
  return build_scalar_aux(std::make_shared<const SmoothedMetric>(g, delta));
}

// u(0) of -Delta u + f u = 0 on a cube with Dirichlet data g, 7-point stencil.
double cube_center_value(const std::function<double(double)>& f, const std::function<double(double)>& g, double half, int n) {
  const double h = 2 * half / n;
  const int m = n - 1;
  auto id = [m](int i, int j, int k) { return (i * m + j) * m + k; };
  std::vector<Eigen::Triplet<double>> trip;
  Eigen::VectorXd b = Eigen::VectorXd::Zero(m * m * m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      for (int k = 0; k < m; ++k) {
        const double x = -half + (i + 1) * h, y = -half + (j + 1) * h, z = -half + (k + 1) * h;
        const int row = id(i, j, k);
        trip.emplace_back(row, row, 6.0 / (h * h) + f(std::sqrt(x * x + y * y + z * z)));
        const int nb[6][3] = {{i - 1, j, k}, {i + 1, j, k}, {i, j - 1, k}, {i, j + 1, k}, {i, j, k - 1}, {i, j, k + 1}};
        for (const auto& q : nb) {
          if (q[0] < 0 || q[0] >= m || q[1] < 0 || q[1] >= m || q[2] < 0 || q[2] >= m) {
            const double xx = -half + (q[0] + 1) * h, yy = -half + (q[1] + 1) * h, zz = -half + (q[2] + 1) * h;
            b[row] += g(std::sqrt(xx * xx + yy * yy + zz * zz)) / (h * h);
          } else {
            trip.emplace_back(row, id(q[0], q[1], q[2]), -1.0 / (h * h));
          }
        }
      }
  Eigen::SparseMatrix<double> A(m * m * m, m * m * m);
  A.setFromTriplets(trip.begin(), trip.end());
  Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper> cg;
  cg.setTolerance(1e-12);
  cg.compute(A);
  const Eigen::VectorXd u = cg.solve(b);
  return u[id(m / 2, m / 2, m / 2)];
}

}  // namespace

TEST_CASE("trivial source", "[conformal]") {
  const auto sol = solve_conformal(flat_problem([](double) { return 0.0; }, 1.0, 1.0));
  for (double v : sol.u) CHECK(v == Approx(1.0).margin(1e-14));
  CHECK(sol.A == Approx(0.0).margin(1e-12));
  const auto mc = mass_shift(sol, 3.0);
  CHECK(mc.m_after == 3.0);
  CHECK(mc.ratio == Approx(1.0).margin(1e-12));
}

TEST_CASE("constant source on a ball", "[conformal]") {
  // f = k^2 on r < a: u = sinh(kr) / (k r cosh(ka)) inside, 1 + A/r outside,
  // A = tanh(ka)/k - a.
  const double a = 1.0, k = 0.5;
  const auto sol = solve_conformal(flat_problem([&](double) { return k * k; }, a, a));
  const double A = std::tanh(k * a) / k - a;
  CHECK(sol.A == Approx(A).epsilon(1e-5));
  CHECK(sol.A < 0.0);
  CHECK(sol.u.front() == Approx(1.0 / std::cosh(k * a)).epsilon(1e-5));
  ConformalOptions fine;
  fine.h_factor /= 2;
  fine.stretch = 1.0 + (fine.stretch - 1.0) / 2;
  const auto sol2 = solve_conformal(flat_problem([&](double) { return k * k; }, a, a), fine);
  CHECK(std::abs(sol2.A - A) < std::abs(sol.A - A) / 3);
  CHECK(sol.residual <= 1e-8);
  CHECK(sol.identity_error() <= 1e-3);
  CHECK(sol.A_stable());
  CHECK(sol.min_u > 0.0);
  CHECK(sol.far_constant == Approx(std::abs(A)).epsilon(1e-3));
  const auto mc = mass_shift(sol, 0.0);
  CHECK(mc.m_direct == Approx(2 * A).epsilon(1e-2));
  CHECK(mc.consistent);
}

TEST_CASE("smooth bump against a 3-D solve", "[conformal]") {
  auto f = [](double r) { return r < 1.0 ? 2.0 * std::pow(1 - r * r, 3) : 0.0; };
  const auto sol = solve_conformal(flat_problem(f, 1.0, 1.0));
  CHECK(sol.A < 0.0);
  CHECK(sol.identity_error() <= 1e-3);
  auto bc = [&](double r) { return sol.u_of_r(r); };
  const double u0 = sol.u.front();
  const double e1 = std::abs(cube_center_value(f, bc, 2.0, 24) - u0);
  const double e2 = std::abs(cube_center_value(f, bc, 2.0, 48) - u0);
  CHECK(e2 <= 1e-2 * (1.0 - u0));
  CHECK(e1 / e2 > 3.0);
}

TEST_CASE("sign and failure", "[conformal]") {
  SECTION("u <= 0 is reported as a smallness violation") {
    CHECK_THROWS_AS(solve_conformal(flat_problem([](double) { return -20.0; }, 1.0, 1.0)), SolveFailure);
  }
  SECTION("bad options") {
    ConformalOptions o;
    o.r_max_factor = 10.0;
    CHECK_THROWS_AS(solve_conformal(flat_problem([](double) { return 1.0; }, 1.0, 1.0), o), InvalidInput);
  }
  SECTION("nonnegative f gives A <= 0") {
    for (double b : {0.1, 1.0, 10.0}) {
      const auto sol = solve_conformal(flat_problem([&](double r) { return b * r * (1 - r); }, 1.0, 1.0));
      CHECK(sol.A <= 0.0);
    }
  }
}

TEST_CASE("linearization under scaling of f", "[conformal]") {
  const auto f = pipeline_aux(64.0, std::pow(64.0, -4));
  const auto prob = radial_problem(std::make_shared<const ScalarAux>(f));
  std::vector<double> lams{1.0, 0.5, 0.1, 0.01, 1e-3}, As;
  for (double l : lams) {
    ConformalOptions o;
    o.f_scale = l;
    As.push_back(std::abs(solve_conformal(prob, o).A));
  }
  const double slope0 = As.back() / lams.back();
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < lams.size(); ++i) {
    CHECK(As[i] > 0.0);
    CHECK(As[i] <= lams[i] * slope0 * (1 + 1e-9));
    const double nl = 1.0 - As[i] / (lams[i] * slope0);
    CHECK(nl <= prev);
    prev = nl;
  }
}

TEST_CASE("pipeline solve", "[conformal]") {
  for (double sigma : {64.0, 256.0}) {
    const auto f = pipeline_aux(sigma, std::pow(sigma, -4));
    const auto sol = solve_conformal(f);
    const auto& g = f.metric().glued();
    CHECK(sol.residual <= 1e-8);
    CHECK(sol.min_u > 0.0);
    CHECK(sol.identity_error() <= 1e-3);
    CHECK(sol.A_stable());
    // Linear response to the collar curvature: 4 pi A ~ -int f dV over the collar.
    const double collar = -sigma / 8 * (1 - std::pow(g.R_sigma() / sigma, 2));
    CHECK(sol.A == Approx(collar).epsilon(2e-2));
    const auto mc = mass_shift(sol, 1.0);
    CHECK(mc.consistent);
    CHECK(mc.ratio < 1.0);
    CHECK(mc.ratio <= 7.0 / 8.0);
  }
}

TEST_CASE("grid refinement", "[conformal]") {
  const auto f = pipeline_aux(128.0, std::pow(128.0, -4));
  ConformalOptions fine;
  fine.h_factor /= 2;
  fine.stretch = 1.0 + (fine.stretch - 1.0) / 2;
  const auto a = solve_conformal(f), b = solve_conformal(f, fine);
  CHECK(b.sup_deviation(64.0) == Approx(a.sup_deviation(64.0)).epsilon(1e-2));
  CHECK(b.A == Approx(a.A).epsilon(1e-3));
}

TEST_CASE("sup estimate", "[conformal]") {
  SECTION("zero source is degenerate") {
    std::vector<ConformalSolution> sols;
    std::vector<double> sig{1, 2, 4};
    for (double s : sig) sols.push_back(solve_conformal(flat_problem([](double) { return 0.0; }, s, s)));
    const auto rep = sup_estimate_check(sols, sig);
    CHECK(rep.degenerate);
    CHECK_THROWS_AS(sup_estimate_check({sols[0], sols[1]}, {1, 2}), InvalidInput);
  }
  SECTION("pipeline sweep") {
    std::vector<ConformalSolution> sols;
    std::vector<double> sig{64, 128, 256};
    for (double s : sig) sols.push_back(solve_conformal(pipeline_aux(s, std::pow(s, -4))));
    const auto rep = sup_estimate_check(sols, sig);
    CHECK_FALSE(rep.degenerate);
    CHECK(rep.pass);
    CHECK(rep.exponent <= -0.3);
  }
}
