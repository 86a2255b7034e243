#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "extps/invariants.hpp"
#include "extps/oscillator.hpp"

using namespace extps;

namespace {

ErmakovConfig config(double omega, double eta, double nu, double rho0, double t1 = 10.0) {
  ErmakovConfig c;
  c.omega = constant_profile(omega);
  c.eta_fric = constant_profile(eta);
  c.nu = nu;
  c.rho0 = rho0;
  c.t1 = t1;
  return c;
}

double sup_abs(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s = std::max(s, std::abs(x));
  return s;
}

double sup_diff(const std::vector<double>& a, const std::vector<double>& b) {
  REQUIRE(a.size() == b.size());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s = std::max(s, std::abs(a[i] - b[i]));
  return s;
}

Bindings state(double x1, double x2, double p1, double p2) { return {{"x1", x1}, {"x2", x2}, {"p1", p1}, {"p2", p2}}; }

}  // namespace

TEST_CASE("Ermakov: constant ansatz stays at rho = 1") {
  const auto c = config(2.0, 0.0, 2.0, 1.0);
  const auto sol = solve_ermakov(c, uniform_grid(0, 10, 1000));
  for (std::size_t i = 0; i < sol.grid.size(); ++i) {
    CHECK(std::abs(sol.rho[i] - 1.0) < 1e-10);
    CHECK(std::abs(sol.rhodot[i]) < 1e-10);
  }
}

TEST_CASE("Ermakov: default nu puts rho0 at equilibrium") {
  ErmakovConfig c;
  c.omega = constant_profile(3.0);
  c.m = 2.0;
  c.rho0 = 0.7;
  CHECK(c.nu_value() == doctest::Approx(2.0 * 3.0 * 0.49));
  const auto sol = solve_ermakov(c, uniform_grid(0, 5, 200));
  CHECK(sup_abs(sol.rhodot) < 1e-10);
}

TEST_CASE("Ermakov: rho0 = 2 matches the closed form and is self-convergent") {
  const auto c = config(2.0, 0.0, 2.0, 2.0);
  const auto grid = uniform_grid(0, 10, 1000);
  // rho^2 = A + B cos(4t) with A + B = 4 and A^2 - B^2 = nu^2 / (m^2 w^2) = 1
  const double a = 17.0 / 8.0, b = 15.0 / 8.0;
  const auto sol = solve_ermakov(c, grid);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    CHECK(std::abs(sol.rho[i] - std::sqrt(a + b * std::cos(4 * grid[i]))) < 1e-8);
    CHECK(sol.rho[i] >= 0.5 - 1e-9);
  }
  IntegratorPolicy coarse{Method::RK4, 1e-10, 1e-10, 1e-3};
  IntegratorPolicy fine{Method::RK4, 1e-10, 1e-10, 5e-4};
  CHECK(sup_diff(solve_ermakov(c, grid, coarse).rho, solve_ermakov(c, grid, fine).rho) < 1e-8);
}

TEST_CASE("Ermakov: nu = 0 is the linear damped oscillator") {
  const double eta = 0.5, w = 2.0;
  const auto c = config(w, eta, 0.0, 1.0, 0.6);
  const auto grid = uniform_grid(0, 0.6, 60);
  const auto sol = solve_ermakov(c, grid);

  // independent path: the symbolic pipeline on x'' + eta x' + w^2 x = 0
  Context ctx;
  ctx.declare_symbol("x", SymbolKind::Coordinate);
  ctx.declare_symbol("v", SymbolKind::Coordinate);
  ctx.declare_symbol("t", SymbolKind::Time);
  ctx.freeze();
  const auto lin = integrate({{"x", parse("v", ctx)}, {"v", parse("-1/2*v - 4*x", ctx)}}, {{"x", 1.0}, {"v", 0.0}},
                             "t", grid, {}, ctx);
  CHECK(sup_diff(sol.rho, lin.column("x")) < 1e-9);
  CHECK(sup_diff(sol.rhodot, lin.column("v")) < 1e-9);
}

TEST_CASE("Ermakov: finite-difference residual on generic runs") {
  std::mt19937_64 rng(404);
  std::uniform_real_distribution<double> w(0.5, 3.0), eta(0.0, 1.0), nu(0.2, 3.0), r0(0.3, 2.0), rd(-1.0, 1.0);
  for (int k = 0; k < 5; ++k) {
    auto c = config(w(rng), eta(rng), nu(rng), r0(rng), 5.0);
    c.rhodot0 = rd(rng);
    const auto sol = solve_ermakov(c, uniform_grid(0, 5, 5000));
    CHECK(sup_abs(ermakov_residual(sol, c)) < 1e-6);
  }
}

TEST_CASE("Ermakov: time-dependent omega profile") {
  ErmakovConfig c;
  c.omega = expression_profile("2 + t/10");
  c.eta_fric = constant_profile(0.3);
  c.nu = 1.5;
  c.rho0 = 0.8;
  const auto sol = solve_ermakov(c, uniform_grid(0, 5, 5000));
  CHECK(sup_abs(ermakov_residual(sol, c)) < 1e-6);
}

TEST_CASE("Ermakov: collapse aborts with the last valid time") {
  auto c = config(2.0, 0.0, 1e8, 1e-6, 1.0);
  try {
    solve_ermakov(c, uniform_grid(0, 1, 10));
    FAIL("expected IntegrationError");
  } catch (const IntegrationError& e) {
    CHECK(e.last_valid() >= 0.0);
    CHECK(e.last_valid() < 1.0);
  }
}

TEST_CASE("Ermakov: config validation") {
  CHECK_THROWS_AS(config(2, 0, 1, 0.0).resolved(), std::invalid_argument);
  CHECK_THROWS_AS(config(2, 0, -1, 1.0).resolved(), std::invalid_argument);
  CHECK_THROWS_AS(config(2, 0, 1, 1.0, 0.0).resolved(), std::invalid_argument);
  ErmakovConfig none;
  CHECK_THROWS_AS(none.resolved(), std::invalid_argument);
}

TEST_CASE("Lewis invariant: constant-rho case equals 2") {
  const auto c = config(2.0, 0.0, 2.0, 1.0);
  const auto run = solve_coupled(c, state(1, 0, 0, 0), uniform_grid(0, 10, 1000));
  const auto inv = lewis_invariant(run.oscillator, run.rho, c);
  // oracle: x1 = cos 2t, p1 = -2 sin 2t, rho = 1, I = 1/2 (p1^2 + 4 x1^2)
  for (std::size_t i = 0; i < inv.size(); ++i) {
    const double t = run.oscillator.grid[i];
    const double x = std::cos(2 * t), p = -2 * std::sin(2 * t);
    CHECK(std::abs(inv[i] - 0.5 * (p * p + 4 * x * x)) < 1e-8);
    CHECK(std::abs(inv[i] - 2.0) < 1e-8);
  }
}

TEST_CASE("Lewis invariant: conserved for damped motion") {
  const auto c = config(2.0, 0.5, 2.0, 1.0);
  const auto run = solve_coupled(c, state(1, 0.5, 0.2, -0.3), uniform_grid(0, 10, 1000));
  const auto inv = lewis_invariant(run.oscillator, run.rho, c);
  const auto rep = invariant_drift_report(inv, run.oscillator.grid);
  CHECK(rep.relative);
  CHECK(rep.max_drift < 1e-7);
}

TEST_CASE("Lewis invariant: random scenarios conserve I") {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> w(0.5, 3.0), eta(0.0, 1.0), nu(0.2, 3.0), r0(0.5, 1.5), s(-1.0, 1.0);
  for (int k = 0; k < 8; ++k) {
    auto c = config(w(rng), eta(rng), nu(rng), r0(rng), 10.0);
    c.m = 0.5 + std::abs(s(rng));
    c.rhodot0 = 0.3 * s(rng);
    const auto run = solve_coupled(c, state(s(rng), s(rng), s(rng), s(rng)), uniform_grid(0, 10, 500));
    const auto inv = lewis_invariant(run.oscillator, run.rho, c);
    CHECK(invariant_drift_report(inv, run.oscillator.grid).max_drift < 1e-6);
    for (double v : inv) CHECK(v >= 0.0);
  }
}

TEST_CASE("Lewis invariant: I = (nu/omega) H when undamped at equilibrium") {
  const double w = 1.7, m = 1.3, nu = 0.9;
  auto c = config(w, 0.0, nu, std::sqrt(nu / (m * w)));
  c.m = m;
  const auto run = solve_coupled(c, state(0.4, -0.8, 0.6, 0.1), uniform_grid(0, 10, 400));
  const auto inv = lewis_invariant(run.oscillator, run.rho, c);
  const auto& tr = run.oscillator;
  for (std::size_t i = 0; i < tr.size(); ++i) {
    const double x1 = tr.series[0][i], x2 = tr.series[1][i], p1 = tr.series[2][i], p2 = tr.series[3][i];
    const double h = (p1 * p1 + p2 * p2) / (2 * m) + m * w * w * (x1 * x1 + x2 * x2) / 2;
    CHECK(std::abs(inv[i] - nu / w * h) < 1e-9);
  }
}

TEST_CASE("Lewis invariant: zero state gives zero and absolute drift mode") {
  const auto c = config(2.0, 0.5, 1.0, 1.0, 2.0);
  const auto run = solve_coupled(c, state(0, 0, 0, 0), uniform_grid(0, 2, 100));
  const auto inv = lewis_invariant(run.oscillator, run.rho, c);
  for (double v : inv) CHECK(v == 0.0);
  const auto rep = invariant_drift_report(inv, run.oscillator.grid);
  CHECK_FALSE(rep.relative);
  CHECK(rep.max_drift == 0.0);
}

TEST_CASE("Lewis invariant: separate runs with spline interpolation") {
  const auto c = config(1.5, 0.4, 1.2, 0.9);
  const auto ctx = oscillator_context({c.omega, c.eta_fric, nullptr});
  const auto eom = hamilton_eom(oscillator_hamiltonian(ctx), original_chart(), ctx);
  const auto tr = integrate(eom, state(1, -0.5, 0.3, 0.2), "t", uniform_grid(0, 10, 333), {}, ctx, {{"m", 1.0}});
  const auto sol = solve_ermakov(c, uniform_grid(0, 10, 4000));
  const auto inv = lewis_invariant(tr, sol, c);
  CHECK(invariant_drift_report(inv, tr.grid).max_drift < 1e-6);

  const auto short_sol = solve_ermakov(c, uniform_grid(0, 5, 500));
  CHECK_THROWS_AS(lewis_invariant(tr, short_sol, c), std::invalid_argument);
}

TEST_CASE("Drift report arithmetic") {
  const auto grid = uniform_grid(0, 1, 10);
  std::vector<double> flat(grid.size(), 3.0), ramp;
  for (double t : grid) ramp.push_back(1.0 + 0.1 * t);
  CHECK(invariant_drift_report(flat, grid).max_drift == 0.0);
  const auto r = invariant_drift_report(ramp, grid);
  CHECK(r.max_drift == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(r.at == 1.0);
  CHECK(r.relative);
  CHECK_THROWS_AS(invariant_drift_report(flat, {0.0}), std::invalid_argument);
}
