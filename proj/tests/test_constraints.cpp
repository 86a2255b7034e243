#include <doctest.h>

#include <random>

#include "extps/constraints.hpp"
#include "extps/oscillator.hpp"
#include "support.hpp"

using namespace extps;

namespace {

const Context& osc() {
  static const Context ctx = oscillator_context();
  return ctx;
}

Expr P(const std::string& s) { return parse(s, osc()); }

const OscillatorAnalysis& analysis() {
  static const OscillatorAnalysis a = analyze_oscillator(osc());
  return a;
}

Expr kPhi() {
  return P("p_tau + f(t_tau)/(2*m)*(p1_tau^2 + p2_tau^2) + m*w(t_tau)^2*f(t_tau)^-1/2*(x1_tau^2 + x2_tau^2)");
}

Context free_particle() {
  Context ctx;
  ctx.declare_symbol("q", SymbolKind::Coordinate);
  ctx.declare_symbol("v", SymbolKind::Velocity);
  ctx.declare_symbol("p", SymbolKind::Momentum);
  ctx.freeze();
  return ctx;
}

}  // namespace

TEST_CASE("extended Lagrangian from reparametrising time") {
  const auto lm = extended_oscillator_lagrangian(osc());
  CHECK(lm.lagrangian == P("f(t_tau)^-1*m/(2*t_tau_dot)*(x1_tau_dot^2 + x2_tau_dot^2) - "
                           "m*w(t_tau)^2*t_tau_dot/2*f(t_tau)^-1*(x1_tau^2 + x2_tau^2)"));
  CHECK(lm.coordinates == std::vector<std::string>{"x1_tau", "x2_tau", "t_tau"});
  CHECK(lm.momenta == std::vector<std::string>{"p1_tau", "p2_tau", "p_tau"});
}

TEST_CASE("Hessian of the original and extended oscillator") {
  const auto& a = analysis();
  CHECK(a.original_hessian.determinant == P("m^2*f(t)^-2"));
  CHECK(a.original_hessian.matrix[0][0] == P("f(t)^-1*m"));
  CHECK(a.original_hessian.matrix[0][1].is_zero());
  CHECK(a.extended_hessian.determinant.is_zero());

  const auto& mt = a.extended_hessian.matrix;
  CHECK(mt[0][0] == P("f(t_tau)^-1*m/t_tau_dot"));
  CHECK(mt[0][2] == P("-f(t_tau)^-1*m*x1_tau_dot/t_tau_dot^2"));
  CHECK(mt[2][2] == P("f(t_tau)^-1*m*(x1_tau_dot^2 + x2_tau_dot^2)/t_tau_dot^3"));

  // Null direction is the velocity vector itself.
  const Expr v[] = {P("x1_tau_dot"), P("x2_tau_dot"), P("t_tau_dot")};
  for (int i = 0; i < 3; ++i) {
    Expr row;
    for (int j = 0; j < 3; ++j) row += mt[i][j] * v[j];
    CHECK(row.is_zero());
  }
  for (std::uint64_t s = 1; s <= 10; ++s) {
    CHECK(numeric_rank(mt, GenericPoint(s)) == 2);
    CHECK(numeric_rank(a.original_hessian.matrix, GenericPoint(s)) == 2);
  }
}

TEST_CASE("free particle") {
  const Context ctx = free_particle();
  LagrangianModel lm{{"q"}, {"v"}, {"p"}, parse("v^2/2", ctx)};
  CHECK(hessian(lm, ctx).determinant == Expr(1));
  const auto lr = legendre(lm, ctx);
  CHECK(lr.momenta[0] == parse("v", ctx));
  CHECK(lr.hamiltonian == parse("p^2/2", ctx));
  CHECK(lr.primaries.empty());
  CHECK(from_legendre(lr).empty());
  CHECK(classify(from_legendre(lr), lm.chart(), ctx).empty());
}

TEST_CASE("Legendre transform of the original oscillator") {
  const auto& lr = analysis().original_legendre;
  CHECK(lr.momenta[0] == P("m*f(t)^-1*x1_dot"));
  CHECK(lr.momenta[1] == P("m*f(t)^-1*x2_dot"));
  CHECK(lr.hamiltonian == P("f(t)*(p1^2 + p2^2)/(2*m) + (m*w(t)^2/(2*f(t)))*(x1^2 + x2^2)"));
  CHECK(lr.primaries.empty());
  CHECK(lr.velocity_solution.at("x1_dot") == P("f(t)*p1/m"));
}

TEST_CASE("Legendre transform of the extended oscillator") {
  const auto& a = analysis();
  const auto& lr = a.extended_legendre;
  CHECK(lr.momenta[0] == P("f(t_tau)^-1*m*x1_tau_dot/t_tau_dot"));
  CHECK(lr.undetermined_velocities == std::vector<std::string>{"t_tau_dot"});
  REQUIRE(lr.primaries.size() == 1);
  CHECK(a.phi == kPhi());
  CHECK(a.h_tau == P("t_tau_dot") * kPhi());
  CHECK(lr.canonical_hamiltonian.is_zero());
  // p_tau = dL/d(t_tau_dot) expressed in phase-space variables.
  CHECK(P("p_tau") - a.phi ==
        P("-f(t_tau)/(2*m)*(p1_tau^2 + p2_tau^2) - m*w(t_tau)^2*f(t_tau)^-1/2*(x1_tau^2 + x2_tau^2)"));
}

TEST_CASE("H_tau vanishes weakly") {
  const auto pts = surface_points({analysis().phi}, extended_chart(), osc(), 16, 99);
  for (const auto& pt : pts) {
    CHECK(std::abs(pt.eval(analysis().phi)) < 1e-12);
    CHECK(std::abs(pt.eval(analysis().h_tau)) < 1e-10);
  }
}

TEST_CASE("regular Lagrangians emit no primaries") {
  std::mt19937_64 rng(5);
  const Context ctx = free_particle();
  for (int i = 0; i < 10; ++i) {
    const Rational k = testing::random_rational(rng) + 7;  // mass-like, positive
    const Expr pot = testing::random_polynomial(rng, {"q"}, 3, 3);
    LagrangianModel lm{{"q"}, {"v"}, {"p"}, Expr(k) / 2 * parse("v^2", ctx) + pot * parse("v", ctx) - pot};
    const auto lr = legendre(lm, ctx);
    CHECK(lr.primaries.empty());
    CHECK(!hessian(lm, ctx).determinant.is_zero());
    // Round trip: dH/dp reproduces the velocity.
    CHECK(substitute(diff(lr.hamiltonian, "p", ctx), {{"p", lr.momenta[0]}}) == parse("v", ctx));
  }
}

TEST_CASE("Legendre errors") {
  const Context ctx = free_particle();
  LagrangianModel bad{{"q"}, {"v"}, {"p"}, parse("v^4", ctx)};
  CHECK_THROWS_AS(legendre(bad, ctx), LegendreError);
  LagrangianModel mismatch{{"q"}, {}, {"p"}, parse("v^2", ctx)};
  CHECK_THROWS_AS(legendre(mismatch, ctx), std::invalid_argument);
}

TEST_CASE("classification with and without gauge") {
  const auto& a = analysis();
  REQUIRE(a.ungauged.constraints.size() == 1);
  CHECK(a.ungauged.constraints[0].label == ConstraintClass::FirstClass);
  REQUIRE(a.gauged.constraints.size() == 2);
  CHECK(a.gauged.constraints[0].label == ConstraintClass::SecondClass);
  CHECK(a.gauged.constraints[1].label == ConstraintClass::SecondClass);
  CHECK(a.gauged.constraints[1].name == "eta_gauge");
  CHECK(classify(ConstraintSet{}, extended_chart(), osc()).empty());
  CHECK(to_string(ConstraintClass::FirstClass) == "first-class");
}

TEST_CASE("secondary search closes in one pass") {
  CHECK(analysis().secondary_passes == 1);
  CHECK(analysis().secondaries == 0);
}

TEST_CASE("secondary search finds a genuine secondary") {
  // v2 is absent: p2 = 0 is primary and {p2, H} = q1 + q2 is secondary.
  Context ctx;
  for (const char* q : {"q1", "q2"}) ctx.declare_symbol(q, SymbolKind::Coordinate);
  for (const char* v : {"v1", "v2"}) ctx.declare_symbol(v, SymbolKind::Velocity);
  for (const char* p : {"p1", "p2"}) ctx.declare_symbol(p, SymbolKind::Momentum);
  ctx.declare_symbol("u", SymbolKind::Parameter);
  ctx.freeze();
  LagrangianModel lm{{"q1", "q2"}, {"v1", "v2"}, {"p1", "p2"}, parse("v1^2/2 - q2^2/2 - q1*q2", ctx)};
  const auto lr = legendre(lm, ctx);
  REQUIRE(lr.primaries.size() == 1);
  CHECK(lr.primaries[0] == parse("p2", ctx));
  const auto cs = from_legendre(lr);
  const Expr ht = total_hamiltonian(cs, parse("u", ctx), lr.canonical_hamiltonian);
  const auto search = find_secondaries(cs, ht, {"u"}, lm.chart(), ctx);
  REQUIRE(search.constraints.constraints.size() == 2);
  CHECK(search.constraints.constraints[1].expr == parse("-q1 - q2", ctx));
  CHECK(search.constraints.constraints[1].origin == ConstraintOrigin::Secondary);
  const auto labelled = classify(search.constraints, lm.chart(), ctx);
  CHECK(labelled.constraints[0].label == ConstraintClass::SecondClass);
  CHECK(labelled.constraints[1].label == ConstraintClass::SecondClass);
}

TEST_CASE("total Hamiltonian and gauge window") {
  const auto& a = analysis();
  CHECK(a.total_h == P("lambda") * kPhi());
  const GaugeSpec unit{0.0, 1.0, 0.0, 1.0};
  CHECK(total_hamiltonian(a.ungauged, unit.lambda_expr()) == kPhi());
  const GaugeSpec ten{0.0, 1.0, 0.0, 10.0};
  CHECK(ten.lambda() == 10.0);
  CHECK(total_hamiltonian(a.ungauged, ten.lambda_expr()) == 10 * kPhi());
  CHECK(ten.time_at(0.5) == 5.0);
  CHECK_THROWS_AS(total_hamiltonian(ConstraintSet{}, Expr(1)), std::invalid_argument);

  const GaugeSpec g{1.0, 3.0, 2.0, 6.0};
  CHECK(g.eta_gauge() == P("t_tau - (2*(tau - 1) + 2)"));
  // Vanishes on the affine orbit t_tau = lambda (tau - tau1) + t1.
  for (double tau : {1.0, 1.7, 3.0}) {
    CHECK(eval(g.eta_gauge(), {{"t_tau", g.time_at(tau)}, {"tau", tau}}, osc()) == doctest::Approx(0.0));
  }
  CHECK_THROWS_AS((GaugeSpec{1.0, 1.0, 0.0, 1.0}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((GaugeSpec{0.0, 1.0, 2.0, 1.0}.validate()), std::invalid_argument);
}

TEST_CASE("surface points satisfy every constraint") {
  const auto& cs = analysis().gauged;
  const auto pts = surface_points(cs.exprs(), extended_chart(), osc(), 16, 3);
  for (const auto& pt : pts) {
    for (const auto& c : cs.exprs()) CHECK(std::abs(pt.eval(c)) < 1e-12);
  }
  CHECK(weakly_nonzero(Expr(1), pts, 1e-10));
  CHECK(!weakly_nonzero(Expr(), pts, 1e-10));
  CHECK(!weakly_nonzero(analysis().phi, pts, 1e-10));
}
