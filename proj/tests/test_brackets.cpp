#include <doctest.h>

#include <random>

#include "extps/brackets.hpp"
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
  static const OscillatorAnalysis a = analyze_oscillator(osc(), GaugeSpec{0.0, 1.0, 0.0, 10.0});
  return a;
}

Expr phi() { return analysis().phi; }

Expr eta_gauge() { return GaugeSpec{0.0, 1.0, 0.0, 10.0}.eta_gauge(); }

std::vector<Expr> extended_leaves() {
  std::vector<Expr> leaves;
  for (const auto& v : extended_chart().variables()) leaves.push_back(Expr::symbol(v));
  leaves.push_back(P("f(t_tau)"));
  leaves.push_back(P("w(t_tau)"));
  leaves.push_back(P("m"));
  return leaves;
}

/// Random polynomial in the extended chart with coefficients from f, w, m.
Expr random_phase_function(std::mt19937_64& rng) {
  const auto vars = extended_chart().variables();
  Expr g = testing::random_polynomial(rng, vars, 3, 3);
  std::uniform_int_distribution<int> pick(0, 3);
  const Expr coeffs[] = {Expr(1), P("f(t_tau)"), P("w(t_tau)^2*f(t_tau)^-1"), P("m")};
  return g * coeffs[pick(rng)] + testing::random_polynomial(rng, vars, 2, 2);
}

}  // namespace

TEST_CASE("canonical Poisson brackets of the original chart") {
  const Chart c = original_chart();
  CHECK(poisson(P("x1"), P("p1"), c, osc()) == Expr(1));
  CHECK(poisson(P("x2"), P("p2"), c, osc()) == Expr(1));
  CHECK(poisson(P("x1"), P("p2"), c, osc()).is_zero());
  CHECK(poisson(P("x2"), P("p1"), c, osc()).is_zero());
  CHECK(poisson(P("p1"), P("x1"), c, osc()) == Expr(-1));
}

TEST_CASE("extended chart Poisson matrix is the symplectic J") {
  const Eigen::MatrixXd j = extended_chart().poisson_matrix();
  Eigen::MatrixXd expected = Eigen::MatrixXd::Zero(6, 6);
  for (int i = 0; i < 3; ++i) {
    expected(i, i + 3) = 1.0;
    expected(i + 3, i) = -1.0;
  }
  CHECK(j == expected);
  CHECK(extended_chart().variables() ==
        std::vector<std::string>{"x1_tau", "x2_tau", "t_tau", "p1_tau", "p2_tau", "p_tau"});
}

TEST_CASE("chart and bracket errors") {
  CHECK_THROWS_AS(Chart({{"x1", "p1"}, {"x1", "p2"}}), std::invalid_argument);
  CHECK_THROWS_AS(poisson(P("x1"), P("p1_tau"), extended_chart(), osc()), BracketError);
  // Parameters and atoms are not canonical variables and are allowed.
  CHECK(poisson(P("m*f(t_tau)"), P("lambda"), extended_chart(), osc()).is_zero());
}

TEST_CASE("constraint matrix and its inverse") {
  const auto& cm = analysis().cm;
  REQUIRE(cm.delta.size() == 2);
  CHECK(cm.delta[0][0].is_zero());
  CHECK(cm.delta[0][1] == Expr(-1));
  CHECK(cm.delta[1][0] == Expr(1));
  CHECK(cm.delta[1][1].is_zero());
  CHECK(cm.inverse[0][0].is_zero());
  CHECK(cm.inverse[0][1] == Expr(1));
  CHECK(cm.inverse[1][0] == Expr(-1));
  CHECK(cm.inverse[1][1].is_zero());
  const ExprMatrix id = multiply(cm.delta, cm.inverse);
  CHECK(id[0][0] == Expr(1));
  CHECK(id[0][1].is_zero());
  CHECK(id[1][0].is_zero());
  CHECK(id[1][1] == Expr(1));
  CHECK(poisson(phi(), eta_gauge(), extended_chart(), osc()) == Expr(-1));
}

TEST_CASE("singular constraint matrix is rejected with a report") {
  try {
    ConstraintMatrix::build({phi()}, extended_chart(), osc());
    FAIL("expected BracketError");
  } catch (const BracketError& e) {
    const std::string what = e.what();
    CHECK(what.find("first-class") != std::string::npos);
    CHECK(what.find("p_tau") != std::string::npos);
  }
}

TEST_CASE("the six nonvanishing Dirac brackets") {
  const auto& a = analysis();
  const Chart c = extended_chart();
  auto db = [&](const char* f, const char* g) { return dirac(P(f), P(g), a.cm, c, osc()); };
  CHECK(db("x1_tau", "p1_tau") == Expr(1));
  CHECK(db("x2_tau", "p2_tau") == Expr(1));
  CHECK(db("x1_tau", "p_tau") == P("-f(t_tau)/m*p1_tau"));
  CHECK(db("x2_tau", "p_tau") == P("-f(t_tau)/m*p2_tau"));
  CHECK(db("p1_tau", "p_tau") == P("m*w(t_tau)^2*f(t_tau)^-1*x1_tau"));
  CHECK(db("p2_tau", "p_tau") == P("m*w(t_tau)^2*f(t_tau)^-1*x2_tau"));
  CHECK(db("t_tau", "p_tau").is_zero());
  CHECK(poisson(P("t_tau"), P("p_tau"), c, osc()) == Expr(1));
  CHECK(poisson(P("p1_tau"), P("p_tau"), c, osc()).is_zero());
  CHECK(a.dirac_brackets.size() == 6);
}

TEST_CASE("general Dirac formula reduces to the two-constraint form") {
  std::mt19937_64 rng(11);
  const Chart c = extended_chart();
  const auto& cm = analysis().cm;
  const Expr ph = phi();
  const Expr et = eta_gauge();
  for (int i = 0; i < 10; ++i) {
    const Expr f = random_phase_function(rng);
    const Expr g = random_phase_function(rng);
    const Expr two = poisson(f, g, c, osc()) - (poisson(f, ph, c, osc()) * poisson(et, g, c, osc()) -
                                                 poisson(f, et, c, osc()) * poisson(ph, g, c, osc()));
    CHECK(dirac(f, g, cm, c, osc()) == two);
  }
}

TEST_CASE("Dirac bracket of a second-class constraint with anything vanishes") {
  std::mt19937_64 rng(2024);
  const Chart c = extended_chart();
  const auto& cm = analysis().cm;
  for (int i = 0; i < 20; ++i) {
    const Expr g = random_phase_function(rng);
    CHECK(dirac(phi(), g, cm, c, osc()).is_zero());
    CHECK(dirac(eta_gauge(), g, cm, c, osc()).is_zero());
    CHECK(dirac(g, phi(), cm, c, osc()).is_zero());
  }
}

TEST_CASE("Hamilton equations for the total Hamiltonian lambda*phi") {
  const auto& eom = analysis().extended_eom;
  std::map<std::string, Expr> rhs(eom.begin(), eom.end());
  CHECK(rhs.at("x1_tau") == P("lambda*f(t_tau)/m*p1_tau"));
  CHECK(rhs.at("x2_tau") == P("lambda*f(t_tau)/m*p2_tau"));
  CHECK(rhs.at("p1_tau") == P("-lambda*m*w(t_tau)^2*f(t_tau)^-1*x1_tau"));
  CHECK(rhs.at("p2_tau") == P("-lambda*m*w(t_tau)^2*f(t_tau)^-1*x2_tau"));
  CHECK(rhs.at("t_tau") == P("lambda"));

  // Printed form with fdot = df/dt_tau and wdot = dw/dt_tau; the bracket
  // gives its negative, which is what keeps p_tau + H conserved.
  const Expr fdot = diff(P("f(t_tau)"), "t_tau", osc());
  const Expr wdot = diff(P("w(t_tau)"), "t_tau", osc());
  CHECK(fdot == P("-eta_fric(t_tau)*f(t_tau)"));
  const Expr f = P("f(t_tau)");
  const Expr w = P("w(t_tau)");
  const Expr printed =
      P("lambda") * (fdot / P("2*m") * P("p1_tau^2 + p2_tau^2") +
                     P("m") * pow(f, -1) * w / 2 * (2 * wdot - w * fdot * pow(f, -1)) * P("x1_tau^2 + x2_tau^2"));
  CHECK(rhs.at("p_tau") == -printed);
  CHECK(rhs.at("p_tau") == -P("lambda") * diff(phi(), "t_tau", osc()));
}

TEST_CASE("Dirac Hamilton equations need a constraint matrix") {
  CHECK_THROWS_AS(hamilton_eom(analysis().total_h, extended_chart(), osc(), BracketKind::Dirac), BracketError);
  const auto eom =
      hamilton_eom(to_extended(analysis().original_legendre.hamiltonian), extended_chart(), osc(),
                   BracketKind::Dirac, &analysis().cm);
  std::map<std::string, Expr> rhs(eom.begin(), eom.end());
  CHECK(rhs.at("x1_tau") == P("f(t_tau)/m*p1_tau"));
  CHECK(rhs.at("t_tau").is_zero());
}

TEST_CASE("Poisson bracket axioms on random triples") {
  std::mt19937_64 rng(77);
  const Chart c = extended_chart();
  const auto leaves = extended_leaves();
  for (int i = 0; i < 50; ++i) {
    const Expr f = testing::random_tree(rng, leaves, 2);
    const Expr g = testing::random_tree(rng, leaves, 2);
    const Expr h = testing::random_tree(rng, leaves, 2);
    const Rational a = testing::random_rational(rng);
    const Rational b = testing::random_rational(rng);
    const Expr fg = poisson(f, g, c, osc());
    CHECK(fg == -poisson(g, f, c, osc()));
    CHECK(poisson(a * f + b * g, h, c, osc()) == a * poisson(f, h, c, osc()) + b * poisson(g, h, c, osc()));
    CHECK(poisson(f * g, h, c, osc()) == f * poisson(g, h, c, osc()) + poisson(f, h, c, osc()) * g);

    const Expr jac = poisson(f, poisson(g, h, c, osc()), c, osc()) + poisson(g, poisson(h, f, c, osc()), c, osc()) +
                     poisson(h, fg, c, osc());
    const GenericPoint pt(1000 + static_cast<std::uint64_t>(i));
    double scale = 1.0;
    for (const auto& term : {poisson(f, poisson(g, h, c, osc()), c, osc()), poisson(h, fg, c, osc())}) {
      scale = std::max(scale, std::abs(pt.eval(term)));
    }
    CHECK(std::abs(pt.eval(jac)) <= 1e-9 * scale);
  }
}

TEST_CASE("symbolic matrix helpers") {
  const ExprMatrix m = {{P("m"), Expr(0), Expr(1)}, {Expr(0), P("m"), Expr(2)}, {Expr(3), Expr(0), Expr(1)}};
  CHECK(determinant(m) == P("m^2 - 3*m"));
  const ExprMatrix id = multiply(m, inverse(m));
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) CHECK(id[i][j] == Expr(i == j ? 1 : 0));
  }
  CHECK_THROWS_AS(inverse({{Expr(1), Expr(2)}, {Expr(2), Expr(4)}}), BracketError);
}
