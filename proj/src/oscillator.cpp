#include "extps/oscillator.hpp"

namespace extps {

Context oscillator_context(const CoefficientProfiles& profiles) {
  Context ctx;
  for (const char* q : {"x1", "x2", "x1_tau", "x2_tau", "t_tau"}) ctx.declare_symbol(q, SymbolKind::Coordinate);
  for (const char* p : {"p1", "p2", "p1_tau", "p2_tau", "p_tau"}) ctx.declare_symbol(p, SymbolKind::Momentum);
  for (const char* v : {"x1_dot", "x2_dot", "x1_tau_dot", "x2_tau_dot", "t_tau_dot"}) {
    ctx.declare_symbol(v, SymbolKind::Velocity);
  }
  for (const char* k : {"m", "lambda", "nu"}) ctx.declare_symbol(k, SymbolKind::Parameter);
  ctx.declare_symbol("t", SymbolKind::Time);
  ctx.declare_symbol("tau", SymbolKind::Time);

  CoefficientAtom f{"f", -Expr::atom("eta_fric", "s") * Expr::atom("f", "s"), "s", nullptr};
  ctx.declare_atom(std::move(f));
  ctx.declare_atom({"w", std::nullopt, "s", nullptr});
  ctx.declare_atom({"eta_fric", std::nullopt, "s", nullptr});

  if (profiles.omega) ctx.set_profile("w", profiles.omega);
  if (profiles.eta_fric) ctx.set_profile("eta_fric", profiles.eta_fric);
  if (profiles.f) {
    ctx.set_profile("f", profiles.f);
  } else if (profiles.eta_fric) {
    ctx.set_profile("f", friction_scale_profile(profiles.eta_fric));
  }
  ctx.freeze();
  return ctx;
}

LagrangianModel oscillator_lagrangian(const Context& ctx) {
  LagrangianModel lm;
  lm.coordinates = {"x1", "x2"};
  lm.velocities = {"x1_dot", "x2_dot"};
  lm.momenta = {"p1", "p2"};
  lm.lagrangian = parse("f(t)^-1*(m/2*(x1_dot^2 + x2_dot^2) - m*w(t)^2/2*(x1^2 + x2^2))", ctx);
  return lm;
}

TimeExtension oscillator_extension() {
  return {{"x1_tau", "x2_tau"}, {"x1_tau_dot", "x2_tau_dot"}, {"p1_tau", "p2_tau"},
          "t", "t_tau", "t_tau_dot", "p_tau"};
}

LagrangianModel extended_oscillator_lagrangian(const Context& ctx) {
  return extend_time(oscillator_lagrangian(ctx), oscillator_extension());
}

Chart original_chart() { return Chart({{"x1", "p1"}, {"x2", "p2"}}); }

Chart extended_chart() { return Chart({{"x1_tau", "p1_tau"}, {"x2_tau", "p2_tau"}, {"t_tau", "p_tau"}}); }

Expr oscillator_hamiltonian(const Context& ctx) { return legendre(oscillator_lagrangian(ctx), ctx).hamiltonian; }

Expr extended_constraint(const Context& ctx) {
  const auto lr = legendre(extended_oscillator_lagrangian(ctx), ctx);
  if (lr.primaries.size() != 1) throw LegendreError("extended oscillator: expected exactly one primary constraint");
  return lr.primaries.front();
}

Expr to_extended(const Expr& original) {
  return substitute(original, {{"x1", Expr::symbol("x1_tau")},
                               {"x2", Expr::symbol("x2_tau")},
                               {"p1", Expr::symbol("p1_tau")},
                               {"p2", Expr::symbol("p2_tau")},
                               {"t", Expr::symbol("t_tau")}});
}

OscillatorAnalysis analyze_oscillator(const Context& ctx, const GaugeSpec& gauge, const ClassifyOptions& opts) {
  return analyze_extended(oscillator_lagrangian(ctx), ctx, gauge, opts);
}

OscillatorAnalysis analyze_extended(const LagrangianModel& original, const Context& ctx, const GaugeSpec& gauge,
                                    const ClassifyOptions& opts) {
  OscillatorAnalysis a;
  const auto extended = extend_time(original, oscillator_extension());
  const Chart chart = extended_chart();

  a.original_hessian = hessian(original, ctx);
  a.extended_hessian = hessian(extended, ctx);
  a.original_legendre = legendre(original, ctx);
  a.extended_legendre = legendre(extended, ctx);
  if (a.extended_legendre.primaries.size() != 1) {
    throw LegendreError("extended system: expected exactly one primary constraint");
  }
  a.phi = a.extended_legendre.primaries.front();
  a.h_tau = a.extended_legendre.hamiltonian;

  a.ungauged = classify(from_legendre(a.extended_legendre), chart, ctx, opts);
  const Expr lambda = Expr::symbol("lambda");
  a.total_h = total_hamiltonian(a.ungauged, lambda, a.extended_legendre.canonical_hamiltonian);
  const auto search = find_secondaries(a.ungauged, a.total_h, {"lambda"}, chart, ctx, opts);
  a.secondary_passes = search.passes;
  a.secondaries = search.constraints.constraints.size() - a.ungauged.constraints.size();

  a.gauged = classify(with_gauge(a.ungauged, gauge), chart, ctx, opts);
  a.cm = ConstraintMatrix::build(a.gauged.exprs(), chart, ctx);
  a.extended_eom = hamilton_eom(a.total_h, chart, ctx);

  const auto vars = chart.variables();
  for (std::size_t i = 0; i < vars.size(); ++i) {
    for (std::size_t j = i + 1; j < vars.size(); ++j) {
      Expr b = dirac(Expr::symbol(vars[i]), Expr::symbol(vars[j]), a.cm, chart, ctx);
      if (!b.is_zero()) a.dirac_brackets.emplace_back(vars[i], vars[j], std::move(b));
    }
  }
  return a;
}

}  // namespace extps
