#pragma once

// The two-dimensional f(t)-scaled oscillator in original and extended phase
// space: symbol registry, Lagrangians, charts and the gauge-fixed analysis.

#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "extps/brackets.hpp"
#include "extps/constraints.hpp"
#include "extps/expr.hpp"
#include "extps/profile.hpp"

namespace extps {

struct CoefficientProfiles {
  ProfilePtr omega;     // w(t)
  ProfilePtr eta_fric;  // friction; f = exp(-int eta_fric) unless `f` is given
  ProfilePtr f;
};

/// Declares x1, x2, p1, p2, their velocities, t, the extended variables
/// (x1_tau, x2_tau, t_tau, p1_tau, p2_tau, p_tau and velocities), the
/// parameters m, lambda, nu, tau and the atoms f (f' = -eta_fric f), w and
/// eta_fric. The returned context is frozen.
Context oscillator_context(const CoefficientProfiles& profiles = {});

/// f(t)^-1 (m/2 (x1_dot^2 + x2_dot^2) - m w(t)^2/2 (x1^2 + x2^2))
LagrangianModel oscillator_lagrangian(const Context& ctx);
TimeExtension oscillator_extension();
LagrangianModel extended_oscillator_lagrangian(const Context& ctx);

Chart original_chart();
Chart extended_chart();

/// Hamiltonian of the original system from the Legendre transform.
Expr oscillator_hamiltonian(const Context& ctx);
/// The primary constraint phi of the extended system.
Expr extended_constraint(const Context& ctx);

/// Physical Hamiltonian rewritten in the extended chart (x_i -> x_i_tau,
/// p_i -> p_i_tau, t -> t_tau).
Expr to_extended(const Expr& original);

struct OscillatorAnalysis {
  HessianResult original_hessian;
  HessianResult extended_hessian;
  LegendreResult original_legendre;
  LegendreResult extended_legendre;
  Expr phi;
  Expr h_tau;  // sum p v - L_tau on the extended side
  ConstraintSet ungauged;
  ConstraintSet gauged;
  ConstraintMatrix cm;
  Expr total_h;  // lambda * phi
  int secondary_passes = 0;
  std::size_t secondaries = 0;
  std::vector<std::pair<std::string, Expr>> extended_eom;  // Poisson, H_T = lambda phi
  /// Nonvanishing Dirac brackets among chart variables, (f, g, {f,g}_DB).
  std::vector<std::tuple<std::string, std::string, Expr>> dirac_brackets;
};

OscillatorAnalysis analyze_oscillator(const Context& ctx, const GaugeSpec& gauge = {},
                                      const ClassifyOptions& opts = {});
/// The same analysis for another Lagrangian in x1, x2, x1_dot, x2_dot, t.
OscillatorAnalysis analyze_extended(const LagrangianModel& original, const Context& ctx, const GaugeSpec& gauge = {},
                                    const ClassifyOptions& opts = {});

}  // namespace extps
