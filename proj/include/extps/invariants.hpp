#pragma once

// Ermakov-Pinney auxiliary equation and the classical Lewis-Riesenfeld
// invariant of the f(t)-scaled oscillator.

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "extps/dynamics.hpp"
#include "extps/profile.hpp"

namespace extps {

struct ErmakovConfig {
  std::optional<double> nu;  // default m * omega(t0) * rho0^2
  double m = 1.0;
  ProfilePtr omega;
  ProfilePtr eta_fric;
  ProfilePtr f;  // default exp(-int eta_fric)
  double rho0 = 1.0;
  double rhodot0 = 0.0;
  double t0 = 0.0;
  double t1 = 10.0;

  /// Fills defaults and checks m > 0, rho0 > 0, nu >= 0 and t1 > t0.
  ErmakovConfig resolved() const;
  double nu_value() const;
};

struct ErmakovSolution {
  std::vector<double> grid;
  std::vector<double> rho;
  std::vector<double> rhodot;
};

/// rho'' + eta rho' + omega^2 rho = nu^2 f^2 / (m^2 rho^3). Throws
/// IntegrationError carrying the last valid t when rho collapses.
ErmakovSolution solve_ermakov(const ErmakovConfig& cfg, const std::vector<double>& grid,
                              const IntegratorPolicy& policy = {});

struct CoupledRun {
  Trajectory oscillator;  // x1, x2, p1, p2 over t
  ErmakovSolution rho;
};

/// Oscillator and rho integrated as one system on one grid.
CoupledRun solve_coupled(const ErmakovConfig& cfg, const Bindings& init, const std::vector<double>& grid,
                         const IntegratorPolicy& policy = {});

/// I = 1/2 sum_i [(m f^-1 rho' x_i - rho p_i)^2 + nu^2 x_i^2 / rho^2].
/// When the grids differ, rho and rho' are interpolated with cubic splines.
std::vector<double> lewis_invariant(const Trajectory& tr, const ErmakovSolution& sol, const ErmakovConfig& cfg);

struct DriftReport {
  double max_drift = 0.0;
  double at = 0.0;       // grid value where the drift peaks
  bool relative = true;  // false when I(0) = 0
};

DriftReport invariant_drift_report(const std::vector<double>& values, const std::vector<double>& grid);

/// Residual of the Ermakov equation with rho'' from a sixth-order central
/// difference of the rho' series (uniform grid); interior points only.
std::vector<double> ermakov_residual(const ErmakovSolution& sol, const ErmakovConfig& cfg);

}  // namespace extps
