#pragma once

// Numerical integration of symbolic Hamilton equations: the original
// time-dependent system in t and the gauge-fixed extended system in tau.

#include <functional>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "extps/constraints.hpp"
#include "extps/expr.hpp"

namespace extps {

enum class Method { RK4, RK45 };

struct IntegratorPolicy {
  Method method = Method::RK45;
  double abs_tol = 1e-10;
  double rel_tol = 1e-10;
  /// Largest step; for RK4 every step is at most this and lands on the grid.
  double max_step = 0.05;

  void validate() const;
  std::string name() const;
};

class IntegrationError : public std::runtime_error {
 public:
  IntegrationError(const std::string& what, double last_valid);
  double last_valid() const { return last_valid_; }

 private:
  double last_valid_;
};

/// Raised when a state leaves the constraint surface.
class ConstraintViolation : public IntegrationError {
 public:
  using IntegrationError::IntegrationError;
};

struct Trajectory {
  std::string parameter = "t";
  std::vector<double> grid;
  std::vector<std::string> names;
  std::vector<std::vector<double>> series;  // series[k][i]: variable names[k] at grid[i]

  std::string integrator;
  double abs_tol = 0.0;
  double rel_tol = 0.0;
  double max_step = 0.0;
  long steps = 0;
  long rejected = 0;
  double max_local_error = 0.0;  // largest accepted error estimate (absolute)

  std::size_t size() const { return grid.size(); }
  std::size_t index_of(const std::string& name) const;
  const std::vector<double>& column(const std::string& name) const;
  /// Variables and the parameter at grid point i.
  Bindings row(std::size_t i) const;
};

/// Header `parameter,var1,...` followed by rows with 17 significant digits.
void write_csv(std::ostream& os, const Trajectory& tr);
void write_csv(std::ostream& os, const std::string& parameter, const std::vector<double>& grid,
               const std::vector<std::pair<std::string, std::vector<double>>>& columns);

using OdeRhs = std::function<void(double, std::span<const double>, std::span<double>)>;
/// Called after every accepted step with the new state; may throw.
using StepHook = std::function<void(double, std::span<const double>)>;

/// Integrates y' = rhs(s, y) through a strictly monotone grid; grid[0] is
/// the initial parameter value.
Trajectory integrate_ode(const OdeRhs& rhs, std::vector<std::string> names, std::vector<double> y0,
                         const std::vector<double>& grid, const IntegratorPolicy& policy,
                         const StepHook& hook = {});

/// Right-hand sides compiled over the slot layout (state variables, parameter).
/// Every other symbol must be bound in `constants`.
OdeRhs compile_eom(const std::vector<std::pair<std::string, Expr>>& eom, const std::string& parameter,
                   const Context& ctx, const Bindings& constants = {});

Trajectory integrate(const std::vector<std::pair<std::string, Expr>>& eom, const Bindings& init,
                     const std::string& parameter, const std::vector<double>& grid,
                     const IntegratorPolicy& policy, const Context& ctx, const Bindings& constants = {});

std::vector<double> uniform_grid(double a, double b, std::size_t intervals);

struct ExtendedRunOptions {
  double surface_tol = 1e-8;
  double initial_tol = 1e-10;
};

/// Gauge-fixed flow of H_T = lambda phi on the tau grid (default: 1000
/// intervals over [tau1, tau2]). Requires the initial state on phi = 0 and
/// eta_gauge = 0; aborts when |phi| exceeds 100 * surface_tol.
Trajectory integrate_extended(const GaugeSpec& gauge, const Bindings& init, const IntegratorPolicy& policy,
                              const Context& ctx, const Bindings& constants,
                              std::vector<double> tau_grid = {}, const ExtendedRunOptions& opts = {});

/// x_i_tau = x_i, p_i_tau = p_i, t_tau = t1, p_tau = -H(state, t1).
Bindings extended_initial_state(const Bindings& original, double t1, const Context& ctx,
                                const Bindings& constants);

/// |c| per grid point for each constraint; the trajectory parameter is
/// bound under its own name (e.g. tau for eta_gauge).
std::vector<std::pair<std::string, std::vector<double>>> constraint_drift(const Trajectory& tr,
                                                                          const ConstraintSet& cs,
                                                                          const Context& ctx,
                                                                          const Bindings& constants = {});

struct EquivalenceReport {
  double max_abs = 0.0;  // sup over grid and x1, x2, p1, p2
  double max_rel = 0.0;  // max_abs / sup |original|
  double max_time_error = 0.0;  // sup |t_tau(tau_i) - t_i|
};

/// Compares an extended run with an original run whose grid is the image
/// of the tau grid under the gauge.
EquivalenceReport gauge_equivalence(const Trajectory& original, const Trajectory& extended);

}  // namespace extps
