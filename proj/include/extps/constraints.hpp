#pragma once

// Lagrangian-level constraint analysis: Hessian, Legendre transform with
// primary-constraint extraction, first/second-class labelling, secondary
// constraint search, total Hamiltonian and gauge fixing.

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "extps/brackets.hpp"
#include "extps/expr.hpp"

namespace extps {

class LegendreError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LagrangianModel {
  std::vector<std::string> coordinates;
  std::vector<std::string> velocities;  // velocities[i] belongs to coordinates[i]
  std::vector<std::string> momenta;     // conjugate momentum names
  Expr lagrangian;

  /// Throws std::invalid_argument on mismatched sizes, repeated names or
  /// undeclared symbols.
  void validate(const Context& ctx) const;
  Chart chart() const;
};

/// Reparametrised Lagrangian L(x, xdot/tdot, t) * tdot in new variable names:
/// time becomes a coordinate with its own velocity.
struct TimeExtension {
  std::vector<std::string> coordinates;  // replacement names for the old coordinates
  std::vector<std::string> velocities;
  std::vector<std::string> momenta;
  std::string time;           // old time symbol, e.g. "t"
  std::string time_coordinate;  // e.g. "t_tau"
  std::string time_velocity;
  std::string time_momentum;
};
LagrangianModel extend_time(const LagrangianModel& lm, const TimeExtension& ext);

struct HessianResult {
  ExprMatrix matrix;
  Expr determinant;
};

HessianResult hessian(const LagrangianModel& lm, const Context& ctx);

struct LegendreResult {
  std::vector<Expr> momenta;  // dL/dv_i in configuration variables and velocities
  std::map<std::string, Expr> velocity_solution;  // solvable velocities in phase-space variables
  std::vector<std::string> undetermined_velocities;
  Expr hamiltonian;            // sum p v - L; may still contain undetermined velocities
  Expr canonical_hamiltonian;  // hamiltonian minus sum of v_u * phi_u
  std::vector<Expr> primaries;  // phi_u = p_u - (dL/dv_u after substitution)
};

LegendreResult legendre(const LagrangianModel& lm, const Context& ctx);

// ---------------------------------------------------------------------------
// Generic-point sampling

/// Values for every symbol and atom application, drawn at random. Atom
/// applications are treated as independent quantities keyed by name and
/// derivative order, which is what nonzero-testing of a bracket needs.
class GenericPoint {
 public:
  explicit GenericPoint(std::uint64_t seed, double lo = 0.5, double hi = 1.5);
  /// Values are drawn on first use, so the point covers any expression.
  double eval(const Expr& e) const;
  double& operator[](const std::string& symbol);

 private:
  double draw() const;
  double leaf(const BaseNode& b) const;
  mutable std::mt19937_64 rng_;
  mutable std::map<std::string, double> symbols_;
  mutable std::map<std::pair<std::string, int>, double> atoms_;
  double lo_;
  double hi_;
};

/// Generic points projected onto {c = 0 for all c}: each constraint is solved
/// for a chart variable in which it is linear.
std::vector<GenericPoint> surface_points(const std::vector<Expr>& constraints, const Chart& chart,
                                         const Context& ctx, std::size_t count, std::uint64_t seed);

/// Numeric rank from singular values, threshold rel_tol * sigma_max.
int numeric_rank(const ExprMatrix& m, const GenericPoint& at, double rel_tol = 1e-10);

// ---------------------------------------------------------------------------
// Constraint sets

enum class ConstraintClass { Unclassified, FirstClass, SecondClass };
enum class ConstraintOrigin { Primary, Secondary, Gauge };

struct Constraint {
  std::string name;
  Expr expr;
  ConstraintOrigin origin = ConstraintOrigin::Primary;
  ConstraintClass label = ConstraintClass::Unclassified;
};

/// Affine gauge t_tau = lambda (tau - tau1) + t1 over the window
/// tau in [tau1, tau2] -> t in [t1, t2].
struct GaugeSpec {
  double tau1 = 0.0;
  double tau2 = 1.0;
  double t1 = 0.0;
  double t2 = 1.0;

  void validate() const;
  double lambda() const;
  Expr lambda_expr() const;
  double time_at(double tau) const;
  /// t_tau - [(t2 - t1)(tau - tau1)/(tau2 - tau1) + t1], exact rationals.
  Expr eta_gauge(const std::string& time_coordinate = "t_tau", const std::string& tau = "tau") const;
};

struct ConstraintSet {
  std::vector<Constraint> constraints;
  std::optional<GaugeSpec> gauge;

  std::vector<Expr> exprs() const;
  std::vector<Expr> primaries() const;
  bool empty() const { return constraints.empty(); }
};

ConstraintSet from_legendre(const LegendreResult& lr, const std::vector<std::string>& names = {});
ConstraintSet with_gauge(ConstraintSet cs, const GaugeSpec& gauge,
                         const std::string& time_coordinate = "t_tau");

struct ClassifyOptions {
  std::size_t points = 16;
  double threshold = 1e-10;
  std::uint64_t seed = 0x5eed;
};

/// Weakly nonzero: symbolically nonzero and above threshold at one of the
/// sampled surface points.
bool weakly_nonzero(const Expr& e, const std::vector<GenericPoint>& surface, double threshold);

ConstraintSet classify(ConstraintSet cs, const Chart& chart, const Context& ctx,
                       const ClassifyOptions& opts = {});

/// lambda * phi summed over primaries (one multiplier per primary), plus the
/// canonical Hamiltonian.
Expr total_hamiltonian(const ConstraintSet& cs, const std::vector<Expr>& multipliers,
                       const Expr& canonical_h = Expr());
Expr total_hamiltonian(const ConstraintSet& cs, const Expr& multiplier, const Expr& canonical_h = Expr());

struct SecondarySearch {
  ConstraintSet constraints;
  int passes = 0;
};

/// Consistency loop {phi, H_T} ~ 0. Brackets that involve a multiplier fix
/// the multiplier rather than adding a constraint.
SecondarySearch find_secondaries(ConstraintSet cs, const Expr& total_h,
                                 const std::vector<std::string>& multipliers, const Chart& chart,
                                 const Context& ctx, const ClassifyOptions& opts = {},
                                 int max_passes = 8);

std::string to_string(ConstraintClass c);

}  // namespace extps
