#pragma once

// Extended-phase-space canonical transformations of the separable form
//   x_i_tau = A_i(Q_i, T), t_tau = B(T), p_i_tau = C_i P_i + D_i, p_tau = F
// completed from the generators A_i, B, D_i, and the symplectic checks on them.

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "extps/expr.hpp"

namespace extps {

/// Declares Q1, Q2, T (coordinates) and P1, P2, P_T (momenta).
Context transform_context();

/// New-chart point in the order (Q1, Q2, T, P1, P2, P_T).
using PhasePoint = std::array<double, 6>;
using Matrix6 = Eigen::Matrix<double, 6, 6>;

struct TransformSpec {
  Expr a1, a2, b, d1, d2;
  std::optional<Expr> g;  // optional function of T added to F

  /// Parses each generator; every variable must be among Q1, Q2, T, with
  /// A1, D1 free of Q2 and A2, D2 free of Q1.
  static TransformSpec parse(const std::string& a1, const std::string& a2, const std::string& b,
                             const std::string& d1, const std::string& d2, const Context& ctx,
                             const std::optional<std::string>& g = std::nullopt);
  void validate() const;
};

class TransformError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Q-integral int_{q_base}^{Q_i} (D_i_dot A_i' - A_i_dot D_i') dq.
struct QIntegral {
  std::string var;  // Q1 or Q2
  Expr integrand;
  std::optional<Expr> antiderivative;  // set when the integrand is polynomial in var
};

struct Transform {
  TransformSpec spec;
  Expr c1, c2;
  /// x1_tau, x2_tau, t_tau, p1_tau, p2_tau and the closed-form part of p_tau.
  std::array<Expr, 6> maps;
  std::array<QIntegral, 2> integrals;
  double q_base = 0.0;

  // Filled by complete() and with_c1(): symbolic partials of `maps` and the
  // T-derivatives of the integrands and of B.
  std::array<std::array<Expr, 6>, 6> partials;
  std::array<Expr, 2> integrand_dt;
  Expr b_dot, b_ddot;

  bool symbolic() const;
  /// Old-chart values (x1_tau, x2_tau, t_tau, p1_tau, p2_tau, p_tau).
  PhasePoint apply(const PhasePoint& z, const Context& ctx) const;
};

/// C_i = 1/A_i', t_tau = B and F from the general solution (symmetric form of
/// the second Q-integral).
Transform complete(const TransformSpec& spec, const Context& ctx);

/// Recomputes the cached partials after `maps` or `integrals` were edited.
void refresh(Transform& tr, const Context& ctx);

/// The same maps with C1 replaced (p1_tau = c1 P1 + D1); F is left unchanged.
Transform with_c1(const Transform& tr, const Expr& c1, const Context& ctx);

/// Rows (x1_tau, x2_tau, t_tau, p1_tau, p2_tau, p_tau), columns
/// (Q1, Q2, T, P1, P2, P_T); symbolic partials evaluated at z, with the
/// numeric Q-integrals differentiated under the integral sign.
Matrix6 jacobian(const Transform& tr, const PhasePoint& z, const Context& ctx);

/// Central differences of `apply`, for cross-checking `jacobian`.
Matrix6 jacobian_fd(const Transform& tr, const PhasePoint& z, const Context& ctx, double h = 1e-5);

const Matrix6& symplectic_j();

/// max |M^T J M - J| entrywise.
double symplectic_defect(const Matrix6& m);
double symplectic_defect(const Transform& tr, const std::vector<PhasePoint>& points, const Context& ctx);

/// Residuals of the seven conditions at z, in order: the Q1 and Q2 equations,
/// the P1 and P2 equations, B_dot dF/dP_T = 1, C1 A1' = 1, C2 A2' = 1.
std::array<double, 7> ode_residuals(const Transform& tr, const PhasePoint& z, const Context& ctx);

/// Jacobian of outer(inner(z)) by the chain rule.
Matrix6 composite_jacobian(const Transform& outer, const Transform& inner, const PhasePoint& z, const Context& ctx);

}  // namespace extps
