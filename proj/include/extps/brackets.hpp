#pragma once

// Poisson and Dirac brackets over a chart of canonical pairs, the constraint
// matrix and its inverse, and symbolic Hamilton equations.

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "extps/expr.hpp"

namespace extps {

class BracketError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Ordered canonical pairs. Jacobian and Poisson-matrix ordering is all
/// coordinates first, then all momenta.
class Chart {
 public:
  using Pair = std::pair<std::string, std::string>;

  Chart() = default;
  explicit Chart(std::vector<Pair> pairs);

  const std::vector<Pair>& pairs() const { return pairs_; }
  std::size_t degrees_of_freedom() const { return pairs_.size(); }
  std::size_t dimension() const { return 2 * pairs_.size(); }
  std::vector<std::string> coordinates() const;
  std::vector<std::string> momenta() const;
  std::vector<std::string> variables() const;
  bool contains(std::string_view name) const;

  /// J = [[0, I], [-I, 0]] in the coordinates-then-momenta ordering.
  Eigen::MatrixXd poisson_matrix() const;

 private:
  std::vector<Pair> pairs_;
};

using ExprMatrix = std::vector<std::vector<Expr>>;

/// Cofactor expansion; fine for the small matrices that occur here.
Expr determinant(const ExprMatrix& m);
/// Adjugate over determinant. Throws BracketError when the determinant is
/// symbolically zero.
ExprMatrix inverse(const ExprMatrix& m);
ExprMatrix multiply(const ExprMatrix& a, const ExprMatrix& b);

Expr poisson(const Expr& f, const Expr& g, const Chart& chart, const Context& ctx);

struct ConstraintMatrix {
  std::vector<Expr> constraints;
  ExprMatrix delta;    // delta[a][b] = {phi_a, phi_b}
  ExprMatrix inverse;  // C with delta * C = I

  /// Builds delta and C. Throws BracketError, naming the constraints whose
  /// rows vanish (first-class), when delta is singular.
  static ConstraintMatrix build(std::vector<Expr> constraints, const Chart& chart, const Context& ctx);
};

/// {f,g}_PB - sum_ab {f,phi_a} C_ab {phi_b,g}
Expr dirac(const Expr& f, const Expr& g, const ConstraintMatrix& cm, const Chart& chart,
           const Context& ctx);

enum class BracketKind { Poisson, Dirac };

/// Right-hand side {v, H} for every chart variable, in chart order.
/// `cm` is required for the Dirac bracket.
std::vector<std::pair<std::string, Expr>> hamilton_eom(const Expr& h, const Chart& chart,
                                                       const Context& ctx,
                                                       BracketKind kind = BracketKind::Poisson,
                                                       const ConstraintMatrix* cm = nullptr);

}  // namespace extps
