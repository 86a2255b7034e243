#pragma once

// Numeric profiles backing coefficient atoms: value and derivatives of a
// scalar function of time.

#include <memory>
#include <string>
#include <vector>

#include "extps/expr.hpp"

namespace extps {

class Profile {
 public:
  virtual ~Profile() = default;
  /// d^order/dt^order of the profile at t. Throws EvalError when the order is
  /// not supported or t is outside the profile's domain.
  virtual double value(double t, int order = 0) const = 0;
  virtual std::string describe() const = 0;
};

using ProfilePtr = std::shared_ptr<const Profile>;

ProfilePtr constant_profile(double value);

/// e^{-rate t}: the Caldirola-Kanai scale factor for constant friction.
ProfilePtr exponential_profile(double rate);

/// Natural cubic spline through (times, values); orders 0..2.
ProfilePtr tabulated_profile(std::vector<double> times, std::vector<double> values);

/// Rational expression in a single variable, derivatives taken symbolically.
ProfilePtr expression_profile(const Expr& e, const std::string& var);
ProfilePtr expression_profile(const std::string& text, const std::string& var = "t");

/// f(t) = exp(-int_0^t eta), orders 0..3. Constant friction short-circuits to
/// the closed form; otherwise the integral is computed by adaptive quadrature.
ProfilePtr friction_scale_profile(ProfilePtr friction);

}  // namespace extps
