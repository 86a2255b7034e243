#pragma once

// Scenario and transform-spec documents (JSON) for the extps command line.

#include <optional>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "extps/canonical.hpp"
#include "extps/dynamics.hpp"
#include "extps/profile.hpp"

namespace extps::cli {

/// Message already formatted as `path:line: what`.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Checks {
  double equivalence = 1e-6;
  double constraint_drift = 1e-8;
  double hamiltonian = 1e-7;
  double invariant_drift = 1e-6;
};

struct Scenario {
  std::string path;
  std::string name;
  std::string model = "extended";  // original | extended
  std::optional<std::string> lagrangian;
  double m = 1.0;
  std::optional<double> nu;
  ProfilePtr omega, eta_fric, f;
  GaugeSpec gauge{0.0, 1.0, 0.0, 10.0};
  Bindings initial{{"x1", 1.0}, {"x2", 0.0}, {"p1", 0.0}, {"p2", 0.0}};
  IntegratorPolicy policy;
  std::size_t intervals = 1000;
  double rho0 = 1.0;
  double rhodot0 = 0.0;
  Checks checks;
};

Scenario load_scenario(const std::string& path);

struct TransformDocument {
  std::string path;
  std::string name;
  TransformSpec spec;
  std::optional<Expr> c1;  // replaces 1/A1' when given
  double lo = -1.0;
  double hi = 1.0;
};

TransformDocument load_transform(const std::string& path, const Context& ctx);

}  // namespace extps::cli
