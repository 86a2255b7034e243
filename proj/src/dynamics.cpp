#include "extps/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "extps/brackets.hpp"
#include "extps/oscillator.hpp"

namespace extps {

void IntegratorPolicy::validate() const {
  if (!(abs_tol > 0.0) || !(rel_tol > 0.0)) throw std::invalid_argument("integrator tolerances must be positive");
  if (!(max_step > 0.0)) throw std::invalid_argument("integrator max_step must be positive");
}

std::string IntegratorPolicy::name() const { return method == Method::RK4 ? "rk4" : "rk45"; }

IntegrationError::IntegrationError(const std::string& what, double last_valid)
    : std::runtime_error(what), last_valid_(last_valid) {}

std::size_t Trajectory::index_of(const std::string& name) const {
  auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw std::out_of_range("trajectory has no variable '" + name + "'");
  return static_cast<std::size_t>(it - names.begin());
}

const std::vector<double>& Trajectory::column(const std::string& name) const { return series[index_of(name)]; }

Bindings Trajectory::row(std::size_t i) const {
  Bindings b;
  for (std::size_t k = 0; k < names.size(); ++k) b[names[k]] = series[k][i];
  b[parameter] = grid[i];
  return b;
}

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void write_csv(std::ostream& os, const std::string& parameter, const std::vector<double>& grid,
               const std::vector<std::pair<std::string, std::vector<double>>>& columns) {
  os << parameter;
  for (const auto& [name, col] : columns) {
    if (col.size() != grid.size()) throw std::invalid_argument("csv column '" + name + "' has the wrong length");
    os << ',' << name;
  }
  os << '\n';
  for (std::size_t i = 0; i < grid.size(); ++i) {
    os << fmt17(grid[i]);
    for (const auto& c : columns) os << ',' << fmt17(c.second[i]);
    os << '\n';
  }
}

void write_csv(std::ostream& os, const Trajectory& tr) {
  std::vector<std::pair<std::string, std::vector<double>>> cols;
  for (std::size_t k = 0; k < tr.names.size(); ++k) cols.emplace_back(tr.names[k], tr.series[k]);
  write_csv(os, tr.parameter, tr.grid, cols);
}

// ---------------------------------------------------------------------------

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;

using Vec = std::vector<double>;

class Stepper {
 public:
  Stepper(const OdeRhs& rhs, std::size_t n) : rhs_(rhs), k_(7, Vec(n)), tmp_(n) {}

  // One RK4 step of size h from (s, y) into out.
  void rk4(double s, const Vec& y, double h, Vec& out) {
    const std::size_t n = y.size();
    rhs_(s, y, k_[0]);
    for (std::size_t i = 0; i < n; ++i) tmp_[i] = y[i] + 0.5 * h * k_[0][i];
    rhs_(s + 0.5 * h, tmp_, k_[1]);
    for (std::size_t i = 0; i < n; ++i) tmp_[i] = y[i] + 0.5 * h * k_[1][i];
    rhs_(s + 0.5 * h, tmp_, k_[2]);
    for (std::size_t i = 0; i < n; ++i) tmp_[i] = y[i] + h * k_[2][i];
    rhs_(s + h, tmp_, k_[3]);
    for (std::size_t i = 0; i < n; ++i) {
      out[i] = y[i] + h / 6.0 * (k_[0][i] + 2.0 * k_[1][i] + 2.0 * k_[2][i] + k_[3][i]);
    }
  }

  // Dormand-Prince step; out gets the 5th-order solution, err the difference
  // to the embedded 4th-order one. k_[0] must hold f(s, y).
  void dp45(double s, const Vec& y, double h, Vec& out, Vec& err) {
    const std::size_t n = y.size();
    auto& k = k_;
    for (std::size_t i = 0; i < n; ++i) tmp_[i] = y[i] + h * a21 * k[0][i];
    rhs_(s + c2 * h, tmp_, k[1]);
    for (std::size_t i = 0; i < n; ++i) tmp_[i] = y[i] + h * (a31 * k[0][i] + a32 * k[1][i]);
    rhs_(s + c3 * h, tmp_, k[2]);
    for (std::size_t i = 0; i < n; ++i) tmp_[i] = y[i] + h * (a41 * k[0][i] + a42 * k[1][i] + a43 * k[2][i]);
    rhs_(s + c4 * h, tmp_, k[3]);
    for (std::size_t i = 0; i < n; ++i) {
      tmp_[i] = y[i] + h * (a51 * k[0][i] + a52 * k[1][i] + a53 * k[2][i] + a54 * k[3][i]);
    }
    rhs_(s + c5 * h, tmp_, k[4]);
    for (std::size_t i = 0; i < n; ++i) {
      tmp_[i] = y[i] + h * (a61 * k[0][i] + a62 * k[1][i] + a63 * k[2][i] + a64 * k[3][i] + a65 * k[4][i]);
    }
    rhs_(s + h, tmp_, k[5]);
    for (std::size_t i = 0; i < n; ++i) {
      out[i] = y[i] + h * (b1 * k[0][i] + b3 * k[2][i] + b4 * k[3][i] + b5 * k[4][i] + b6 * k[5][i]);
    }
    rhs_(s + h, out, k[6]);
    for (std::size_t i = 0; i < n; ++i) {
      err[i] = h * (e1 * k[0][i] + e3 * k[2][i] + e4 * k[3][i] + e5 * k[4][i] + e6 * k[5][i] + e7 * k[6][i]);
    }
  }

  void first_stage(double s, const Vec& y) { rhs_(s, y, k_[0]); }
  void accept_fsal() { std::swap(k_[0], k_[6]); }

 private:
  const OdeRhs& rhs_;
  std::vector<Vec> k_;
  Vec tmp_;
};

void check_finite(double s, const Vec& y, double last_valid) {
  for (double v : y) {
    if (!std::isfinite(v)) {
      throw IntegrationError("non-finite state at parameter " + fmt17(s), last_valid);
    }
  }
}

}  // namespace

Trajectory integrate_ode(const OdeRhs& rhs, std::vector<std::string> names, std::vector<double> y0,
                         const std::vector<double>& grid, const IntegratorPolicy& policy, const StepHook& hook) {
  policy.validate();
  if (names.size() != y0.size()) throw std::invalid_argument("integrate: names and initial state differ in length");
  if (grid.empty()) throw std::invalid_argument("integrate: empty grid");
  const double dir = grid.size() > 1 && grid[1] < grid[0] ? -1.0 : 1.0;
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (!(dir * (grid[i] - grid[i - 1]) > 0.0)) throw std::invalid_argument("integrate: grid is not strictly monotone");
  }

  Trajectory tr;
  tr.names = std::move(names);
  tr.grid = grid;
  tr.integrator = policy.name();
  tr.abs_tol = policy.abs_tol;
  tr.rel_tol = policy.rel_tol;
  tr.max_step = policy.max_step;
  const std::size_t n = y0.size();
  tr.series.assign(n, Vec());
  for (auto& s : tr.series) s.reserve(grid.size());

  Vec y = std::move(y0);
  check_finite(grid[0], y, grid[0]);
  if (hook) hook(grid[0], y);
  for (std::size_t k = 0; k < n; ++k) tr.series[k].push_back(y[k]);

  Stepper st(rhs, n);
  Vec next(n);
  Vec err(n);
  double s = grid[0];

  if (policy.method == Method::RK4) {
    for (std::size_t g = 1; g < grid.size(); ++g) {
      const double span = grid[g] - grid[g - 1];
      const auto sub = static_cast<long>(std::ceil(std::abs(span) / policy.max_step - 1e-9));
      const long count = std::max(1L, sub);
      const double h = span / static_cast<double>(count);
      for (long j = 0; j < count; ++j) {
        const double s_next = j + 1 == count ? grid[g] : grid[g - 1] + static_cast<double>(j + 1) * h;
        st.rk4(s, y, s_next - s, next);
        check_finite(s_next, next, s);
        if (hook) hook(s_next, next);
        y.swap(next);
        s = s_next;
        ++tr.steps;
      }
      for (std::size_t k = 0; k < n; ++k) tr.series[k].push_back(y[k]);
    }
    return tr;
  }

  const double total = std::abs(grid.back() - grid.front());
  double h = std::min(policy.max_step, std::max(total, 1e-12) * 1e-3);
  st.first_stage(s, y);
  for (std::size_t g = 1; g < grid.size(); ++g) {
    const double target = grid[g];
    while (dir * (target - s) > 0.0) {
      const double remaining = std::abs(target - s);
      const bool last = h >= remaining * (1.0 - 1e-12);
      const double step = last ? remaining : h;
      if (step < 1e-14 * std::max(1.0, std::abs(s))) {
        throw IntegrationError("step size underflow at parameter " + fmt17(s), s);
      }
      st.dp45(s, y, dir * step, next, err);
      double norm = 0.0;
      double abs_err = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double sc = policy.abs_tol + policy.rel_tol * std::max(std::abs(y[i]), std::abs(next[i]));
        norm = std::max(norm, std::abs(err[i]) / sc);
        abs_err = std::max(abs_err, std::abs(err[i]));
      }
      if (!std::isfinite(norm)) norm = 1e10;
      const double factor = norm == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(norm, -0.2), 0.2, 5.0);
      if (norm <= 1.0) {
        const double s_next = last ? target : s + dir * step;
        check_finite(s_next, next, s);
        if (hook) hook(s_next, next);
        y.swap(next);
        s = s_next;
        st.accept_fsal();
        ++tr.steps;
        tr.max_local_error = std::max(tr.max_local_error, abs_err);
        h = std::min(policy.max_step, step * factor);
      } else {
        ++tr.rejected;
        h = step * std::max(0.2, factor);
      }
    }
    for (std::size_t k = 0; k < n; ++k) tr.series[k].push_back(y[k]);
  }
  return tr;
}

OdeRhs compile_eom(const std::vector<std::pair<std::string, Expr>>& eom, const std::string& parameter,
                   const Context& ctx, const Bindings& constants) {
  std::vector<std::string> slots;
  for (const auto& [v, rhs] : eom) slots.push_back(v);
  slots.push_back(parameter);
  std::map<std::string, Expr, std::less<>> repl;
  for (const auto& [name, value] : constants) repl.emplace(name, Expr::from_double(value));
  auto compiled = std::make_shared<std::vector<CompiledExpr>>();
  for (const auto& [v, rhs] : eom) {
    const Expr bound = substitute(rhs, repl);
    for (const auto& s : free_symbols(bound)) {
      if (std::find(slots.begin(), slots.end(), s) == slots.end()) {
        throw EvalError("equation for '" + v + "' depends on unbound symbol '" + s + "'");
      }
    }
    compiled->emplace_back(bound, slots, ctx);
  }
  const std::size_t n = eom.size();
  return [compiled, n](double s, std::span<const double> y, std::span<double> dy) {
    thread_local Vec buf;
    buf.assign(y.begin(), y.end());
    buf.push_back(s);
    for (std::size_t i = 0; i < n; ++i) dy[i] = (*compiled)[i](buf);
  };
}

Trajectory integrate(const std::vector<std::pair<std::string, Expr>>& eom, const Bindings& init,
                     const std::string& parameter, const std::vector<double>& grid, const IntegratorPolicy& policy,
                     const Context& ctx, const Bindings& constants) {
  std::vector<std::string> names;
  Vec y0;
  for (const auto& [v, rhs] : eom) {
    auto it = init.find(v);
    if (it == init.end()) throw std::invalid_argument("initial state has no value for '" + v + "'");
    names.push_back(v);
    y0.push_back(it->second);
  }
  Trajectory tr = integrate_ode(compile_eom(eom, parameter, ctx, constants), std::move(names), std::move(y0), grid,
                                policy);
  tr.parameter = parameter;
  return tr;
}

std::vector<double> uniform_grid(double a, double b, std::size_t intervals) {
  if (intervals == 0) throw std::invalid_argument("grid needs at least one interval");
  std::vector<double> g(intervals + 1);
  for (std::size_t i = 0; i <= intervals; ++i) {
    g[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(intervals);
  }
  g.back() = b;
  return g;
}

// ---------------------------------------------------------------------------

Bindings extended_initial_state(const Bindings& original, double t1, const Context& ctx, const Bindings& constants) {
  Bindings point = constants;
  for (const char* v : {"x1", "x2", "p1", "p2"}) {
    auto it = original.find(v);
    if (it == original.end()) throw std::invalid_argument(std::string("initial state has no value for '") + v + "'");
    point[v] = it->second;
  }
  point["t"] = t1;
  const double h = eval(oscillator_hamiltonian(ctx), point, t1, ctx);
  return {{"x1_tau", point["x1"]}, {"x2_tau", point["x2"]}, {"t_tau", t1},
          {"p1_tau", point["p1"]}, {"p2_tau", point["p2"]}, {"p_tau", -h}};
}

Trajectory integrate_extended(const GaugeSpec& gauge, const Bindings& init, const IntegratorPolicy& policy,
                              const Context& ctx, const Bindings& constants, std::vector<double> tau_grid,
                              const ExtendedRunOptions& opts) {
  gauge.validate();
  if (tau_grid.empty()) tau_grid = uniform_grid(gauge.tau1, gauge.tau2, 1000);

  const Chart chart = extended_chart();
  const Expr phi = extended_constraint(ctx);
  const Expr total = gauge.lambda_expr() * phi;
  const auto eom = hamilton_eom(total, chart, ctx);

  Bindings at_start = constants;
  for (const auto& [k, v] : init) at_start[k] = v;
  at_start["tau"] = tau_grid.front();
  const double phi0 = eval(phi, at_start, ctx);
  if (std::abs(phi0) >= opts.initial_tol) {
    throw ConstraintViolation("initial state violates phi = 0 (|phi| = " + fmt17(std::abs(phi0)) + ")",
                              tau_grid.front());
  }
  const double eta0 = eval(gauge.eta_gauge(), at_start, ctx);
  if (std::abs(eta0) >= opts.initial_tol) {
    throw ConstraintViolation("initial state violates eta_gauge = 0 (|eta_gauge| = " + fmt17(std::abs(eta0)) + ")",
                              tau_grid.front());
  }

  std::vector<std::string> slots;
  for (const auto& [v, rhs] : eom) slots.push_back(v);
  std::map<std::string, Expr, std::less<>> repl;
  for (const auto& [name, value] : constants) repl.emplace(name, Expr::from_double(value));
  const CompiledExpr phi_c(substitute(phi, repl), slots, ctx);
  const double abort_at = 100.0 * opts.surface_tol;
  double last_ok = tau_grid.front();
  StepHook hook = [&](double s, std::span<const double> y) {
    const double v = std::abs(phi_c(y));
    if (v > abort_at) {
      throw ConstraintViolation("constraint phi drifted to " + fmt17(v) + " at tau = " + fmt17(s), last_ok);
    }
    last_ok = s;
  };

  std::vector<std::string> names;
  Vec y0;
  for (const auto& v : slots) {
    auto it = init.find(v);
    if (it == init.end()) throw std::invalid_argument("extended initial state has no value for '" + v + "'");
    names.push_back(v);
    y0.push_back(it->second);
  }
  Trajectory tr =
      integrate_ode(compile_eom(eom, "tau", ctx, constants), std::move(names), std::move(y0), tau_grid, policy, hook);
  tr.parameter = "tau";
  return tr;
}

std::vector<std::pair<std::string, std::vector<double>>> constraint_drift(const Trajectory& tr, const ConstraintSet& cs,
                                                                          const Context& ctx,
                                                                          const Bindings& constants) {
  std::vector<std::pair<std::string, std::vector<double>>> out;
  if (cs.empty()) return out;
  std::vector<std::string> slots = tr.names;
  slots.push_back(tr.parameter);
  std::map<std::string, Expr, std::less<>> repl;
  for (const auto& [name, value] : constants) repl.emplace(name, Expr::from_double(value));
  for (const auto& c : cs.constraints) {
    const CompiledExpr ce(substitute(c.expr, repl), slots, ctx);
    std::vector<double> series(tr.size());
    std::vector<double> buf(slots.size());
    for (std::size_t i = 0; i < tr.size(); ++i) {
      for (std::size_t k = 0; k < tr.names.size(); ++k) buf[k] = tr.series[k][i];
      buf.back() = tr.grid[i];
      series[i] = std::abs(ce(buf));
    }
    out.emplace_back(c.name, std::move(series));
  }
  return out;
}

EquivalenceReport gauge_equivalence(const Trajectory& original, const Trajectory& extended) {
  if (original.size() != extended.size()) throw std::invalid_argument("trajectories have different lengths");
  EquivalenceReport r;
  double scale = 0.0;
  const std::pair<const char*, const char*> pairs[] = {
      {"x1", "x1_tau"}, {"x2", "x2_tau"}, {"p1", "p1_tau"}, {"p2", "p2_tau"}};
  const auto& t_tau = extended.column("t_tau");
  for (std::size_t i = 0; i < original.size(); ++i) {
    r.max_time_error = std::max(r.max_time_error, std::abs(t_tau[i] - original.grid[i]));
    for (const auto& [o, e] : pairs) {
      const double a = original.column(o)[i];
      const double b = extended.column(e)[i];
      r.max_abs = std::max(r.max_abs, std::abs(a - b));
      scale = std::max(scale, std::abs(a));
    }
  }
  r.max_rel = scale > 0.0 ? r.max_abs / scale : r.max_abs;
  return r;
}

}  // namespace extps
