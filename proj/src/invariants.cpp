#include "extps/invariants.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_spline.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>

namespace extps {

namespace {

using Vec = std::vector<double>;

double ermakov_accel(const ErmakovConfig& c, double nu, double t, double rho, double rhodot) {
  const double w = c.omega->value(t);
  const double f = c.f->value(t);
  return -c.eta_fric->value(t) * rhodot - w * w * rho + nu * nu * f * f / (c.m * c.m * rho * rho * rho);
}

void check_rho(double t, double rho, double rhodot, double last_ok) {
  if (!(rho > 0.0) || !std::isfinite(rho) || !std::isfinite(rhodot)) {
    throw IntegrationError("rho left (0, inf) near t = " + std::to_string(t), last_ok);
  }
}

// Runs integrate_ode and turns any failure into an IntegrationError whose
// last valid time is the last accepted step with rho > 0.
Trajectory run_guarded(const OdeRhs& rhs, std::vector<std::string> names, Vec y0, const Vec& grid,
                       const IntegratorPolicy& policy, std::size_t rho_slot) {
  auto last_ok = std::make_shared<double>(grid.front());
  StepHook hook = [last_ok, rho_slot](double t, std::span<const double> y) {
    check_rho(t, y[rho_slot], y[rho_slot + 1], *last_ok);
    *last_ok = t;
  };
  try {
    return integrate_ode(rhs, std::move(names), std::move(y0), grid, policy, hook);
  } catch (const IntegrationError& e) {
    throw IntegrationError(std::string("Ermakov integration aborted: ") + e.what(), *last_ok);
  }
}

class Spline {
 public:
  Spline(const Vec& x, const Vec& y) {
    gsl_set_error_handler_off();
    s_ = gsl_spline_alloc(gsl_interp_cspline, x.size());
    if (gsl_spline_init(s_, x.data(), y.data(), x.size()) != GSL_SUCCESS) {
      gsl_spline_free(s_);
      throw std::invalid_argument("spline needs a strictly increasing grid");
    }
  }
  ~Spline() { gsl_spline_free(s_); }
  Spline(const Spline&) = delete;
  Spline& operator=(const Spline&) = delete;
  double operator()(double x) const { return gsl_spline_eval(s_, x, nullptr); }

 private:
  gsl_spline* s_;
};

}  // namespace

ErmakovConfig ErmakovConfig::resolved() const {
  ErmakovConfig c = *this;
  if (!c.omega) throw std::invalid_argument("Ermakov config needs an omega profile");
  if (!c.eta_fric) c.eta_fric = constant_profile(0.0);
  if (!c.f) c.f = friction_scale_profile(c.eta_fric);
  if (!(c.m > 0.0)) throw std::invalid_argument("mass must be positive");
  if (!(c.rho0 > 0.0)) throw std::invalid_argument("rho0 must be positive");
  if (!(c.t1 > c.t0)) throw std::invalid_argument("empty time span: need t1 > t0");
  if (!c.nu) c.nu = c.m * c.omega->value(c.t0) * c.rho0 * c.rho0;
  if (!(*c.nu >= 0.0) || !std::isfinite(*c.nu)) throw std::invalid_argument("nu must be finite and >= 0");
  return c;
}

double ErmakovConfig::nu_value() const { return resolved().nu.value(); }

ErmakovSolution solve_ermakov(const ErmakovConfig& config, const Vec& grid, const IntegratorPolicy& policy) {
  const ErmakovConfig c = config.resolved();
  const double nu = *c.nu;
  OdeRhs rhs = [c, nu](double t, std::span<const double> y, std::span<double> dy) {
    dy[0] = y[1];
    dy[1] = ermakov_accel(c, nu, t, y[0], y[1]);
  };
  const Trajectory tr = run_guarded(rhs, {"rho", "rhodot"}, {c.rho0, c.rhodot0}, grid, policy, 0);
  return {tr.grid, tr.series[0], tr.series[1]};
}

CoupledRun solve_coupled(const ErmakovConfig& config, const Bindings& init, const Vec& grid,
                         const IntegratorPolicy& policy) {
  const ErmakovConfig c = config.resolved();
  const double nu = *c.nu;
  Vec y0;
  for (const char* v : {"x1", "x2", "p1", "p2"}) {
    auto it = init.find(v);
    if (it == init.end()) throw std::invalid_argument(std::string("initial state has no value for '") + v + "'");
    y0.push_back(it->second);
  }
  y0.push_back(c.rho0);
  y0.push_back(c.rhodot0);
  OdeRhs rhs = [c, nu](double t, std::span<const double> y, std::span<double> dy) {
    const double f = c.f->value(t);
    const double w = c.omega->value(t);
    dy[0] = f * y[2] / c.m;
    dy[1] = f * y[3] / c.m;
    dy[2] = -c.m * w * w * y[0] / f;
    dy[3] = -c.m * w * w * y[1] / f;
    dy[4] = y[5];
    dy[5] = ermakov_accel(c, nu, t, y[4], y[5]);
  };
  Trajectory tr = run_guarded(rhs, {"x1", "x2", "p1", "p2", "rho", "rhodot"}, y0, grid, policy, 4);
  CoupledRun out;
  out.rho = {tr.grid, tr.series[4], tr.series[5]};
  tr.names.resize(4);
  tr.series.resize(4);
  out.oscillator = std::move(tr);
  return out;
}

std::vector<double> lewis_invariant(const Trajectory& tr, const ErmakovSolution& sol, const ErmakovConfig& config) {
  const ErmakovConfig c = config.resolved();
  const double nu = *c.nu;
  const auto& x1 = tr.column("x1");
  const auto& x2 = tr.column("x2");
  const auto& p1 = tr.column("p1");
  const auto& p2 = tr.column("p2");

  Vec rho, rhodot;
  if (tr.grid == sol.grid) {
    rho = sol.rho;
    rhodot = sol.rhodot;
  } else {
    if (sol.grid.size() < 3) throw std::invalid_argument("rho series too short to interpolate");
    Vec g = sol.grid, r = sol.rho, rd = sol.rhodot;
    if (g.front() > g.back()) {
      std::reverse(g.begin(), g.end());
      std::reverse(r.begin(), r.end());
      std::reverse(rd.begin(), rd.end());
    }
    const Spline sr(g, r), srd(g, rd);
    for (double t : tr.grid) {
      if (t < g.front() || t > g.back()) {
        throw std::invalid_argument("trajectory time " + std::to_string(t) + " outside the rho series");
      }
      rho.push_back(sr(t));
      rhodot.push_back(srd(t));
    }
  }

  Vec out(tr.size());
  for (std::size_t i = 0; i < tr.size(); ++i) {
    const double t = tr.grid[i];
    if (!(rho[i] > 0.0)) throw std::domain_error("rho must be positive at t = " + std::to_string(t));
    const double k = c.m / c.f->value(t) * rhodot[i];
    const double a1 = k * x1[i] - rho[i] * p1[i];
    const double a2 = k * x2[i] - rho[i] * p2[i];
    const double r2 = rho[i] * rho[i];
    out[i] = 0.5 * (a1 * a1 + a2 * a2 + nu * nu * (x1[i] * x1[i] + x2[i] * x2[i]) / r2);
  }
  return out;
}

DriftReport invariant_drift_report(const Vec& values, const Vec& grid) {
  if (values.size() != grid.size()) throw std::invalid_argument("drift report: size mismatch");
  DriftReport r;
  if (values.empty()) return r;
  const double i0 = values.front();
  r.relative = i0 != 0.0;
  r.at = grid.front();
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double d = r.relative ? std::abs(values[i] - i0) / std::abs(i0) : std::abs(values[i] - i0);
    if (d > r.max_drift) {
      r.max_drift = d;
      r.at = grid[i];
    }
  }
  return r;
}

std::vector<double> ermakov_residual(const ErmakovSolution& sol, const ErmakovConfig& config) {
  const ErmakovConfig c = config.resolved();
  const double nu = *c.nu;
  const std::size_t n = sol.grid.size();
  if (n < 7) throw std::invalid_argument("residual needs at least seven grid points");
  const double h = (sol.grid.back() - sol.grid.front()) / static_cast<double>(n - 1);
  for (std::size_t i = 1; i < n; ++i) {
    if (std::abs(sol.grid[i] - sol.grid[i - 1] - h) > 1e-9 * std::abs(h)) {
      throw std::invalid_argument("residual needs a uniform grid");
    }
  }
  const auto& v = sol.rhodot;
  Vec out;
  for (std::size_t i = 3; i + 3 < n; ++i) {
    const double acc =
        (v[i + 3] - 9.0 * v[i + 2] + 45.0 * v[i + 1] - 45.0 * v[i - 1] + 9.0 * v[i - 2] - v[i - 3]) / (60.0 * h);
    out.push_back(acc - ermakov_accel(c, nu, sol.grid[i], sol.rho[i], v[i]));
  }
  return out;
}

}  // namespace extps
