#include "commands.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "extps/canonical.hpp"
#include "extps/dynamics.hpp"
#include "extps/invariants.hpp"
#include "extps/oscillator.hpp"
#include "scenario.hpp"

namespace extps::cli {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string render_matrix(const ExprMatrix& m) {
  std::string s = "[";
  for (std::size_t i = 0; i < m.size(); ++i) {
    s += i ? ", [" : "[";
    for (std::size_t j = 0; j < m[i].size(); ++j) s += (j ? ", " : "") + render(m[i][j]);
    s += "]";
  }
  return s + "]";
}

json matrix_json(const ExprMatrix& m) {
  json rows = json::array();
  for (const auto& row : m) {
    json r = json::array();
    for (const auto& e : row) r.push_back(render(e));
    rows.push_back(r);
  }
  return rows;
}

Context scenario_context(const Scenario& s) { return oscillator_context({s.omega, s.eta_fric, s.f}); }

LagrangianModel scenario_lagrangian(const Scenario& s, const Context& ctx) {
  LagrangianModel lm = oscillator_lagrangian(ctx);
  if (s.lagrangian) lm.lagrangian = parse(*s.lagrangian, ctx);
  return lm;
}

IntegratorPolicy scenario_policy(const Scenario& s, const Options& opts) {
  IntegratorPolicy p = s.policy;
  if (opts.tol) p.abs_tol = p.rel_tol = *opts.tol;
  p.validate();
  return p;
}

fs::path prepare_out(const Options& opts) {
  fs::path dir(opts.out_dir);
  fs::create_directories(dir);
  return dir;
}

void write_summary(const fs::path& dir, const json& summary) {
  std::ofstream(dir / "summary.json") << summary.dump(2) << "\n";
}

json policy_json(const Trajectory& tr) {
  return {{"method", tr.integrator}, {"abs_tol", tr.abs_tol}, {"rel_tol", tr.rel_tol}, {"max_step", tr.max_step},
          {"steps", tr.steps},       {"rejected", tr.rejected}, {"max_local_error", tr.max_local_error}};
}

std::string policy_line(const Trajectory& tr) {
  return "integrator " + tr.integrator + ": abs_tol=" + num(tr.abs_tol) + " rel_tol=" + num(tr.rel_tol) +
         " steps=" + std::to_string(tr.steps) + " rejected=" + std::to_string(tr.rejected) +
         " max local error=" + num(tr.max_local_error);
}

template <class Fn>
Outcome guarded(const std::string& path, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    return {kUsage, "", std::string("error: ") + e.what(), {}};
  } catch (const IntegrationError& e) {
    Outcome o{kCheckFailed, "", path + ": integration failed (last valid parameter " + num(e.last_valid()) +
                                    "): " + e.what(), {}};
    o.summary = {{"config", path}, {"error", e.what()}, {"last_valid", e.last_valid()}};
    return o;
  } catch (const std::exception& e) {
    return {kUsage, "", path + ": error: " + e.what(), {}};
  }
}

}  // namespace

Outcome cmd_analyze(const std::string& config, const Options& opts) {
  return guarded(config, [&] {
    const Scenario s = load_scenario(config);
    const Context ctx = scenario_context(s);
    const LagrangianModel lm = scenario_lagrangian(s, ctx);
    std::ostringstream out;
    json sum = {{"command", "analyze"}, {"config", config}, {"model", s.model}};

    const auto h = hessian(lm, ctx);
    out << "scenario: " << s.name << "\n";
    out << "L = " << render(lm.lagrangian) << "\n";
    out << "det = " << render(h.determinant) << "\n";
    sum["det"] = render(h.determinant);

    if (s.model == "original") {
      const auto lr = legendre(lm, ctx);
      if (lr.primaries.empty()) {
        out << "no constraints\n";
        out << "H = " << render(lr.hamiltonian) << "\n";
        sum["constraints"] = json::array();
        sum["hamiltonian"] = render(lr.hamiltonian);
      } else {
        const auto cs = classify(from_legendre(lr), lm.chart(), ctx);
        json list = json::array();
        out << "constraints:\n";
        for (const auto& c : cs.constraints) {
          out << "  " << c.name << " = " << render(c.expr) << "  [" << to_string(c.label) << "]\n";
          list.push_back({{"name", c.name}, {"expr", render(c.expr)}, {"class", to_string(c.label)}});
        }
        sum["constraints"] = list;
      }
    } else {
      ClassifyOptions copts;
      copts.seed = opts.seed;
      const auto a = analyze_extended(lm, ctx, s.gauge, copts);
      out << "det_tau = " << render(a.extended_hessian.determinant) << "\n";
      out << "before gauge fixing:\n";
      for (const auto& c : a.ungauged.constraints) out << "  " << c.name << "  [" << to_string(c.label) << "]\n";
      out << "constraints:\n";
      json list = json::array();
      for (const auto& c : a.gauged.constraints) {
        out << "  " << c.name << " = " << render(c.expr) << "  [" << to_string(c.label) << "]\n";
        list.push_back({{"name", c.name}, {"expr", render(c.expr)}, {"class", to_string(c.label)}});
      }
      const bool proportional = a.h_tau == Expr::symbol("t_tau_dot") * a.phi;
      out << "H_tau = " << render(a.h_tau) << "\n";
      if (proportional) out << "H_tau = t_tau_dot*phi\n";
      out << "secondary constraints: " << a.secondaries << " (" << a.secondary_passes << " pass"
          << (a.secondary_passes == 1 ? "" : "es") << ")\n";
      out << "H_T = " << render(a.total_h) << "\n";
      out << "Delta = " << render_matrix(a.cm.delta) << "\n";
      out << "C = " << render_matrix(a.cm.inverse) << "\n";
      out << "Dirac brackets:\n";
      json brackets = json::array();
      for (const auto& [f, g, b] : a.dirac_brackets) {
        out << "  {" << f << ", " << g << "}_DB = " << render(b) << "\n";
        brackets.push_back({{"f", f}, {"g", g}, {"value", render(b)}});
      }
      sum["det_tau"] = render(a.extended_hessian.determinant);
      sum["constraints"] = list;
      sum["h_tau"] = render(a.h_tau);
      sum["h_tau_is_t_tau_dot_phi"] = proportional;
      sum["secondaries"] = a.secondaries;
      sum["total_hamiltonian"] = render(a.total_h);
      sum["delta"] = matrix_json(a.cm.delta);
      sum["c"] = matrix_json(a.cm.inverse);
      sum["dirac_brackets"] = brackets;
    }
    write_summary(prepare_out(opts), sum);
    return Outcome{kOk, out.str(), "", sum};
  });
}

Outcome cmd_simulate(const std::string& config, const Options& opts) {
  return guarded(config, [&] {
    const Scenario s = load_scenario(config);
    const Context ctx = scenario_context(s);
    const IntegratorPolicy policy = scenario_policy(s, opts);
    const Bindings consts{{"m", s.m}};
    const fs::path dir = prepare_out(opts);
    std::ostringstream out;
    json sum = {{"command", "simulate"}, {"config", config}, {"model", s.model}};
    out << "scenario: " << s.name << "\n";

    const auto tau_grid = uniform_grid(s.gauge.tau1, s.gauge.tau2, s.intervals);
    std::vector<double> t_grid;
    for (double tau : tau_grid) t_grid.push_back(s.gauge.time_at(tau));
    t_grid.front() = s.gauge.t1;
    t_grid.back() = s.gauge.t2;

    const LagrangianModel lm = scenario_lagrangian(s, ctx);
    const auto eom = hamilton_eom(legendre(lm, ctx).hamiltonian, original_chart(), ctx);
    const Trajectory orig = integrate(eom, s.initial, "t", t_grid, policy, ctx, consts);
    std::ofstream(dir / "original.csv") << [&] {
      std::ostringstream os;
      write_csv(os, orig);
      return os.str();
    }();
    out << "original: " << policy_line(orig) << "\n";
    sum["original"] = policy_json(orig);

    int code = kOk;
    if (s.model == "extended") {
      if (s.lagrangian) throw std::invalid_argument("extended simulation supports the oscillator Lagrangian only");
      const auto init = extended_initial_state(s.initial, s.gauge.t1, ctx, consts);
      const Trajectory ext = integrate_extended(s.gauge, init, policy, ctx, consts, tau_grid);
      std::ofstream(dir / "extended.csv") << [&] {
        std::ostringstream os;
        write_csv(os, ext);
        return os.str();
      }();

      const auto cs = with_gauge(from_legendre(legendre(extended_oscillator_lagrangian(ctx), ctx)), s.gauge);
      auto drift = constraint_drift(ext, cs, ctx, consts);
      const Expr h = to_extended(oscillator_hamiltonian(ctx));
      std::vector<double> ham(ext.size());
      for (std::size_t i = 0; i < ext.size(); ++i) {
        Bindings row = ext.row(i);
        row.insert(consts.begin(), consts.end());
        ham[i] = std::abs(row["p_tau"] + eval(h, row, ctx));
      }
      drift.emplace_back("p_tau_plus_H", ham);
      std::ofstream(dir / "drift.csv") << [&] {
        std::ostringstream os;
        write_csv(os, "tau", ext.grid, drift);
        return os.str();
      }();

      const auto eq = gauge_equivalence(orig, ext);
      double worst_drift = 0.0;
      for (std::size_t k = 0; k + 1 < drift.size(); ++k) {
        for (double v : drift[k].second) worst_drift = std::max(worst_drift, v);
      }
      double worst_h = 0.0;
      for (double v : ham) worst_h = std::max(worst_h, v);

      out << "extended: " << policy_line(ext) << "\n";
      out << "max gauge-equivalence error: " << num(eq.max_abs) << " (relative " << num(eq.max_rel)
          << ", time " << num(eq.max_time_error) << ")\n";
      out << "max constraint drift: " << num(worst_drift) << "\n";
      out << "max |p_tau + H|: " << num(worst_h) << "\n";
      sum["extended"] = policy_json(ext);
      sum["equivalence"] = {{"max_abs", eq.max_abs}, {"max_rel", eq.max_rel}, {"max_time_error", eq.max_time_error}};
      sum["max_constraint_drift"] = worst_drift;
      sum["max_p_tau_plus_h"] = worst_h;

      const bool pass = eq.max_abs < s.checks.equivalence && worst_drift < s.checks.constraint_drift &&
                        worst_h < s.checks.hamiltonian;
      sum["pass"] = pass;
      if (!pass) {
        out << "check failed: equivalence < " << num(s.checks.equivalence) << ", drift < "
            << num(s.checks.constraint_drift) << ", |p_tau + H| < " << num(s.checks.hamiltonian) << "\n";
        code = kCheckFailed;
      }
    }
    write_summary(dir, sum);
    return Outcome{code, out.str(), "", sum};
  });
}

Outcome cmd_invariant(const std::string& config, const Options& opts) {
  return guarded(config, [&] {
    const Scenario s = load_scenario(config);
    if (s.lagrangian) throw std::invalid_argument("invariant supports the oscillator Lagrangian only");
    const IntegratorPolicy policy = scenario_policy(s, opts);
    const fs::path dir = prepare_out(opts);
    ErmakovConfig cfg;
    cfg.nu = s.nu;
    cfg.m = s.m;
    cfg.omega = s.omega;
    cfg.eta_fric = s.eta_fric;
    cfg.f = s.f;
    cfg.rho0 = s.rho0;
    cfg.rhodot0 = s.rhodot0;
    cfg.t0 = s.gauge.t1;
    cfg.t1 = s.gauge.t2;
    cfg = cfg.resolved();

    std::ostringstream out;
    json sum = {{"command", "invariant"}, {"config", config}, {"nu", *cfg.nu}, {"rho0", cfg.rho0}};
    out << "scenario: " << s.name << "\n";
    out << "nu = " << num(*cfg.nu) << "\n";
    const auto grid = uniform_grid(cfg.t0, cfg.t1, s.intervals);
    CoupledRun run;
    try {
      run = solve_coupled(cfg, s.initial, grid, policy);
    } catch (const IntegrationError& e) {
      out << "aborted: " << e.what() << "\n";
      out << "last valid t = " << num(e.last_valid()) << "\n";
      sum["aborted"] = true;
      sum["last_valid"] = e.last_valid();
      sum["error"] = e.what();
      sum["pass"] = false;
      write_summary(dir, sum);
      return Outcome{kCheckFailed, out.str(), "", sum};
    }
    const auto inv = lewis_invariant(run.oscillator, run.rho, cfg);
    const auto rep = invariant_drift_report(inv, grid);
    std::ofstream(dir / "invariant.csv") << [&] {
      std::ostringstream os;
      write_csv(os, "t", grid, {{"rho", run.rho.rho}, {"rhodot", run.rho.rhodot}, {"I", inv}});
      return os.str();
    }();
    out << policy_line(run.oscillator) << "\n";
    out << "I(0) = " << num(inv.front()) << "\n";
    out << "max " << (rep.relative ? "relative" : "absolute") << " drift of I: " << num(rep.max_drift)
        << " at t = " << num(rep.at) << "\n";
    const bool pass = rep.max_drift < s.checks.invariant_drift;
    sum["aborted"] = false;
    sum["i0"] = inv.front();
    sum["drift"] = {{"max", rep.max_drift}, {"at", rep.at}, {"relative", rep.relative}};
    sum["integrator"] = policy_json(run.oscillator);
    sum["pass"] = pass;
    if (!pass) out << "check failed: drift >= " << num(s.checks.invariant_drift) << "\n";
    write_summary(dir, sum);
    return Outcome{pass ? kOk : kCheckFailed, out.str(), "", sum};
  });
}

Outcome cmd_transform_check(const std::string& spec, const Options& opts) {
  return guarded(spec, [&] {
    const Context ctx = transform_context();
    const TransformDocument doc = load_transform(spec, ctx);
    Transform tr = complete(doc.spec, ctx);
    if (doc.c1) tr = with_c1(tr, *doc.c1, ctx);
    const fs::path dir = prepare_out(opts);

    std::mt19937_64 rng(opts.seed);
    std::uniform_real_distribution<double> u(doc.lo, doc.hi);
    std::vector<PhasePoint> pts(opts.points);
    for (auto& z : pts) {
      for (auto& v : z) v = u(rng);
    }

    std::ostringstream out;
    json sum = {{"command", "transform-check"}, {"spec", spec}, {"points", opts.points}, {"seed", opts.seed}};
    out << "transform: " << doc.name << "\n";
    out << "C1 = " << render(tr.c1) << "\n";
    out << "C2 = " << render(tr.c2) << "\n";
    out << "F = " << render(tr.maps[5]);
    for (const auto& qi : tr.integrals) {
      if (!qi.antiderivative) out << " + B_dot^-1 * int_0^" << qi.var << " (" << render(qi.integrand) << ")";
    }
    out << "\n";

    double defect = 0.0, det_err = 0.0;
    std::array<double, 7> res{};
    try {
      for (const auto& z : pts) {
        const Matrix6 m = jacobian(tr, z, ctx);
        defect = std::max(defect, symplectic_defect(m));
        det_err = std::max(det_err, std::abs(std::abs(m.determinant()) - 1.0));
        const auto r = ode_residuals(tr, z, ctx);
        for (std::size_t k = 0; k < 7; ++k) res[k] = std::max(res[k], std::abs(r[k]));
      }
    } catch (const TransformError& e) {
      out << "singular: " << e.what() << "\n";
      sum["error"] = e.what();
      sum["pass"] = false;
      write_summary(dir, sum);
      return Outcome{kCheckFailed, out.str(), "", sum};
    }
    double worst = 0.0;
    for (double r : res) worst = std::max(worst, r);
    out << "points: " << opts.points << "\n";
    out << "defect = " << num(defect) << "\n";
    out << "max ODE residual = " << num(worst) << " (";
    for (std::size_t k = 0; k < 7; ++k) out << (k ? ", " : "") << num(res[k]);
    out << ")\n";
    out << "max ||det M| - 1| = " << num(det_err) << "\n";
    const bool pass = defect < 1e-9 && worst < 1e-9;
    out << (pass ? "symplectic\n" : "NOT symplectic\n");
    sum["defect"] = defect;
    sum["residuals"] = res;
    sum["det_error"] = det_err;
    sum["pass"] = pass;
    write_summary(dir, sum);
    return Outcome{pass ? kOk : kCheckFailed, out.str(), "", sum};
  });
}

}  // namespace extps::cli
