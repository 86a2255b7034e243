#include "extps/constraints.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace extps {

void LagrangianModel::validate(const Context& ctx) const {
  const std::size_t n = coordinates.size();
  if (velocities.size() != n || momenta.size() != n) {
    throw std::invalid_argument("lagrangian model: coordinates, velocities and momenta differ in length");
  }
  std::set<std::string> seen;
  for (const auto* names : {&coordinates, &velocities, &momenta}) {
    for (const auto& s : *names) {
      if (!seen.insert(s).second) throw std::invalid_argument("lagrangian model: '" + s + "' repeated");
      if (!ctx.symbol_kind(s)) throw std::invalid_argument("lagrangian model: '" + s + "' is not declared");
    }
  }
  for (const auto& s : free_symbols(lagrangian)) {
    if (!ctx.symbol_kind(s)) throw std::invalid_argument("lagrangian: unknown symbol '" + s + "'");
    if (*ctx.symbol_kind(s) == SymbolKind::Momentum) {
      throw std::invalid_argument("lagrangian depends on momentum '" + s + "'");
    }
  }
}

Chart LagrangianModel::chart() const {
  std::vector<Chart::Pair> pairs;
  for (std::size_t i = 0; i < coordinates.size(); ++i) pairs.emplace_back(coordinates[i], momenta[i]);
  return Chart(std::move(pairs));
}

LagrangianModel extend_time(const LagrangianModel& lm, const TimeExtension& ext) {
  const std::size_t n = lm.coordinates.size();
  if (ext.coordinates.size() != n || ext.velocities.size() != n || ext.momenta.size() != n) {
    throw std::invalid_argument("time extension: name lists do not match the model");
  }
  const Expr tdot = Expr::symbol(ext.time_velocity);
  std::map<std::string, Expr, std::less<>> repl;
  for (std::size_t i = 0; i < n; ++i) {
    repl.emplace(lm.coordinates[i], Expr::symbol(ext.coordinates[i]));
    repl.emplace(lm.velocities[i], Expr::symbol(ext.velocities[i]) / tdot);
  }
  repl.emplace(ext.time, Expr::symbol(ext.time_coordinate));

  LagrangianModel out;
  out.coordinates = ext.coordinates;
  out.coordinates.push_back(ext.time_coordinate);
  out.velocities = ext.velocities;
  out.velocities.push_back(ext.time_velocity);
  out.momenta = ext.momenta;
  out.momenta.push_back(ext.time_momentum);
  out.lagrangian = substitute(lm.lagrangian, repl) * tdot;
  return out;
}

HessianResult hessian(const LagrangianModel& lm, const Context& ctx) {
  const std::size_t n = lm.velocities.size();
  HessianResult out;
  out.matrix.assign(n, std::vector<Expr>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const Expr pi = diff(lm.lagrangian, lm.velocities[i], ctx);
    for (std::size_t j = 0; j < n; ++j) out.matrix[i][j] = diff(pi, lm.velocities[j], ctx);
  }
  out.determinant = determinant(out.matrix);
  return out;
}

// ---------------------------------------------------------------------------

GenericPoint::GenericPoint(std::uint64_t seed, double lo, double hi) : rng_(seed), lo_(lo), hi_(hi) {}

double GenericPoint::draw() const {
  std::uniform_real_distribution<double> u(lo_, hi_);
  return u(rng_);
}

double GenericPoint::leaf(const BaseNode& b) const {
  if (b.kind == BaseNode::Kind::Symbol) {
    auto it = symbols_.find(b.name);
    if (it == symbols_.end()) it = symbols_.emplace(b.name, draw()).first;
    return it->second;
  }
  const auto key = std::make_pair(b.name, b.order);
  auto it = atoms_.find(key);
  if (it == atoms_.end()) it = atoms_.emplace(key, draw()).first;
  return it->second;
}

double GenericPoint::eval(const Expr& e) const {
  return eval_with(e, [this](const BaseNode& b) { return leaf(b); });
}

double& GenericPoint::operator[](const std::string& symbol) {
  auto it = symbols_.find(symbol);
  if (it == symbols_.end()) it = symbols_.emplace(symbol, draw()).first;
  return it->second;
}

std::vector<GenericPoint> surface_points(const std::vector<Expr>& constraints, const Chart& chart,
                                         const Context& ctx, std::size_t count, std::uint64_t seed) {
  struct Solve {
    Expr c;
    std::string var;
    Expr dc;
    bool linear;
  };
  std::vector<Solve> plan;
  std::set<std::string> used;
  for (const auto& c : constraints) {
    std::optional<Solve> pick;
    for (const auto& v : chart.variables()) {
      if (used.count(v) || !depends_on(c, v)) continue;
      const Expr d = diff(c, v, ctx);
      const bool linear = diff(d, v, ctx).is_zero();
      if (!pick || (linear && !pick->linear)) pick = Solve{c, v, d, linear};
      if (linear) break;
    }
    if (!pick) {
      if (c.is_constant() && !c.is_zero()) throw std::runtime_error("constraint " + render(c) + " has no solution");
      continue;
    }
    used.insert(pick->var);
    plan.push_back(std::move(*pick));
  }

  std::vector<GenericPoint> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    GenericPoint p(seed + 7919 * i);
    for (int sweep = 0; sweep < 50; ++sweep) {
      double worst = 0.0;
      for (const auto& s : plan) {
        const double r = p.eval(s.c);
        worst = std::max(worst, std::abs(r));
        const double d = p.eval(s.dc);
        if (d == 0.0) throw EvalError("constraint derivative vanishes at a sampled point");
        p[s.var] -= r / d;
      }
      if (worst < 1e-14) break;
    }
    out.push_back(std::move(p));
  }
  return out;
}

int numeric_rank(const ExprMatrix& m, const GenericPoint& at, double rel_tol) {
  const auto rows = static_cast<Eigen::Index>(m.size());
  const auto cols = rows ? static_cast<Eigen::Index>(m[0].size()) : 0;
  if (rows == 0 || cols == 0) return 0;
  Eigen::MatrixXd a(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      a(i, j) = at.eval(m[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]);
    }
  }
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
  const auto& s = svd.singularValues();
  const double cut = rel_tol * s(0);
  int rank = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > cut) ++rank;
  }
  return rank;
}

// ---------------------------------------------------------------------------

LegendreResult legendre(const LagrangianModel& lm, const Context& ctx) {
  lm.validate(ctx);
  const std::size_t n = lm.velocities.size();
  LegendreResult out;
  for (const auto& v : lm.velocities) out.momenta.push_back(diff(lm.lagrangian, v, ctx));
  const HessianResult hess = hessian(lm, ctx);

  // Largest set of velocities with a nonsingular principal Hessian block.
  const GenericPoint probe(0xC0FFEE);
  std::vector<std::size_t> solvable;
  std::vector<std::size_t> undetermined;
  for (std::size_t i = 0; i < n; ++i) {
    auto trial = solvable;
    trial.push_back(i);
    ExprMatrix block;
    for (auto r : trial) {
      std::vector<Expr> row;
      for (auto c : trial) row.push_back(hess.matrix[r][c]);
      block.push_back(std::move(row));
    }
    if (numeric_rank(block, probe) == static_cast<int>(trial.size())) {
      solvable = std::move(trial);
    } else {
      undetermined.push_back(i);
    }
  }

  for (auto r : solvable) {
    for (auto c : solvable) {
      for (auto k : solvable) {
        if (!diff(hess.matrix[r][c], lm.velocities[k], ctx).is_zero()) {
          throw LegendreError("momentum " + lm.momenta[r] + " is not linear in the solvable velocities");
        }
      }
    }
  }

  // p_S = M_SS v_S + b_S  =>  v_S = M_SS^{-1} (P_S - b_S)
  std::map<std::string, Expr, std::less<>> zero_v;
  for (auto k : solvable) zero_v.emplace(lm.velocities[k], Expr());
  ExprMatrix block;
  for (auto r : solvable) {
    std::vector<Expr> row;
    for (auto c : solvable) row.push_back(hess.matrix[r][c]);
    block.push_back(std::move(row));
  }
  const ExprMatrix block_inv = solvable.empty() ? ExprMatrix{} : inverse(block);
  std::map<std::string, Expr, std::less<>> v_repl;
  for (std::size_t a = 0; a < solvable.size(); ++a) {
    Expr v;
    for (std::size_t b = 0; b < solvable.size(); ++b) {
      const std::size_t k = solvable[b];
      const Expr rhs = Expr::symbol(lm.momenta[k]) - substitute(out.momenta[k], zero_v);
      v += block_inv[a][b] * rhs;
    }
    v_repl.emplace(lm.velocities[solvable[a]], v);
    out.velocity_solution.emplace(lm.velocities[solvable[a]], v);
  }

  for (auto u : undetermined) {
    out.undetermined_velocities.push_back(lm.velocities[u]);
    const Expr expressed = substitute(out.momenta[u], v_repl);
    for (auto w : undetermined) {
      if (depends_on(expressed, lm.velocities[w])) {
        throw LegendreError("momentum " + lm.momenta[u] + " cannot be expressed in phase-space variables");
      }
    }
    out.primaries.push_back(Expr::symbol(lm.momenta[u]) - expressed);
  }

  Expr h;
  for (std::size_t i = 0; i < n; ++i) h += Expr::symbol(lm.momenta[i]) * Expr::symbol(lm.velocities[i]);
  out.hamiltonian = substitute(h - lm.lagrangian, v_repl);
  out.canonical_hamiltonian = out.hamiltonian;
  for (std::size_t k = 0; k < undetermined.size(); ++k) {
    out.canonical_hamiltonian -= Expr::symbol(lm.velocities[undetermined[k]]) * out.primaries[k];
  }
  return out;
}

// ---------------------------------------------------------------------------

void GaugeSpec::validate() const {
  for (double x : {tau1, tau2, t1, t2}) {
    if (!std::isfinite(x)) throw std::invalid_argument("gauge window: non-finite bound");
  }
  if (!(tau2 > tau1)) throw std::invalid_argument("gauge window: empty span (tau2 <= tau1)");
  if (!(t2 > t1)) throw std::invalid_argument("gauge window: empty span (t2 <= t1)");
}

double GaugeSpec::lambda() const { return (t2 - t1) / (tau2 - tau1); }

Expr GaugeSpec::lambda_expr() const {
  return (Expr::from_double(t2) - Expr::from_double(t1)) / (Expr::from_double(tau2) - Expr::from_double(tau1));
}

double GaugeSpec::time_at(double tau) const { return (t2 - t1) * (tau - tau1) / (tau2 - tau1) + t1; }

Expr GaugeSpec::eta_gauge(const std::string& time_coordinate, const std::string& tau) const {
  const Expr affine = lambda_expr() * (Expr::symbol(tau) - Expr::from_double(tau1)) + Expr::from_double(t1);
  return Expr::symbol(time_coordinate) - affine;
}

std::vector<Expr> ConstraintSet::exprs() const {
  std::vector<Expr> out;
  for (const auto& c : constraints) out.push_back(c.expr);
  return out;
}

std::vector<Expr> ConstraintSet::primaries() const {
  std::vector<Expr> out;
  for (const auto& c : constraints) {
    if (c.origin == ConstraintOrigin::Primary) out.push_back(c.expr);
  }
  return out;
}

ConstraintSet from_legendre(const LegendreResult& lr, const std::vector<std::string>& names) {
  ConstraintSet cs;
  for (std::size_t i = 0; i < lr.primaries.size(); ++i) {
    std::string name = i < names.size() ? names[i]
                       : lr.primaries.size() == 1 ? std::string("phi")
                                                  : "phi" + std::to_string(i + 1);
    cs.constraints.push_back({std::move(name), lr.primaries[i], ConstraintOrigin::Primary, ConstraintClass::Unclassified});
  }
  return cs;
}

ConstraintSet with_gauge(ConstraintSet cs, const GaugeSpec& gauge, const std::string& time_coordinate) {
  gauge.validate();
  cs.constraints.push_back({"eta_gauge", gauge.eta_gauge(time_coordinate), ConstraintOrigin::Gauge,
                            ConstraintClass::Unclassified});
  cs.gauge = gauge;
  return cs;
}

bool weakly_nonzero(const Expr& e, const std::vector<GenericPoint>& surface, double threshold) {
  if (e.is_zero()) return false;
  if (e.is_constant()) return std::abs(e.constant_value().convert_to<double>()) > threshold;
  return std::any_of(surface.begin(), surface.end(),
                     [&](const GenericPoint& p) { return std::abs(p.eval(e)) > threshold; });
}

ConstraintSet classify(ConstraintSet cs, const Chart& chart, const Context& ctx, const ClassifyOptions& opts) {
  const auto exprs = cs.exprs();
  const auto surface = surface_points(exprs, chart, ctx, opts.points, opts.seed);
  for (std::size_t a = 0; a < exprs.size(); ++a) {
    bool second = false;
    for (std::size_t b = 0; b < exprs.size() && !second; ++b) {
      if (a == b) continue;
      second = weakly_nonzero(poisson(exprs[a], exprs[b], chart, ctx), surface, opts.threshold);
    }
    cs.constraints[a].label = second ? ConstraintClass::SecondClass : ConstraintClass::FirstClass;
  }
  return cs;
}

Expr total_hamiltonian(const ConstraintSet& cs, const std::vector<Expr>& multipliers, const Expr& canonical_h) {
  const auto prim = cs.primaries();
  if (prim.empty()) throw std::invalid_argument("total hamiltonian: no primary constraint");
  if (prim.size() != multipliers.size()) {
    throw std::invalid_argument("total hamiltonian: one multiplier per primary constraint is required");
  }
  Expr h = canonical_h;
  for (std::size_t i = 0; i < prim.size(); ++i) h += multipliers[i] * prim[i];
  return h;
}

Expr total_hamiltonian(const ConstraintSet& cs, const Expr& multiplier, const Expr& canonical_h) {
  return total_hamiltonian(cs, std::vector<Expr>{multiplier}, canonical_h);
}

SecondarySearch find_secondaries(ConstraintSet cs, const Expr& total_h, const std::vector<std::string>& multipliers,
                                 const Chart& chart, const Context& ctx, const ClassifyOptions& opts,
                                 int max_passes) {
  SecondarySearch out;
  std::size_t checked = 0;
  int next_id = 1;
  while (out.passes < max_passes) {
    ++out.passes;
    const auto surface = surface_points(cs.exprs(), chart, ctx, opts.points, opts.seed);
    const std::size_t n = cs.constraints.size();
    bool added = false;
    for (std::size_t i = checked; i < n; ++i) {
      const Expr b = poisson(cs.constraints[i].expr, total_h, chart, ctx);
      if (!weakly_nonzero(b, surface, opts.threshold)) continue;
      const bool fixes_multiplier = std::any_of(multipliers.begin(), multipliers.end(),
                                                [&](const std::string& l) { return depends_on(b, l); });
      if (fixes_multiplier) continue;
      cs.constraints.push_back({"chi" + std::to_string(next_id++), b, ConstraintOrigin::Secondary,
                                ConstraintClass::Unclassified});
      added = true;
    }
    checked = n;
    if (!added) break;
  }
  out.constraints = std::move(cs);
  return out;
}

std::string to_string(ConstraintClass c) {
  switch (c) {
    case ConstraintClass::FirstClass: return "first-class";
    case ConstraintClass::SecondClass: return "second-class";
    case ConstraintClass::Unclassified: return "unclassified";
  }
  return "unclassified";
}

}  // namespace extps
