#include "extps/canonical.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_integration.h>

#include <cmath>
#include <memory>

namespace extps {

namespace {

const std::array<std::string, 6> kNew = {"Q1", "Q2", "T", "P1", "P2", "P_T"};

Bindings bind(const PhasePoint& z) {
  Bindings b;
  for (std::size_t i = 0; i < 6; ++i) b.emplace(kNew[i], z[i]);
  return b;
}

void require_only(const Expr& e, const std::string& what, std::initializer_list<const char*> allowed) {
  for (const auto& s : free_symbols(e)) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || s == a;
    if (!ok) throw TransformError(what + " may not depend on '" + s + "'");
  }
}

}  // namespace

void refresh(Transform& tr, const Context& ctx) {
  for (std::size_t r = 0; r < 6; ++r) {
    for (std::size_t c = 0; c < 6; ++c) tr.partials[r][c] = diff(tr.maps[r], kNew[c], ctx);
  }
  for (std::size_t i = 0; i < 2; ++i) tr.integrand_dt[i] = diff(tr.integrals[i].integrand, "T", ctx);
  tr.b_dot = diff(tr.spec.b, "T", ctx);
  tr.b_ddot = diff(tr.b_dot, "T", ctx);
}

namespace {

// int_{q_base}^{q} g(q', T) dq' with the other variables taken from z.
double quadrature(const Expr& g, const std::string& var, double q_base, const PhasePoint& z, const Context& ctx) {
  const std::size_t slot = var == "Q1" ? 0 : 1;
  if (z[slot] == q_base) return 0.0;
  struct Data {
    const Expr* g;
    const Context* ctx;
    Bindings b;
    std::string var;
  } data{&g, &ctx, bind(z), var};
  gsl_function f;
  f.function = [](double q, void* p) {
    auto* d = static_cast<Data*>(p);
    d->b[d->var] = q;
    return eval(*d->g, d->b, *d->ctx);
  };
  f.params = &data;
  gsl_set_error_handler_off();
  std::unique_ptr<gsl_integration_workspace, decltype(&gsl_integration_workspace_free)> ws(
      gsl_integration_workspace_alloc(256), &gsl_integration_workspace_free);
  double v = 0.0, err = 0.0;
  const int status =
      gsl_integration_qag(&f, q_base, z[slot], 1e-13, 1e-12, 256, GSL_INTEG_GAUSS21, ws.get(), &v, &err);
  if (status != GSL_SUCCESS || !std::isfinite(v)) {
    throw TransformError("Q-integral of " + render(g) + " did not converge: " + gsl_strerror(status));
  }
  return v;
}

void check_domain(const Transform& tr, const Bindings& b, const Context& ctx) {
  const double a1 = eval(tr.partials[0][0], b, ctx);
  const double a2 = eval(tr.partials[1][1], b, ctx);
  const double bd = eval(tr.b_dot, b, ctx);
  if (std::abs(a1) < 1e-12 || std::abs(a2) < 1e-12 || std::abs(bd) < 1e-12) {
    throw TransformError("singular transform: A1', A2' or B_dot vanishes at the point");
  }
}

}  // namespace

Context transform_context() {
  Context ctx;
  for (const char* q : {"Q1", "Q2", "T"}) ctx.declare_symbol(q, SymbolKind::Coordinate);
  for (const char* p : {"P1", "P2", "P_T"}) ctx.declare_symbol(p, SymbolKind::Momentum);
  ctx.freeze();
  return ctx;
}

TransformSpec TransformSpec::parse(const std::string& a1, const std::string& a2, const std::string& b,
                                   const std::string& d1, const std::string& d2, const Context& ctx,
                                   const std::optional<std::string>& g) {
  TransformSpec s{extps::parse(a1, ctx), extps::parse(a2, ctx), extps::parse(b, ctx), extps::parse(d1, ctx),
                  extps::parse(d2, ctx), std::nullopt};
  if (g) s.g = extps::parse(*g, ctx);
  s.validate();
  return s;
}

void TransformSpec::validate() const {
  require_only(a1, "A1", {"Q1", "T"});
  require_only(d1, "D1", {"Q1", "T"});
  require_only(a2, "A2", {"Q2", "T"});
  require_only(d2, "D2", {"Q2", "T"});
  require_only(b, "B", {"T"});
  if (g) require_only(*g, "G", {"T"});
}

bool Transform::symbolic() const { return integrals[0].antiderivative && integrals[1].antiderivative; }

Transform complete(const TransformSpec& spec, const Context& ctx) {
  spec.validate();
  Transform tr;
  tr.spec = spec;
  const Expr b_dot = diff(spec.b, "T", ctx);
  if (b_dot.is_zero()) throw TransformError("B must depend on T");
  const std::array<Expr, 2> a = {spec.a1, spec.a2};
  const std::array<Expr, 2> d = {spec.d1, spec.d2};
  const std::array<std::string, 2> q = {"Q1", "Q2"};
  const std::array<std::string, 2> p = {"P1", "P2"};

  std::array<Expr, 2> c;
  Expr f = Expr::symbol("P_T") / b_dot;
  Expr closed;
  for (std::size_t i = 0; i < 2; ++i) {
    const Expr ap = diff(a[i], q[i], ctx);
    if (ap.is_zero()) throw TransformError("A" + std::to_string(i + 1) + " must depend on " + q[i]);
    const Expr adot = diff(a[i], "T", ctx);
    c[i] = Expr(1) / ap;
    f = f - adot / (ap * b_dot) * Expr::symbol(p[i]);

    QIntegral& qi = tr.integrals[i];
    qi.var = q[i];
    qi.integrand = diff(d[i], "T", ctx) * ap - adot * diff(d[i], q[i], ctx);
    if (is_polynomial_in(qi.integrand, q[i])) {
      qi.antiderivative = integrate_polynomial(qi.integrand, q[i]);
      closed = closed + *qi.antiderivative;
    }
  }
  f = f + closed / b_dot;
  if (spec.g) f = f + *spec.g;

  tr.c1 = c[0];
  tr.c2 = c[1];
  tr.maps = {spec.a1,
             spec.a2,
             spec.b,
             c[0] * Expr::symbol("P1") + spec.d1,
             c[1] * Expr::symbol("P2") + spec.d2,
             f};
  refresh(tr, ctx);
  return tr;
}

Transform with_c1(const Transform& tr, const Expr& c1, const Context& ctx) {
  Transform out = tr;
  out.c1 = c1;
  out.maps[3] = c1 * Expr::symbol("P1") + tr.spec.d1;
  refresh(out, ctx);
  return out;
}

PhasePoint Transform::apply(const PhasePoint& z, const Context& ctx) const {
  const Bindings b = bind(z);
  PhasePoint out;
  for (std::size_t r = 0; r < 6; ++r) out[r] = eval(maps[r], b, ctx);
  double k = 0.0;
  for (const auto& qi : integrals) {
    if (!qi.antiderivative) k += quadrature(qi.integrand, qi.var, q_base, z, ctx);
  }
  if (k != 0.0) out[5] += k / eval(b_dot, b, ctx);
  return out;
}

Matrix6 jacobian(const Transform& tr, const PhasePoint& z, const Context& ctx) {
  const Bindings b = bind(z);
  check_domain(tr, b, ctx);
  Matrix6 m;
  for (std::size_t r = 0; r < 6; ++r) {
    for (std::size_t c = 0; c < 6; ++c) m(r, c) = eval(tr.partials[r][c], b, ctx);
  }
  // F += (K1 + K2) / B_dot for the integrals done numerically
  const double bd = eval(tr.b_dot, b, ctx);
  double k = 0.0, k_t = 0.0;
  for (std::size_t i = 0; i < 2; ++i) {
    const auto& qi = tr.integrals[i];
    if (qi.antiderivative) continue;
    k += quadrature(qi.integrand, qi.var, tr.q_base, z, ctx);
    k_t += quadrature(tr.integrand_dt[i], qi.var, tr.q_base, z, ctx);
    m(5, i) += eval(qi.integrand, b, ctx) / bd;
  }
  if (k != 0.0 || k_t != 0.0) m(5, 2) += k_t / bd - k * eval(tr.b_ddot, b, ctx) / (bd * bd);
  return m;
}

Matrix6 jacobian_fd(const Transform& tr, const PhasePoint& z, const Context& ctx, double h) {
  Matrix6 m;
  for (std::size_t c = 0; c < 6; ++c) {
    PhasePoint zp = z, zm = z;
    zp[c] += h;
    zm[c] -= h;
    const PhasePoint fp = tr.apply(zp, ctx), fm = tr.apply(zm, ctx);
    for (std::size_t r = 0; r < 6; ++r) m(r, c) = (fp[r] - fm[r]) / (2 * h);
  }
  return m;
}

const Matrix6& symplectic_j() {
  static const Matrix6 j = [] {
    Matrix6 m = Matrix6::Zero();
    for (int i = 0; i < 3; ++i) {
      m(i, i + 3) = 1.0;
      m(i + 3, i) = -1.0;
    }
    return m;
  }();
  return j;
}

double symplectic_defect(const Matrix6& m) {
  return (m.transpose() * symplectic_j() * m - symplectic_j()).cwiseAbs().maxCoeff();
}

double symplectic_defect(const Transform& tr, const std::vector<PhasePoint>& points, const Context& ctx) {
  double worst = 0.0;
  for (const auto& z : points) worst = std::max(worst, symplectic_defect(jacobian(tr, z, ctx)));
  return worst;
}

std::array<double, 7> ode_residuals(const Transform& tr, const PhasePoint& z, const Context& ctx) {
  const Matrix6 m = jacobian(tr, z, ctx);
  return {m(0, 2) * m(3, 0) + m(2, 2) * m(5, 0) - m(3, 2) * m(0, 0),
          m(1, 2) * m(4, 1) + m(2, 2) * m(5, 1) - m(4, 2) * m(1, 1),
          m(3, 3) * m(0, 2) + m(2, 2) * m(5, 3),
          m(4, 4) * m(1, 2) + m(2, 2) * m(5, 4),
          m(2, 2) * m(5, 5) - 1.0,
          m(3, 3) * m(0, 0) - 1.0,
          m(4, 4) * m(1, 1) - 1.0};
}

Matrix6 composite_jacobian(const Transform& outer, const Transform& inner, const PhasePoint& z, const Context& ctx) {
  return jacobian(outer, inner.apply(z, ctx), ctx) * jacobian(inner, z, ctx);
}

}  // namespace extps
