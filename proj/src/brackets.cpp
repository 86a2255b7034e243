#include "extps/brackets.hpp"

#include <algorithm>
#include <set>

namespace extps {

Chart::Chart(std::vector<Pair> pairs) : pairs_(std::move(pairs)) {
  std::set<std::string> seen;
  for (const auto& [q, p] : pairs_) {
    if (q.empty() || p.empty()) throw std::invalid_argument("chart: empty variable name");
    if (!seen.insert(q).second || !seen.insert(p).second) {
      throw std::invalid_argument("chart: variable appears more than once");
    }
  }
}

std::vector<std::string> Chart::coordinates() const {
  std::vector<std::string> out;
  for (const auto& pr : pairs_) out.push_back(pr.first);
  return out;
}

std::vector<std::string> Chart::momenta() const {
  std::vector<std::string> out;
  for (const auto& pr : pairs_) out.push_back(pr.second);
  return out;
}

std::vector<std::string> Chart::variables() const {
  auto out = coordinates();
  const auto mom = momenta();
  out.insert(out.end(), mom.begin(), mom.end());
  return out;
}

bool Chart::contains(std::string_view name) const {
  return std::any_of(pairs_.begin(), pairs_.end(),
                     [&](const Pair& pr) { return pr.first == name || pr.second == name; });
}

Eigen::MatrixXd Chart::poisson_matrix() const {
  const auto n = static_cast<Eigen::Index>(pairs_.size());
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  j.topRightCorner(n, n) = Eigen::MatrixXd::Identity(n, n);
  j.bottomLeftCorner(n, n) = -Eigen::MatrixXd::Identity(n, n);
  return j;
}

// ---------------------------------------------------------------------------

Expr determinant(const ExprMatrix& m) {
  const std::size_t n = m.size();
  if (n == 0) return Expr(1);
  for (const auto& row : m) {
    if (row.size() != n) throw std::invalid_argument("determinant: matrix is not square");
  }
  if (n == 1) return m[0][0];
  if (n == 2) return m[0][0] * m[1][1] - m[0][1] * m[1][0];
  Expr det;
  for (std::size_t j = 0; j < n; ++j) {
    if (m[0][j].is_zero()) continue;
    ExprMatrix minor;
    for (std::size_t i = 1; i < n; ++i) {
      std::vector<Expr> row;
      for (std::size_t k = 0; k < n; ++k) {
        if (k != j) row.push_back(m[i][k]);
      }
      minor.push_back(std::move(row));
    }
    const Expr term = m[0][j] * determinant(minor);
    det = (j % 2 == 0) ? det + term : det - term;
  }
  return det;
}

ExprMatrix inverse(const ExprMatrix& m) {
  const std::size_t n = m.size();
  const Expr det = determinant(m);
  if (det.is_zero()) throw BracketError("matrix is singular");
  const Expr inv_det = pow(det, -1);
  ExprMatrix out(n, std::vector<Expr>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      // cofactor of (j, i) gives the adjugate entry (i, j)
      ExprMatrix minor;
      for (std::size_t r = 0; r < n; ++r) {
        if (r == j) continue;
        std::vector<Expr> row;
        for (std::size_t c = 0; c < n; ++c) {
          if (c != i) row.push_back(m[r][c]);
        }
        minor.push_back(std::move(row));
      }
      const Expr cof = determinant(minor);
      out[i][j] = ((i + j) % 2 == 0 ? cof : -cof) * inv_det;
    }
  }
  return out;
}

ExprMatrix multiply(const ExprMatrix& a, const ExprMatrix& b) {
  const std::size_t n = a.size();
  const std::size_t k = b.size();
  const std::size_t m = k ? b[0].size() : 0;
  ExprMatrix out(n, std::vector<Expr>(m));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      Expr s;
      for (std::size_t l = 0; l < k; ++l) s += a[i][l] * b[l][j];
      out[i][j] = s;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

void check_in_chart(const Expr& e, const Chart& chart, const Context& ctx) {
  for (const auto& s : free_symbols(e)) {
    const auto kind = ctx.symbol_kind(s);
    const bool canonical = kind && (*kind == SymbolKind::Coordinate || *kind == SymbolKind::Momentum);
    if (canonical && !chart.contains(s)) {
      throw BracketError("variable '" + s + "' is not part of the chart");
    }
  }
}

}  // namespace

Expr poisson(const Expr& f, const Expr& g, const Chart& chart, const Context& ctx) {
  check_in_chart(f, chart, ctx);
  check_in_chart(g, chart, ctx);
  Expr out;
  for (const auto& [q, p] : chart.pairs()) {
    const Expr fq = diff(f, q, ctx);
    const Expr fp = diff(f, p, ctx);
    if (fq.is_zero() && fp.is_zero()) continue;
    out += fq * diff(g, p, ctx) - fp * diff(g, q, ctx);
  }
  return out;
}

ConstraintMatrix ConstraintMatrix::build(std::vector<Expr> constraints, const Chart& chart,
                                         const Context& ctx) {
  ConstraintMatrix cm;
  cm.constraints = std::move(constraints);
  const std::size_t n = cm.constraints.size();
  cm.delta.assign(n, std::vector<Expr>(n));
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      cm.delta[a][b] = poisson(cm.constraints[a], cm.constraints[b], chart, ctx);
      cm.delta[b][a] = -cm.delta[a][b];
    }
  }
  if (determinant(cm.delta).is_zero()) {
    std::string report = "constraint matrix is singular; first-class constraints present:";
    for (std::size_t a = 0; a < n; ++a) {
      const bool row_zero =
          std::all_of(cm.delta[a].begin(), cm.delta[a].end(), [](const Expr& e) { return e.is_zero(); });
      if (row_zero) report += " [" + std::to_string(a) + "] " + render(cm.constraints[a]) + ";";
    }
    throw BracketError(report);
  }
  cm.inverse = extps::inverse(cm.delta);
  return cm;
}

Expr dirac(const Expr& f, const Expr& g, const ConstraintMatrix& cm, const Chart& chart,
           const Context& ctx) {
  Expr out = poisson(f, g, chart, ctx);
  const std::size_t n = cm.constraints.size();
  std::vector<Expr> f_phi(n);
  std::vector<Expr> phi_g(n);
  for (std::size_t a = 0; a < n; ++a) {
    f_phi[a] = poisson(f, cm.constraints[a], chart, ctx);
    phi_g[a] = poisson(cm.constraints[a], g, chart, ctx);
  }
  for (std::size_t a = 0; a < n; ++a) {
    if (f_phi[a].is_zero()) continue;
    for (std::size_t b = 0; b < n; ++b) {
      if (cm.inverse[a][b].is_zero() || phi_g[b].is_zero()) continue;
      out -= f_phi[a] * cm.inverse[a][b] * phi_g[b];
    }
  }
  return out;
}

std::vector<std::pair<std::string, Expr>> hamilton_eom(const Expr& h, const Chart& chart,
                                                       const Context& ctx, BracketKind kind,
                                                       const ConstraintMatrix* cm) {
  if (kind == BracketKind::Dirac && !cm) throw BracketError("Dirac bracket needs a constraint matrix");
  std::vector<std::pair<std::string, Expr>> out;
  for (const auto& v : chart.variables()) {
    const Expr x = Expr::symbol(v);
    out.emplace_back(v, kind == BracketKind::Poisson ? poisson(x, h, chart, ctx)
                                                     : dirac(x, h, *cm, chart, ctx));
  }
  return out;
}

}  // namespace extps
