#include "extps/expr.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>
#include <utility>

#include "extps/profile.hpp"

namespace extps {

namespace {

int cmp_int(long long a, long long b) { return a < b ? -1 : (a > b ? 1 : 0); }

int compare_monomial(const Monomial& a, const Monomial& b) {
  const std::size_t n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (int c = compare(*a[i].base, *b[i].base); c != 0) return c;
    if (int c = cmp_int(a[i].exponent, b[i].exponent); c != 0) return c;
  }
  return cmp_int(static_cast<long long>(a.size()), static_cast<long long>(b.size()));
}

struct MonomialLess {
  bool operator()(const Monomial& a, const Monomial& b) const {
    return compare_monomial(a, b) < 0;
  }
};

Monomial multiply_monomials(const Monomial& a, const Monomial& b) {
  Monomial out;
  out.reserve(a.size() + b.size());
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < a.size() || j < b.size()) {
    if (j == b.size()) {
      out.push_back(a[i++]);
    } else if (i == a.size()) {
      out.push_back(b[j++]);
    } else {
      const int c = compare(*a[i].base, *b[j].base);
      if (c < 0) {
        out.push_back(a[i++]);
      } else if (c > 0) {
        out.push_back(b[j++]);
      } else {
        const int e = a[i].exponent + b[j].exponent;
        if (e != 0) out.push_back({a[i].base, e});
        ++i;
        ++j;
      }
    }
  }
  return out;
}

Monomial scale_exponents(const Monomial& m, int k) {
  Monomial out;
  if (k == 0) return out;
  out.reserve(m.size());
  for (const auto& f : m) out.push_back({f.base, f.exponent * k});
  return out;
}

Rational rational_pow(const Rational& r, int n) {
  if (n < 0) {
    if (r == 0) throw std::domain_error("division by zero");
    return rational_pow(Rational(1) / r, -n);
  }
  Rational out = 1;
  Rational b = r;
  unsigned k = static_cast<unsigned>(n);
  while (k) {
    if (k & 1U) out *= b;
    b *= b;
    k >>= 1U;
  }
  return out;
}

double to_double(const Rational& r) { return r.convert_to<double>(); }

double ipow(double x, int k) {
  if (k < 0) return 1.0 / ipow(x, -k);
  double out = 1.0;
  double b = x;
  while (k) {
    if (k & 1) out *= b;
    b *= b;
    k >>= 1;
  }
  return out;
}

BasePtr make_symbol_base(std::string name) {
  auto b = std::make_shared<BaseNode>();
  b->kind = BaseNode::Kind::Symbol;
  b->name = std::move(name);
  return b;
}

BasePtr make_atom_base(std::string name, std::string arg, int order) {
  auto b = std::make_shared<BaseNode>();
  b->kind = BaseNode::Kind::Atom;
  b->name = std::move(name);
  b->arg = std::move(arg);
  b->order = order;
  return b;
}

BasePtr make_inverse_base(Expr sum) {
  auto b = std::make_shared<BaseNode>();
  b->kind = BaseNode::Kind::InverseSum;
  b->sum = std::move(sum);
  return b;
}

}  // namespace

// ---------------------------------------------------------------------------
// Canonical construction

Expr make_expr(std::vector<Term> terms) {
  std::sort(terms.begin(), terms.end(), [](const Term& a, const Term& b) {
    return compare_monomial(a.monomial, b.monomial) < 0;
  });
  std::vector<Term> out;
  out.reserve(terms.size());
  for (auto& t : terms) {
    if (!out.empty() && compare_monomial(out.back().monomial, t.monomial) == 0) {
      out.back().coeff += t.coeff;
    } else {
      out.push_back(std::move(t));
    }
  }
  std::erase_if(out, [](const Term& t) { return t.coeff == 0; });
  return Expr(std::move(out));
}

namespace {

// Products and sums without the inverse-sum cancellation pass.
Expr add_raw(const Expr& a, const Expr& b) {
  if (a.is_zero()) return b;
  if (b.is_zero()) return a;
  std::vector<Term> terms = a.terms();
  terms.insert(terms.end(), b.terms().begin(), b.terms().end());
  return make_expr(std::move(terms));
}

Expr mul_raw(const Expr& a, const Expr& b) {
  if (a.is_zero() || b.is_zero()) return Expr();
  std::map<Monomial, Rational, MonomialLess> acc;
  for (const auto& ta : a.terms()) {
    for (const auto& tb : b.terms()) {
      auto mono = multiply_monomials(ta.monomial, tb.monomial);
      auto [it, inserted] = acc.try_emplace(std::move(mono), ta.coeff * tb.coeff);
      if (!inserted) it->second += ta.coeff * tb.coeff;
    }
  }
  std::vector<Term> terms;
  terms.reserve(acc.size());
  for (auto& [mono, c] : acc) {
    if (c != 0) terms.push_back(Term{c, mono});
  }
  return make_expr(std::move(terms));
}

Expr pow_raw(const Expr& base, int k) {
  Expr out(1);
  for (int i = 0; i < k; ++i) out = mul_raw(out, base);
  return out;
}

Expr monomial_expr(const Monomial& m) { return make_expr({Term{1, m}}); }

// A single term as an expression. Opaque sums with a positive exponent (which
// only arise from inverting a monomial) are expanded back into the sum.
Expr term_expr(const Rational& coeff, const Monomial& mono) {
  Monomial kept;
  std::vector<std::pair<Expr, int>> expand;
  for (const auto& f : mono) {
    if (f.base->kind == BaseNode::Kind::InverseSum && f.exponent > 0) {
      expand.emplace_back(f.base->sum, f.exponent);
    } else {
      kept.push_back(f);
    }
  }
  Expr out = make_expr({Term{coeff, std::move(kept)}});
  for (const auto& [sum, k] : expand) out = mul_raw(out, pow_raw(sum, k));
  return out;
}

// Lexicographic order on exponent vectors (bases in canonical order).
bool lex_less(const Monomial& a, const Monomial& b) {
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < a.size() || j < b.size()) {
    if (j == b.size()) return a[i].exponent < 0;
    if (i == a.size()) return b[j].exponent > 0;
    const int c = compare(*a[i].base, *b[j].base);
    if (c < 0) return a[i].exponent < 0;
    if (c > 0) return b[j].exponent > 0;
    if (a[i].exponent != b[j].exponent) return a[i].exponent < b[j].exponent;
    ++i;
    ++j;
  }
  return false;
}

const Term& leading_term(const Expr& e) {
  const auto& t = e.terms();
  return *std::max_element(t.begin(), t.end(),
                           [](const Term& x, const Term& y) { return lex_less(x.monomial, y.monomial); });
}

// Exact quotient n / d for polynomials with non-negative exponents, or
// nothing when d does not divide n.
std::optional<Expr> exact_quotient(Expr n, const Expr& d) {
  const Term& ld = leading_term(d);
  const Monomial ld_inv = scale_exponents(ld.monomial, -1);
  Expr q;
  for (int guard = 0; !n.is_zero(); ++guard) {
    if (guard > 100000) return std::nullopt;
    const Term& ln = leading_term(n);
    Monomial m = multiply_monomials(ln.monomial, ld_inv);
    if (std::any_of(m.begin(), m.end(), [](const Factor& f) { return f.exponent < 0; })) return std::nullopt;
    const Expr t = make_expr({Term{ln.coeff / ld.coeff, std::move(m)}});
    q = add_raw(q, t);
    n = add_raw(n, -mul_raw(t, d));
  }
  return q;
}

int exponent_of(const Monomial& m, const BaseNode& b) {
  for (const auto& f : m) {
    if (compare(*f.base, b) == 0) return f.exponent;
  }
  return 0;
}

Monomial without(const Monomial& m, const BaseNode& b) {
  Monomial out;
  for (const auto& f : m) {
    if (compare(*f.base, b) != 0) out.push_back(f);
  }
  return out;
}

// Expands opaque sums that ended up with a positive exponent.
Expr expand_positive(const Expr& e) {
  const bool any = std::any_of(e.terms().begin(), e.terms().end(), [](const Term& t) {
    return std::any_of(t.monomial.begin(), t.monomial.end(), [](const Factor& f) {
      return f.base->kind == BaseNode::Kind::InverseSum && f.exponent > 0;
    });
  });
  if (!any) return e;
  Expr out;
  for (const auto& t : e.terms()) out = add_raw(out, term_expr(t.coeff, t.monomial));
  return out;
}

// Cancels S^-k against a numerator that is an exact multiple of S, e.g.
// m*(m - 3)^-1 - 3*(m - 3)^-1 -> 1.
Expr cancel_inverse_sums(Expr e) {
  for (int round = 0; round < 64; ++round) {
    std::vector<BasePtr> candidates;
    for (const auto& t : e.terms()) {
      for (const auto& f : t.monomial) {
        if (f.base->kind != BaseNode::Kind::InverseSum || f.exponent >= 0) continue;
        const bool seen = std::any_of(candidates.begin(), candidates.end(),
                                      [&](const BasePtr& b) { return compare(*b, *f.base) == 0; });
        if (!seen) candidates.push_back(f.base);
      }
    }
    bool changed = false;
    for (const auto& s : candidates) {
      int kmin = 0;
      for (const auto& t : e.terms()) kmin = std::min(kmin, exponent_of(t.monomial, *s));
      Expr n;
      for (const auto& t : e.terms()) {
        const Expr rest = make_expr({Term{t.coeff, without(t.monomial, *s)}});
        n = add_raw(n, mul_raw(rest, pow_raw(s->sum, exponent_of(t.monomial, *s) - kmin)));
      }
      // Shift to non-negative exponents so polynomial division applies.
      std::map<BasePtr, int, bool (*)(const BasePtr&, const BasePtr&)> lowest(
          [](const BasePtr& x, const BasePtr& y) { return compare(*x, *y) < 0; });
      for (const auto& t : n.terms()) {
        for (const auto& f : t.monomial) {
          if (f.exponent < 0) {
            auto [it, fresh] = lowest.try_emplace(f.base, f.exponent);
            if (!fresh) it->second = std::min(it->second, f.exponent);
          }
        }
      }
      Monomial shift;
      for (const auto& [b, k] : lowest) shift.push_back({b, -k});
      Expr cur = mul_raw(n, monomial_expr(shift));
      int divided = 0;
      while (divided < -kmin) {
        auto q = exact_quotient(cur, s->sum);
        if (!q) break;
        cur = std::move(*q);
        ++divided;
      }
      if (divided == 0) continue;
      Monomial back = scale_exponents(shift, -1);
      if (kmin + divided != 0) back = multiply_monomials(back, {Factor{s, kmin + divided}});
      e = expand_positive(mul_raw(cur, monomial_expr(back)));
      changed = true;
      break;
    }
    if (!changed) break;
  }
  return e;
}

bool has_inverse_sum(const Expr& e) {
  return std::any_of(e.terms().begin(), e.terms().end(), [](const Term& t) {
    return std::any_of(t.monomial.begin(), t.monomial.end(), [](const Factor& f) {
      return f.base->kind == BaseNode::Kind::InverseSum && f.exponent < 0;
    });
  });
}

}  // namespace


namespace {

struct SplitSum {
  Expr prefactor;   // single term: content monomial times leading coefficient
  Expr normalised;  // multi-term sum with leading coefficient 1
};

// Pull out the monomial content and the leading coefficient so that the
// remaining sum is unique for the rational function it represents.
SplitSum split_sum(const Expr& e) {
  const auto& terms = e.terms();
  std::map<BasePtr, int, bool (*)(const BasePtr&, const BasePtr&)> content(
      [](const BasePtr& x, const BasePtr& y) { return compare(*x, *y) < 0; });
  for (const auto& t : terms) {
    for (const auto& f : t.monomial) content.try_emplace(f.base, 0);
  }
  for (auto& [b, minexp] : content) {
    bool first = true;
    for (const auto& t : terms) {
      int k = 0;
      for (const auto& f : t.monomial) {
        if (compare(*f.base, *b) == 0) k = f.exponent;
      }
      minexp = first ? k : std::min(minexp, k);
      first = false;
    }
  }
  Monomial content_mono;
  Monomial inverse_content;
  for (const auto& [b, k] : content) {
    if (k != 0) {
      content_mono.push_back({b, k});
      inverse_content.push_back({b, -k});
    }
  }
  std::vector<Term> reduced;
  reduced.reserve(terms.size());
  for (const auto& t : terms) {
    reduced.push_back(Term{t.coeff, multiply_monomials(t.monomial, inverse_content)});
  }
  Expr q = make_expr(std::move(reduced));
  const Rational lc = q.terms().front().coeff;
  return {term_expr(lc, content_mono), q * Expr(Rational(1) / lc)};
}

}  // namespace

Expr::Expr() : terms_(std::make_shared<const std::vector<Term>>()) {}

Expr::Expr(std::vector<Term> canonical_terms)
    : terms_(std::make_shared<const std::vector<Term>>(std::move(canonical_terms))) {}

Expr::Expr(Rational value) : Expr() {
  if (value != 0) terms_ = std::make_shared<const std::vector<Term>>(std::vector<Term>{Term{value, {}}});
}

Expr::Expr(int value) : Expr(Rational(value)) {}

Expr Expr::symbol(std::string name) {
  return Expr(std::vector<Term>{Term{1, {Factor{make_symbol_base(std::move(name)), 1}}}});
}

Expr Expr::atom(std::string name, std::string arg, int order) {
  return Expr(std::vector<Term>{
      Term{1, {Factor{make_atom_base(std::move(name), std::move(arg), order), 1}}}});
}

Expr Expr::from_double(double value) {
  if (!std::isfinite(value)) throw std::invalid_argument("non-finite constant");
  return Expr(Rational(value));
}

bool Expr::is_constant() const {
  return terms_->empty() || (terms_->size() == 1 && terms_->front().monomial.empty());
}

Rational Expr::constant_value() const {
  if (!is_constant()) throw std::logic_error("expression is not constant: " + str());
  return terms_->empty() ? Rational(0) : terms_->front().coeff;
}

const BaseNode* Expr::as_leaf() const {
  if (terms_->size() != 1) return nullptr;
  const Term& t = terms_->front();
  if (t.coeff != 1 || t.monomial.size() != 1 || t.monomial[0].exponent != 1) return nullptr;
  const BaseNode* b = t.monomial[0].base.get();
  return b->kind == BaseNode::Kind::InverseSum ? nullptr : b;
}

std::string Expr::str() const { return render(*this); }

Expr operator+(const Expr& a, const Expr& b) {
  if (a.is_zero()) return b;
  if (b.is_zero()) return a;
  Expr out = add_raw(a, b);
  return has_inverse_sum(out) ? cancel_inverse_sums(std::move(out)) : out;
}

Expr operator-(const Expr& a) {
  std::vector<Term> terms = a.terms();
  for (auto& t : terms) t.coeff = -t.coeff;
  return Expr(std::move(terms));
}

Expr operator-(const Expr& a, const Expr& b) { return a + (-b); }

Expr operator*(const Expr& a, const Expr& b) {
  Expr out = mul_raw(a, b);
  return has_inverse_sum(out) && out.terms().size() > 1 ? cancel_inverse_sums(std::move(out)) : out;
}

Expr pow(const Expr& base, int exponent) {
  if (exponent == 0) return Expr(1);
  if (exponent > 0) {
    Expr out(1);
    Expr b = base;
    unsigned k = static_cast<unsigned>(exponent);
    while (k) {
      if (k & 1U) out = out * b;
      k >>= 1U;
      if (k) b = b * b;
    }
    return out;
  }
  if (base.is_zero()) throw std::domain_error("division by zero");
  const auto& terms = base.terms();
  if (terms.size() == 1) {
    return term_expr(rational_pow(terms[0].coeff, exponent),
                     scale_exponents(terms[0].monomial, exponent));
  }
  const SplitSum split = split_sum(base);
  return pow(split.prefactor, exponent) *
         make_expr({Term{1, {Factor{make_inverse_base(split.normalised), exponent}}}});
}

Expr operator/(const Expr& a, const Expr& b) {
  // Exact cancellation when numerator and denominator share the same
  // normalised sum, e.g. (2*x + 2*y)/(x + y).
  if (a.terms().size() > 1 && b.terms().size() > 1) {
    const SplitSum sa = split_sum(a);
    const SplitSum sb = split_sum(b);
    if (sa.normalised == sb.normalised) return sa.prefactor * pow(sb.prefactor, -1);
  }
  return a * pow(b, -1);
}

bool operator==(const Expr& a, const Expr& b) { return compare(a, b) == 0; }

int compare(const BaseNode& a, const BaseNode& b) {
  if (&a == &b) return 0;
  if (int c = cmp_int(static_cast<int>(a.kind), static_cast<int>(b.kind)); c != 0) return c;
  switch (a.kind) {
    case BaseNode::Kind::Symbol:
      return a.name.compare(b.name) < 0 ? -1 : (a.name == b.name ? 0 : 1);
    case BaseNode::Kind::Atom:
      if (a.name != b.name) return a.name < b.name ? -1 : 1;
      if (a.order != b.order) return a.order < b.order ? -1 : 1;
      if (a.arg != b.arg) return a.arg < b.arg ? -1 : 1;
      return 0;
    case BaseNode::Kind::InverseSum:
      return compare(a.sum, b.sum);
  }
  return 0;
}

int compare(const Expr& a, const Expr& b) {
  const auto& ta = a.terms();
  const auto& tb = b.terms();
  if (&ta == &tb) return 0;
  const std::size_t n = std::min(ta.size(), tb.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (int c = compare_monomial(ta[i].monomial, tb[i].monomial); c != 0) return c;
    if (ta[i].coeff != tb[i].coeff) return ta[i].coeff < tb[i].coeff ? -1 : 1;
  }
  return cmp_int(static_cast<long long>(ta.size()), static_cast<long long>(tb.size()));
}

// ---------------------------------------------------------------------------
// Context

void Context::check_unfrozen() const {
  if (frozen_) throw std::logic_error("context is frozen");
}

void Context::declare_symbol(const std::string& name, SymbolKind kind) {
  check_unfrozen();
  if (atoms_.count(name)) throw std::invalid_argument("'" + name + "' already declared as an atom");
  symbols_[name] = kind;
}

void Context::declare_atom(CoefficientAtom atom) {
  check_unfrozen();
  if (symbols_.count(atom.name)) {
    throw std::invalid_argument("'" + atom.name + "' already declared as a symbol");
  }
  std::string name = atom.name;
  atoms_[name] = std::move(atom);
}

void Context::set_profile(const std::string& atom_name, std::shared_ptr<const Profile> profile) {
  check_unfrozen();
  auto it = atoms_.find(atom_name);
  if (it == atoms_.end()) throw std::invalid_argument("unknown atom '" + atom_name + "'");
  it->second.profile = std::move(profile);
}

std::optional<SymbolKind> Context::symbol_kind(std::string_view name) const {
  auto it = symbols_.find(name);
  if (it == symbols_.end()) return std::nullopt;
  return it->second;
}

const CoefficientAtom* Context::atom(std::string_view name) const {
  auto it = atoms_.find(name);
  return it == atoms_.end() ? nullptr : &it->second;
}

ParseError::ParseError(const std::string& what, std::size_t offset)
    : std::runtime_error(what + " at offset " + std::to_string(offset)), offset_(offset) {}

// ---------------------------------------------------------------------------
// Differentiation and substitution

namespace {

Expr diff_base(const BaseNode& b, const BaseNode& wrt, const Context& ctx);

Expr diff_impl(const Expr& e, const BaseNode& wrt, const Context& ctx) {
  Expr out;
  for (const auto& t : e.terms()) {
    for (std::size_t i = 0; i < t.monomial.size(); ++i) {
      const Factor& f = t.monomial[i];
      Expr db = diff_base(*f.base, wrt, ctx);
      if (db.is_zero()) continue;
      Monomial rest = t.monomial;
      if (f.exponent == 1) {
        rest.erase(rest.begin() + static_cast<std::ptrdiff_t>(i));
      } else {
        rest[i].exponent -= 1;
      }
      out = add_raw(out, mul_raw(term_expr(t.coeff * f.exponent, rest), db));
    }
  }
  return has_inverse_sum(out) ? cancel_inverse_sums(std::move(out)) : out;
}

Expr diff_base(const BaseNode& b, const BaseNode& wrt, const Context& ctx) {
  switch (b.kind) {
    case BaseNode::Kind::Symbol:
      return (wrt.kind == BaseNode::Kind::Symbol && wrt.name == b.name) ? Expr(1) : Expr();
    case BaseNode::Kind::Atom:
      if (wrt.kind == BaseNode::Kind::Atom) return compare(b, wrt) == 0 ? Expr(1) : Expr();
      if (b.arg == wrt.name) return atom_derivative(b.name, b.order, b.arg, ctx);
      return Expr();
    case BaseNode::Kind::InverseSum:
      return diff_impl(b.sum, wrt, ctx);
  }
  return Expr();
}

template <class Fn>
Expr map_bases(const Expr& e, Fn&& fn) {
  Expr out;
  for (const auto& t : e.terms()) {
    Expr term(t.coeff);
    for (const auto& f : t.monomial) term = term * pow(fn(*f.base), f.exponent);
    out += term;
  }
  return out;
}

void collect_symbols(const Expr& e, std::set<std::string>& out) {
  for (const auto& t : e.terms()) {
    for (const auto& f : t.monomial) {
      switch (f.base->kind) {
        case BaseNode::Kind::Symbol: out.insert(f.base->name); break;
        case BaseNode::Kind::Atom: out.insert(f.base->arg); break;
        case BaseNode::Kind::InverseSum: collect_symbols(f.base->sum, out); break;
      }
    }
  }
}

}  // namespace

Expr diff(const Expr& e, std::string_view var, const Context& ctx) {
  BaseNode wrt;
  wrt.kind = BaseNode::Kind::Symbol;
  wrt.name = std::string(var);
  return diff_impl(e, wrt, ctx);
}

Expr diff(const Expr& e, const Expr& wrt, const Context& ctx) {
  const BaseNode* leaf = wrt.as_leaf();
  if (!leaf) throw std::invalid_argument("can only differentiate with respect to a symbol or atom");
  return diff_impl(e, *leaf, ctx);
}

Expr atom_derivative(const std::string& name, int order, const std::string& arg,
                     const Context& ctx) {
  const CoefficientAtom* a = ctx.atom(name);
  if (!a || !a->derivative_rule) return Expr::atom(name, arg, order + 1);
  Expr d = substitute(*a->derivative_rule, {{a->rule_arg, Expr::symbol(arg)}});
  for (int k = 0; k < order; ++k) d = diff(d, arg, ctx);
  return d;
}

Expr substitute(const Expr& e, const std::map<std::string, Expr, std::less<>>& repl) {
  if (repl.empty()) return e;
  return map_bases(e, [&](const BaseNode& b) -> Expr {
    switch (b.kind) {
      case BaseNode::Kind::Symbol: {
        auto it = repl.find(b.name);
        return it == repl.end() ? Expr::symbol(b.name) : it->second;
      }
      case BaseNode::Kind::Atom: {
        auto it = repl.find(b.arg);
        if (it == repl.end()) return Expr::atom(b.name, b.arg, b.order);
        const BaseNode* leaf = it->second.as_leaf();
        if (!leaf || leaf->kind != BaseNode::Kind::Symbol) {
          throw std::invalid_argument("atom argument '" + b.arg + "' can only be renamed to a symbol");
        }
        return Expr::atom(b.name, leaf->name, b.order);
      }
      case BaseNode::Kind::InverseSum:
        return substitute(b.sum, repl);
    }
    return Expr();
  });
}

Expr simplify(const Expr& e) {
  return map_bases(e, [](const BaseNode& b) -> Expr {
    switch (b.kind) {
      case BaseNode::Kind::Symbol: return Expr::symbol(b.name);
      case BaseNode::Kind::Atom: return Expr::atom(b.name, b.arg, b.order);
      case BaseNode::Kind::InverseSum: return simplify(b.sum);
    }
    return Expr();
  });
}

Expr rebind_atom_args(const Expr& e, const std::string& arg) {
  return map_bases(e, [&](const BaseNode& b) -> Expr {
    switch (b.kind) {
      case BaseNode::Kind::Symbol: return Expr::symbol(b.name);
      case BaseNode::Kind::Atom: return Expr::atom(b.name, arg, b.order);
      case BaseNode::Kind::InverseSum: return rebind_atom_args(b.sum, arg);
    }
    return Expr();
  });
}

std::set<std::string> free_symbols(const Expr& e) {
  std::set<std::string> out;
  collect_symbols(e, out);
  return out;
}

bool depends_on(const Expr& e, std::string_view var) {
  for (const auto& t : e.terms()) {
    for (const auto& f : t.monomial) {
      const BaseNode& b = *f.base;
      if (b.kind == BaseNode::Kind::Symbol && b.name == var) return true;
      if (b.kind == BaseNode::Kind::Atom && b.arg == var) return true;
      if (b.kind == BaseNode::Kind::InverseSum && depends_on(b.sum, var)) return true;
    }
  }
  return false;
}

bool is_polynomial_in(const Expr& e, std::string_view var) {
  for (const auto& t : e.terms()) {
    for (const auto& f : t.monomial) {
      const BaseNode& b = *f.base;
      if (b.kind == BaseNode::Kind::Symbol && b.name == var && f.exponent < 0) return false;
      if (b.kind == BaseNode::Kind::Atom && b.arg == var) return false;
      if (b.kind == BaseNode::Kind::InverseSum && depends_on(b.sum, var)) return false;
    }
  }
  return true;
}

Expr integrate_polynomial(const Expr& e, std::string_view var) {
  if (!is_polynomial_in(e, var)) {
    throw std::invalid_argument("expression is not polynomial in " + std::string(var));
  }
  const Expr v = Expr::symbol(std::string(var));
  Expr out;
  for (const auto& t : e.terms()) {
    int k = 0;
    for (const auto& f : t.monomial) {
      if (f.base->kind == BaseNode::Kind::Symbol && f.base->name == var) k = f.exponent;
    }
    out += term_expr(t.coeff / (k + 1), t.monomial) * v;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Rendering

namespace {

std::string render_rational(const Rational& r) {
  std::ostringstream os;
  os << numerator(r);
  if (denominator(r) != 1) os << "/" << denominator(r);
  return os.str();
}

std::string render_base(const BaseNode& b) {
  switch (b.kind) {
    case BaseNode::Kind::Symbol: return b.name;
    case BaseNode::Kind::Atom:
      return b.name + (b.order > 0 ? "_d" + std::to_string(b.order) : std::string()) + "(" + b.arg + ")";
    case BaseNode::Kind::InverseSum: return "(" + render(b.sum) + ")";
  }
  return {};
}

std::string render_monomial(const Monomial& m) {
  std::string out;
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (i) out += "*";
    out += render_base(*m[i].base);
    if (m[i].exponent != 1) out += "^" + std::to_string(m[i].exponent);
  }
  return out;
}

}  // namespace

std::string render(const Expr& e) {
  if (e.is_zero()) return "0";
  std::string out;
  bool first = true;
  for (const auto& t : e.terms()) {
    Rational c = t.coeff;
    if (first) {
      if (c < 0) {
        out += "-";
        c = -c;
      }
    } else {
      out += c < 0 ? " - " : " + ";
      if (c < 0) c = -c;
    }
    first = false;
    if (t.monomial.empty()) {
      out += render_rational(c);
    } else if (c == 1) {
      out += render_monomial(t.monomial);
    } else {
      out += render_rational(c) + "*" + render_monomial(t.monomial);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Parsing (Pratt)

namespace {

class Parser {
 public:
  Parser(std::string_view text, const Context& ctx) : text_(text), ctx_(ctx) {}

  Expr parse_all() {
    Expr e = expression(0);
    skip_ws();
    if (pos_ < text_.size()) fail("unexpected '" + std::string(1, text_[pos_]) + "'");
    return e;
  }

 private:
  static constexpr int kAdd = 10;
  static constexpr int kMul = 20;
  static constexpr int kUnary = 30;
  static constexpr int kPow = 40;

  [[noreturn]] void fail(const std::string& msg) const { throw ParseError("syntax error: " + msg, pos_); }
  [[noreturn]] void fail_at(const std::string& msg, std::size_t at) const { throw ParseError(msg, at); }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  char peek() {
    skip_ws();
    return pos_ < text_.size() ? text_[pos_] : '\0';
  }

  static int infix_power(char op) {
    switch (op) {
      case '+':
      case '-': return kAdd;
      case '*':
      case '/': return kMul;
      case '^': return kPow;
      default: return -1;
    }
  }

  Expr expression(int min_power) {
    Expr lhs = prefix();
    for (;;) {
      const char op = peek();
      const int power = infix_power(op);
      if (power < 0 || power <= min_power) break;
      const std::size_t op_pos = pos_;
      ++pos_;
      if (op == '^') {
        const std::size_t exp_pos = (skip_ws(), pos_);
        Expr rhs = expression(kPow - 1);  // right associative
        if (!rhs.is_constant()) fail_at("exponent must be an integer constant", exp_pos);
        const Rational r = rhs.constant_value();
        if (denominator(r) != 1 || abs(numerator(r)) > 1000) {
          fail_at("exponent must be a small integer", exp_pos);
        }
        try {
          lhs = pow(lhs, numerator(r).convert_to<int>());
        } catch (const std::domain_error&) {
          fail_at("division by zero", op_pos);
        }
        continue;
      }
      Expr rhs = expression(power);
      switch (op) {
        case '+': lhs = lhs + rhs; break;
        case '-': lhs = lhs - rhs; break;
        case '*': lhs = lhs * rhs; break;
        case '/':
          if (rhs.is_zero()) fail_at("division by zero", op_pos);
          lhs = lhs / rhs;
          break;
        default: break;
      }
    }
    return lhs;
  }

  Expr prefix() {
    const char c = peek();
    if (c == '\0') fail("unexpected end of input");
    if (c == '-') {
      ++pos_;
      return -expression(kUnary);
    }
    if (c == '+') {
      ++pos_;
      return expression(kUnary);
    }
    if (c == '(') {
      ++pos_;
      Expr inner = expression(0);
      if (peek() != ')') fail("expected ')'");
      ++pos_;
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c))) return identifier();
    fail("unexpected '" + std::string(1, c) + "'");
  }

  Expr number() {
    const std::size_t start = pos_;
    std::string digits;
    int decimals = 0;
    bool seen_dot = false;
    while (pos_ < text_.size()) {
      const char c = text_[pos_];
      if (std::isdigit(static_cast<unsigned char>(c))) {
        digits += c;
        if (seen_dot) ++decimals;
      } else if (c == '.' && !seen_dot) {
        seen_dot = true;
      } else {
        break;
      }
      ++pos_;
    }
    if (digits.empty()) fail_at("syntax error: malformed number", start);
    // a leading zero would select octal in cpp_int's string constructor
    const auto nz = digits.find_first_not_of('0');
    boost::multiprecision::cpp_int num(nz == std::string::npos ? std::string("0") : digits.substr(nz));
    boost::multiprecision::cpp_int den = 1;
    for (int i = 0; i < decimals; ++i) den *= 10;
    return Expr(Rational(num, den));
  }

  std::string name() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
      ++pos_;
    }
    return std::string(text_.substr(start, pos_ - start));
  }

  // "f" -> (f, 0); "f_d2" -> (f, 2) when f is an atom.
  std::optional<std::pair<std::string, int>> resolve_atom(const std::string& id) const {
    if (ctx_.atom(id)) return std::make_pair(id, 0);
    const auto at = id.rfind("_d");
    if (at == std::string::npos || at + 2 >= id.size()) return std::nullopt;
    const std::string digits = id.substr(at + 2);
    if (!std::all_of(digits.begin(), digits.end(), [](char ch) { return std::isdigit(static_cast<unsigned char>(ch)); })) {
      return std::nullopt;
    }
    const std::string base = id.substr(0, at);
    if (!ctx_.atom(base)) return std::nullopt;
    return std::make_pair(base, std::stoi(digits));
  }

  Expr identifier() {
    const std::size_t start = pos_;
    const std::string id = name();
    if (peek() == '(') {
      auto atom = resolve_atom(id);
      if (!atom) {
        if (ctx_.symbol_kind(id)) fail_at("'" + id + "' is not a function", start);
        fail_at("unknown identifier '" + id + "'", start);
      }
      ++pos_;
      skip_ws();
      const std::size_t arg_pos = pos_;
      if (pos_ >= text_.size() || !std::isalpha(static_cast<unsigned char>(text_[pos_]))) {
        fail("expected a variable name as atom argument");
      }
      const std::string arg = name();
      if (!ctx_.symbol_kind(arg)) fail_at("unknown identifier '" + arg + "'", arg_pos);
      if (peek() != ')') fail("expected ')'");
      ++pos_;
      return Expr::atom(atom->first, arg, atom->second);
    }
    if (!ctx_.symbol_kind(id)) {
      if (resolve_atom(id)) fail_at("atom '" + id + "' needs an argument", start);
      fail_at("unknown identifier '" + id + "'", start);
    }
    return Expr::symbol(id);
  }

  std::string_view text_;
  const Context& ctx_;
  std::size_t pos_ = 0;
};

}  // namespace

Expr parse(std::string_view text, const Context& ctx) { return Parser(text, ctx).parse_all(); }

// ---------------------------------------------------------------------------
// Numeric evaluation

namespace {

double eval_raw(const Expr& e, const LeafValue& leaf) {
  double sum = 0.0;
  for (const auto& t : e.terms()) {
    double v = to_double(t.coeff);
    for (const auto& f : t.monomial) {
      const double x = f.base->kind == BaseNode::Kind::InverseSum ? eval_raw(f.base->sum, leaf)
                                                                  : leaf(*f.base);
      v *= ipow(x, f.exponent);
    }
    sum += v;
  }
  return sum;
}

}  // namespace

double eval_with(const Expr& e, const LeafValue& leaf) {
  const double v = eval_raw(e, leaf);
  if (!std::isfinite(v)) throw EvalError("non-finite result evaluating " + render(e));
  return v;
}

double eval(const Expr& e, const Bindings& point, double time, const Context& ctx) {
  return eval_with(e, [&](const BaseNode& b) -> double {
    if (b.kind == BaseNode::Kind::Symbol) {
      auto it = point.find(b.name);
      if (it == point.end()) throw EvalError("unbound variable '" + b.name + "'");
      return it->second;
    }
    const CoefficientAtom* a = ctx.atom(b.name);
    if (!a || !a->profile) throw EvalError("no numeric profile for atom '" + b.name + "'");
    auto it = point.find(b.arg);
    return a->profile->value(it == point.end() ? time : it->second, b.order);
  });
}

double eval(const Expr& e, const Bindings& point, const Context& ctx) {
  return eval_with(e, [&](const BaseNode& b) -> double {
    if (b.kind == BaseNode::Kind::Symbol) {
      auto it = point.find(b.name);
      if (it == point.end()) throw EvalError("unbound variable '" + b.name + "'");
      return it->second;
    }
    const CoefficientAtom* a = ctx.atom(b.name);
    if (!a || !a->profile) throw EvalError("no numeric profile for atom '" + b.name + "'");
    auto it = point.find(b.arg);
    if (it == point.end()) throw EvalError("unbound atom argument '" + b.arg + "'");
    return a->profile->value(it->second, b.order);
  });
}

CompiledExpr::CompiledExpr(const Expr& e, std::span<const std::string> slots, const Context& ctx) {
  auto slot_of = [&](const std::string& name) {
    auto it = std::find(slots.begin(), slots.end(), name);
    if (it == slots.end()) throw EvalError("unbound variable '" + name + "'");
    return static_cast<int>(it - slots.begin());
  };
  for (const auto& t : e.terms()) {
    CTerm ct;
    ct.coeff = to_double(t.coeff);
    for (const auto& f : t.monomial) {
      CFactor cf;
      cf.exponent = f.exponent;
      switch (f.base->kind) {
        case BaseNode::Kind::Symbol:
          cf.kind = CFactor::Kind::Slot;
          cf.slot = slot_of(f.base->name);
          break;
        case BaseNode::Kind::Atom: {
          const CoefficientAtom* a = ctx.atom(f.base->name);
          if (!a || !a->profile) throw EvalError("no numeric profile for atom '" + f.base->name + "'");
          cf.kind = CFactor::Kind::Atom;
          cf.slot = slot_of(f.base->arg);
          cf.order = f.base->order;
          cf.profile = a->profile;
          break;
        }
        case BaseNode::Kind::InverseSum:
          cf.kind = CFactor::Kind::Sum;
          cf.sum = std::make_shared<const CompiledExpr>(f.base->sum, slots, ctx);
          break;
      }
      ct.factors.push_back(std::move(cf));
    }
    terms_.push_back(std::move(ct));
  }
}

double CompiledExpr::operator()(std::span<const double> values) const {
  double sum = 0.0;
  for (const auto& t : terms_) {
    double v = t.coeff;
    for (const auto& f : t.factors) {
      double x = 0.0;
      switch (f.kind) {
        case CFactor::Kind::Slot: x = values[static_cast<std::size_t>(f.slot)]; break;
        case CFactor::Kind::Atom: x = f.profile->value(values[static_cast<std::size_t>(f.slot)], f.order); break;
        case CFactor::Kind::Sum: x = (*f.sum)(values); break;
      }
      v *= ipow(x, f.exponent);
    }
    sum += v;
  }
  return sum;
}

}  // namespace extps
