#pragma once

// Symbolic phase-space expressions.
//
// Every Expr is held in a canonical form: an expanded sum of terms, each term
// an exact rational coefficient times a monomial of integer powers of bases.
// A base is a symbol, a coefficient-atom application such as f(t_tau), or an
// opaque multi-term sum carrying a negative exponent (what is left of a
// quotient by a sum). Terms are sorted and like terms merged, so structural
// equality is the equality test used by every golden comparison.

#include <boost/multiprecision/cpp_int.hpp>

#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace extps {

using Rational =
    boost::multiprecision::number<boost::multiprecision::cpp_rational_backend,
                                  boost::multiprecision::et_off>;

class Expr;
class Context;
class Profile;
struct BaseNode;
using BasePtr = std::shared_ptr<const BaseNode>;

struct Factor {
  BasePtr base;
  int exponent = 1;
};

using Monomial = std::vector<Factor>;

struct Term {
  Rational coeff;
  Monomial monomial;
};

class Expr {
 public:
  Expr();
  Expr(Rational value);  // NOLINT(google-explicit-constructor)
  Expr(int value);       // NOLINT(google-explicit-constructor)

  static Expr symbol(std::string name);
  static Expr atom(std::string name, std::string arg, int order = 0);
  /// Exact rational from a double (every finite double is a dyadic rational).
  static Expr from_double(double value);

  const std::vector<Term>& terms() const { return *terms_; }

  bool is_zero() const { return terms_->empty(); }
  bool is_constant() const;
  /// Value of a constant expression; throws if the expression is not constant.
  Rational constant_value() const;
  /// The single base of `x` or `f(t)`; nullptr otherwise.
  const BaseNode* as_leaf() const;

  std::string str() const;

  friend Expr operator+(const Expr& a, const Expr& b);
  friend Expr operator-(const Expr& a, const Expr& b);
  friend Expr operator*(const Expr& a, const Expr& b);
  friend Expr operator/(const Expr& a, const Expr& b);
  friend Expr operator-(const Expr& a);
  friend Expr pow(const Expr& base, int exponent);

  Expr& operator+=(const Expr& o) { return *this = *this + o; }
  Expr& operator-=(const Expr& o) { return *this = *this - o; }
  Expr& operator*=(const Expr& o) { return *this = *this * o; }

  friend bool operator==(const Expr& a, const Expr& b);
  friend bool operator!=(const Expr& a, const Expr& b) { return !(a == b); }

 private:
  explicit Expr(std::vector<Term> canonical_terms);
  friend Expr make_expr(std::vector<Term> terms);
  std::shared_ptr<const std::vector<Term>> terms_;
};

struct BaseNode {
  enum class Kind { Symbol, Atom, InverseSum };
  Kind kind = Kind::Symbol;
  std::string name;  // symbol or atom name
  std::string arg;   // atom argument variable
  int order = 0;     // atom derivative order
  Expr sum;          // InverseSum payload (normalised, multi-term)
};

/// Total order over expressions; 0 when structurally equal.
int compare(const Expr& a, const Expr& b);
int compare(const BaseNode& a, const BaseNode& b);

struct ExprLess {
  bool operator()(const Expr& a, const Expr& b) const { return compare(a, b) < 0; }
};

// ---------------------------------------------------------------------------
// Registry of symbols and coefficient atoms.

enum class SymbolKind { Coordinate, Momentum, Velocity, Parameter, Time };

struct CoefficientAtom {
  std::string name;
  /// First derivative expressed through other atoms applied to `rule_arg`.
  std::optional<Expr> derivative_rule;
  std::string rule_arg = "s";
  std::shared_ptr<const Profile> profile;
};

class Context {
 public:
  void declare_symbol(const std::string& name, SymbolKind kind);
  void declare_atom(CoefficientAtom atom);
  void set_profile(const std::string& atom_name, std::shared_ptr<const Profile> profile);
  /// After freezing, declarations throw; evaluation code can rely on a stable registry.
  void freeze() { frozen_ = true; }
  bool frozen() const { return frozen_; }

  std::optional<SymbolKind> symbol_kind(std::string_view name) const;
  const CoefficientAtom* atom(std::string_view name) const;
  const std::map<std::string, SymbolKind, std::less<>>& symbols() const { return symbols_; }
  const std::map<std::string, CoefficientAtom, std::less<>>& atoms() const { return atoms_; }

 private:
  void check_unfrozen() const;
  std::map<std::string, SymbolKind, std::less<>> symbols_;
  std::map<std::string, CoefficientAtom, std::less<>> atoms_;
  bool frozen_ = false;
};

// ---------------------------------------------------------------------------
// Errors

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t offset);
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

class EvalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Operations

Expr parse(std::string_view text, const Context& ctx);
/// Rebuilds an expression from its leaves. Expressions are kept canonical, so
/// this is the identity on values produced by this library; it normalises
/// hand-assembled term lists.
Expr simplify(const Expr& e);
std::string render(const Expr& e);

/// Partial derivative with respect to a declared symbol. Atoms whose argument
/// is `var` contribute through their registered rule (chain rule), or through
/// a fresh atom of one higher derivative order when no rule is registered.
Expr diff(const Expr& e, std::string_view var, const Context& ctx);
/// Derivative with respect to a symbol or an atom application treated as an
/// independent quantity. `wrt` must be a leaf.
Expr diff(const Expr& e, const Expr& wrt, const Context& ctx);

/// d^(order+1)/ds^(order+1) of atom `name` applied to `arg`.
Expr atom_derivative(const std::string& name, int order, const std::string& arg,
                     const Context& ctx);

/// Simultaneous substitution of symbols. An atom argument may only be renamed
/// to another symbol.
Expr substitute(const Expr& e, const std::map<std::string, Expr, std::less<>>& repl);
/// Every atom application re-pointed at `arg`.
Expr rebind_atom_args(const Expr& e, const std::string& arg);

std::set<std::string> free_symbols(const Expr& e);
bool depends_on(const Expr& e, std::string_view var);

/// True when every term has a non-negative power of `var` and `var` does not
/// hide inside an atom argument or an opaque sum.
bool is_polynomial_in(const Expr& e, std::string_view var);
/// Antiderivative in `var` with zero constant, for polynomial expressions.
Expr integrate_polynomial(const Expr& e, std::string_view var);

// ---------------------------------------------------------------------------
// Numeric evaluation

using Bindings = std::map<std::string, double, std::less<>>;
using LeafValue = std::function<double(const BaseNode&)>;

/// Evaluate with a caller-provided value for each symbol and atom leaf.
/// Throws EvalError on a non-finite result.
double eval_with(const Expr& e, const LeafValue& leaf);

/// Symbols come from `point`; an atom applied to an unbound argument is
/// evaluated at `time`.
double eval(const Expr& e, const Bindings& point, double time, const Context& ctx);
double eval(const Expr& e, const Bindings& point, const Context& ctx);

/// Flattened evaluator over a fixed slot layout, for integrator inner loops.
class CompiledExpr {
 public:
  CompiledExpr() = default;
  CompiledExpr(const Expr& e, std::span<const std::string> slots, const Context& ctx);
  double operator()(std::span<const double> values) const;

 private:
  struct CFactor {
    enum class Kind { Slot, Atom, Sum } kind = Kind::Slot;
    int slot = -1;
    int order = 0;
    std::shared_ptr<const Profile> profile;
    std::shared_ptr<const CompiledExpr> sum;
    int exponent = 1;
  };
  struct CTerm {
    double coeff = 0.0;
    std::vector<CFactor> factors;
  };
  std::vector<CTerm> terms_;
};

}  // namespace extps
