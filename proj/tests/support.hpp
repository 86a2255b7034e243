#pragma once

// Shared generators for the property tests.

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "extps/expr.hpp"

namespace extps::testing {

/// Random small rational in [-range, range] with denominators up to 4.
inline Rational random_rational(std::mt19937_64& rng, int range = 5) {
  std::uniform_int_distribution<int> num(-4 * range, 4 * range);
  std::uniform_int_distribution<int> den(1, 4);
  return Rational(num(rng), den(rng));
}

/// Random polynomial in `vars` with up to `terms` monomials of total degree <= max_degree.
inline Expr random_polynomial(std::mt19937_64& rng, const std::vector<std::string>& vars,
                              int terms = 3, int max_degree = 3) {
  std::uniform_int_distribution<std::size_t> pick(0, vars.size() - 1);
  std::uniform_int_distribution<int> deg(0, max_degree);
  Expr out;
  for (int i = 0; i < terms; ++i) {
    Expr mono(random_rational(rng));
    const int d = deg(rng);
    for (int k = 0; k < d; ++k) mono = mono * Expr::symbol(vars[pick(rng)]);
    out = out + mono;
  }
  return out;
}

/// Random expression tree mixing sums, products, integer powers and
/// quotients over the given leaves.
inline Expr random_tree(std::mt19937_64& rng, const std::vector<Expr>& leaves, int depth) {
  std::uniform_int_distribution<int> op(0, depth <= 0 ? 1 : 6);
  std::uniform_int_distribution<std::size_t> pick(0, leaves.size() - 1);
  switch (op(rng)) {
    case 0: return Expr(random_rational(rng, 3));
    case 1: return leaves[pick(rng)];
    case 2:
    case 3: return random_tree(rng, leaves, depth - 1) + random_tree(rng, leaves, depth - 1);
    case 4: return random_tree(rng, leaves, depth - 1) * random_tree(rng, leaves, depth - 1);
    case 5: {
      std::uniform_int_distribution<int> e(-2, 3);
      Expr b = random_tree(rng, leaves, depth - 1);
      int k = e(rng);
      if (b.is_zero() && k < 0) k = -k;
      return pow(b, k);
    }
    default: {
      Expr den = random_tree(rng, leaves, depth - 1);
      if (den.is_zero()) den = Expr(1);
      return random_tree(rng, leaves, depth - 1) / den;
    }
  }
}

inline bool close(double a, double b, double rel, double abs_floor = 0.0) {
  return std::abs(a - b) <= std::max(abs_floor, rel * std::max(std::abs(a), std::abs(b)));
}

}  // namespace extps::testing
