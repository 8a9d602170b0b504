#pragma once

#include <span>
#include <vector>

// Dense real polynomials in the monomial basis, coefficients stored in
// ascending order: c[0] + c[1] x + ... + c[n] x^n.
namespace blowup::poly {

double evaluate(std::span<const double> c, double x);

std::vector<double> derivative(std::span<const double> c);

/// Coefficients of s -> p(a + d s).
std::vector<double> compose_linear(std::span<const double> c, double a, double d);

/// Drops trailing zero coefficients (keeps at least one entry).
std::vector<double> trimmed(std::span<const double> c);

/// All real roots in the open interval (lo, hi), ascending. Roots are
/// isolated on monotone pieces delimited by the critical points and refined
/// by bisection with a Newton polish. Double roots at critical points are
/// reported once.
std::vector<double> real_roots(std::span<const double> c, double lo, double hi);

/// Exact integral of |p(s)| over [a, b]: split at sign changes, then
/// Gauss-Legendre with enough points to integrate each signed piece exactly.
double abs_integral(std::span<const double> c, double a, double b);

}  // namespace blowup::poly
