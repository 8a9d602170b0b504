#pragma once

#include <optional>
#include <span>

namespace blowup {

/// Smallest root in (1, inf) of
///     h(x) = sum_{m>=1} coeffs[m-1] * x^m - log(x),   coeffs[m-1] >= 0.
///
/// h is strictly convex with h(1) >= 0, so Newton started at x = 1 increases
/// monotonically towards the first root whenever one exists; if an iterate
/// reaches h' >= 0 while h > 0 the minimum is positive and there is no root.
/// Tangential roots are accepted once |h| <= 1e-12.
///
/// All-zero coefficients return 1 (the bound being controlled is zero and the
/// infimum of admissible values is taken).
std::optional<double> smallest_root_above_one(std::span<const double> coeffs);

/// h(x) for the coefficients above.
double delta_residual(std::span<const double> coeffs, double x);

}  // namespace blowup
