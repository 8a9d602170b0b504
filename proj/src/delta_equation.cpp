#include "blowup/delta_equation.hpp"

#include <cmath>
#include <limits>

namespace blowup {

namespace {

constexpr double kResidualTol = 1e-12;

struct Eval {
  double h;
  double dh;
};

Eval evaluate(std::span<const double> c, double x) {
  double poly = 0.0;
  double dpoly = 0.0;
  double xm = x;  // x^m
  for (std::size_t m = 1; m <= c.size(); ++m) {
    poly += c[m - 1] * xm;
    dpoly += static_cast<double>(m) * c[m - 1] * xm / x;
    xm *= x;
  }
  return {poly - std::log(x), dpoly - 1.0 / x};
}

}  // namespace

double delta_residual(std::span<const double> coeffs, double x) { return evaluate(coeffs, x).h; }

std::optional<double> smallest_root_above_one(std::span<const double> coeffs) {
  bool all_zero = true;
  for (double c : coeffs) {
    if (!(c >= 0.0) || !std::isfinite(c)) return std::nullopt;
    if (c != 0.0) all_zero = false;
  }
  if (all_zero) return 1.0;

  double x = 1.0;
  Eval e = evaluate(coeffs, x);
  for (int it = 0; it < 400; ++it) {
    if (std::abs(e.h) <= 0.25 * kResidualTol) return x;
    if (e.h < 0.0) break;  // only reachable through rounding near a root
    if (e.dh >= 0.0) {
      // Past the minimiser with h > 0: no root unless this is a tangency.
      return e.h <= kResidualTol ? std::optional<double>(x) : std::nullopt;
    }
    const double next = x - e.h / e.dh;
    if (!(next > x) || !std::isfinite(next)) break;
    x = next;
    e = evaluate(coeffs, x);
  }
  if (std::abs(e.h) <= kResidualTol) return x;
  return std::nullopt;
}

}  // namespace blowup
