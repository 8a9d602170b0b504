#include "blowup/polynomial.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "blowup/quadrature.hpp"

namespace blowup::poly {

double evaluate(std::span<const double> c, double x) {
  double acc = 0.0;
  for (std::size_t i = c.size(); i-- > 0;) acc = acc * x + c[i];
  return acc;
}

std::vector<double> derivative(std::span<const double> c) {
  if (c.size() <= 1) return {0.0};
  std::vector<double> d(c.size() - 1);
  for (std::size_t i = 1; i < c.size(); ++i) d[i - 1] = static_cast<double>(i) * c[i];
  return d;
}

std::vector<double> compose_linear(std::span<const double> c, double a, double d) {
  // Horner in the polynomial ring: q <- q * (a + d s) + c_i.
  std::vector<double> q(c.size(), 0.0);
  std::size_t len = 0;
  for (std::size_t i = c.size(); i-- > 0;) {
    std::vector<double> next(c.size(), 0.0);
    for (std::size_t j = 0; j < len; ++j) {
      next[j] += a * q[j];
      next[j + 1] += d * q[j];
    }
    next[0] += c[i];
    q.swap(next);
    len = std::min(len + 1, c.size());
  }
  return q;
}

std::vector<double> trimmed(std::span<const double> c) {
  std::size_t n = c.size();
  while (n > 1 && c[n - 1] == 0.0) --n;
  if (n == 0) return {0.0};
  return {c.begin(), c.begin() + static_cast<std::ptrdiff_t>(n)};
}

namespace {

double magnitude(std::span<const double> c, double x) {
  double acc = 0.0;
  for (std::size_t i = c.size(); i-- > 0;) acc = acc * std::abs(x) + std::abs(c[i]);
  return acc;
}

// Root of a polynomial with a sign change on [a, b] (fa, fb of opposite sign).
double bracketed_root(std::span<const double> c, std::span<const double> dc, double a,
                      double b, double fa) {
  double x = 0.5 * (a + b);
  for (int it = 0; it < 300; ++it) {
    const double fx = evaluate(c, x);
    if (fx == 0.0) return x;
    if ((fx < 0.0) == (fa < 0.0)) {
      a = x;
      fa = fx;
    } else {
      b = x;
    }
    if (b - a <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(std::abs(a), std::abs(b)))
      break;
    const double dfx = evaluate(dc, x);
    double next = dfx != 0.0 ? x - fx / dfx : 0.5 * (a + b);
    if (!(next > a && next < b)) next = 0.5 * (a + b);
    if (next == x) break;
    x = next;
  }
  return x;
}

}  // namespace

std::vector<double> real_roots(std::span<const double> coeffs, double lo, double hi) {
  const std::vector<double> c = trimmed(coeffs);
  const std::size_t deg = c.size() - 1;
  std::vector<double> roots;
  if (deg == 0 || !(hi > lo)) return roots;
  if (deg == 1) {
    const double r = -c[0] / c[1];
    if (r > lo && r < hi) roots.push_back(r);
    return roots;
  }
  const std::vector<double> dc = derivative(c);
  std::vector<double> knots{lo};
  for (double x : real_roots(dc, lo, hi)) knots.push_back(x);
  knots.push_back(hi);

  for (std::size_t s = 0; s + 1 < knots.size(); ++s) {
    const double a = knots[s];
    const double b = knots[s + 1];
    const double fa = evaluate(c, a);
    const double fb = evaluate(c, b);
    if (s > 0) {
      // Interior critical point touching zero: a multiple root.
      const double tol = 64.0 * std::numeric_limits<double>::epsilon() * magnitude(c, a);
      if (std::abs(fa) <= tol) {
        roots.push_back(a);
        continue;
      }
    }
    if (fa == 0.0 || fb == 0.0) continue;
    if ((fa < 0.0) != (fb < 0.0)) roots.push_back(bracketed_root(c, dc, a, b, fa));
  }
  // A root adjacent to a multiple root can coincide numerically; keep one.
  roots.erase(std::unique(roots.begin(), roots.end()), roots.end());
  return roots;
}

double abs_integral(std::span<const double> coeffs, double a, double b) {
  const std::vector<double> c = trimmed(coeffs);
  const int deg = static_cast<int>(c.size()) - 1;
  const GaussRule& rule = gauss_legendre(deg / 2 + 1);
  std::vector<double> cuts{a};
  for (double r : real_roots(c, a, b)) cuts.push_back(r);
  cuts.push_back(b);
  double total = 0.0;
  for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
    const double half = 0.5 * (cuts[s + 1] - cuts[s]);
    const double mid = 0.5 * (cuts[s + 1] + cuts[s]);
    double piece = 0.0;
    for (std::size_t q = 0; q < rule.size(); ++q)
      piece += rule.weights[q] * evaluate(c, mid + half * rule.nodes[q]);
    total += std::abs(half * piece);
  }
  return total;
}

}  // namespace blowup::poly
