#include "blowup/quadrature.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <stdexcept>

namespace blowup {

namespace {

GaussRule compute_rule(int n) {
  GaussRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    // Tricomi initial guess, then Newton on P_n.
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0;
      double p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = pk;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    // Recompute derivative at the converged node for the weight.
    double p0 = 1.0;
    double p1 = x;
    for (int k = 2; k <= n; ++k) {
      const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = pk;
    }
    dp = n * (x * p1 - p0) / (x * x - 1.0);
    // Ascending order.
    rule.nodes[n - 1 - i] = x;
    rule.weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
  return rule;
}

}  // namespace

const GaussRule& gauss_legendre(int n) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: n must be >= 1");
  static std::mutex mutex;
  static std::map<int, GaussRule> cache;
  std::lock_guard lock(mutex);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, compute_rule(n)).first;
  return it->second;
}

GaussRule gauss_legendre(int n, double a, double b) {
  GaussRule mapped = gauss_legendre(n);
  const double half = 0.5 * (b - a);
  const double mid = 0.5 * (a + b);
  for (std::size_t q = 0; q < mapped.size(); ++q) {
    mapped.nodes[q] = mid + half * mapped.nodes[q];
    mapped.weights[q] *= half;
  }
  return mapped;
}

void legendre_orthonormal(int degree, double x, std::span<double> value,
                          std::span<double> d1, std::span<double> d2) {
  // Unnormalized P_k, P_k', P_k'' by the three-term recurrence.
  double p_prev = 0.0, p = 1.0;
  double dp_prev = 0.0, dp = 0.0;
  double ddp_prev = 0.0, ddp = 0.0;
  for (int k = 0; k <= degree; ++k) {
    const double scale = std::sqrt((2.0 * k + 1.0) / 2.0);
    value[k] = scale * p;
    if (!d1.empty()) d1[k] = scale * dp;
    if (!d2.empty()) d2[k] = scale * ddp;
    // P_{k+1} = ((2k+1) x P_k - k P_{k-1}) / (k+1)
    const double c1 = (2.0 * k + 1.0) / (k + 1.0);
    const double c2 = static_cast<double>(k) / (k + 1.0);
    const double p_next = c1 * x * p - c2 * p_prev;
    const double dp_next = c1 * (p + x * dp) - c2 * dp_prev;
    const double ddp_next = c1 * (2.0 * dp + x * ddp) - c2 * ddp_prev;
    p_prev = p;
    p = p_next;
    dp_prev = dp;
    dp = dp_next;
    ddp_prev = ddp;
    ddp = ddp_next;
  }
}

LegendreTable::LegendreTable(int deg, std::span<const double> pts)
    : degree(deg), points(pts.begin(), pts.end()) {
  const std::size_t nb = static_cast<std::size_t>(degree + 1);
  value.resize(points.size() * nb);
  d1.resize(points.size() * nb);
  d2.resize(points.size() * nb);
  for (std::size_t q = 0; q < points.size(); ++q) {
    legendre_orthonormal(degree, points[q],
                         std::span<double>(value).subspan(q * nb, nb),
                         std::span<double>(d1).subspan(q * nb, nb),
                         std::span<double>(d2).subspan(q * nb, nb));
  }
}

std::vector<double> uniform_points(int n) {
  std::vector<double> pts(n);
  if (n == 1) {
    pts[0] = 0.0;
    return pts;
  }
  for (int i = 0; i < n; ++i) pts[i] = -1.0 + 2.0 * i / (n - 1);
  return pts;
}

}  // namespace blowup
