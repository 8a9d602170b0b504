#pragma once

#include <span>
#include <vector>

namespace blowup {

/// Gauss-Legendre rule on [-1, 1].
struct GaussRule {
  std::vector<double> nodes;
  std::vector<double> weights;

  std::size_t size() const { return nodes.size(); }
};

/// n-point Gauss-Legendre rule, exact for polynomials of degree 2n-1.
/// Rules are computed once per n and cached.
const GaussRule& gauss_legendre(int n);

/// Maps an n-point rule onto [a, b].
GaussRule gauss_legendre(int n, double a, double b);

/// L2([-1,1])-orthonormal Legendre polynomials sqrt((2k+1)/2) P_k and their
/// first two derivatives, for k = 0..degree, evaluated at x.
/// Each output span must hold degree+1 entries; d1/d2 may be empty.
void legendre_orthonormal(int degree, double x, std::span<double> value,
                          std::span<double> d1 = {}, std::span<double> d2 = {});

/// Tabulated orthonormal Legendre values at a fixed set of 1D points.
/// Layout: table(q, k) at q * (degree + 1) + k.
struct LegendreTable {
  int degree = 0;
  std::vector<double> points;
  std::vector<double> value;
  std::vector<double> d1;
  std::vector<double> d2;

  LegendreTable() = default;
  LegendreTable(int degree, std::span<const double> points);

  std::size_t num_points() const { return points.size(); }
  double v(std::size_t q, int k) const { return value[q * (degree + 1) + k]; }
  double dv(std::size_t q, int k) const { return d1[q * (degree + 1) + k]; }
  double ddv(std::size_t q, int k) const { return d2[q * (degree + 1) + k]; }
};

/// n uniformly spaced points on [-1, 1] including both end points.
std::vector<double> uniform_points(int n);

}  // namespace blowup
