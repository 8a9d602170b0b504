#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>

#include "blowup/quad_mesh.hpp"

namespace blowup {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

using ScalarFn = std::function<double(double x, double y, double t)>;
using VectorFn = std::function<Vec2(double x, double y, double t)>;

/// Data of u_t - eps Lap u + a.grad u + f0 - u^2 = 0 with u = 0 on the boundary.
/// Empty velocity / forcing mean zero.
struct ProblemData {
  Box domain;
  double epsilon = 1.0;
  double gamma = 30.0;
  VectorFn velocity;
  bool velocity_steady = true;
  ScalarFn f0;
  bool f0_steady = true;
  ScalarFn u0;  // evaluated at t = 0
  /// Known exact solution, for manufactured problems.
  ScalarFn exact;

  bool has_velocity() const { return static_cast<bool>(velocity); }
  Vec2 a(double x, double y, double t) const { return velocity ? velocity(x, y, t) : Vec2{}; }
  double forcing(double x, double y, double t) const { return f0 ? f0(x, y, t) : 0.0; }
  double initial(double x, double y) const { return u0 ? u0(x, y, 0.0) : 0.0; }

  /// Throws std::invalid_argument when eps or gamma is not positive, or when a
  /// finite-difference spot check finds div a != 0.
  void validate() const;
};

/// Named analytic expressions with numeric parameters.
///
/// scalars: zero; constant [c]; gaussian [A, r, cx=0, cy=0] = A exp(-r |x-c|^2);
///   volcano [A, r] = A |x|^2 exp(-r |x|^2);
///   sine_product [A, lambda=0] = A exp(-lambda t) sin(pi (x-x0)/Lx) sin(pi (y-y0)/Ly)
/// velocities: zero; constant [ax, ay]; rotation [w] = w (-y, x);
///   linear_in_time [ax, ay, bx, by] = (ax + bx t, ay + by t)
ScalarFn make_scalar(const std::string& name, std::span<const double> params, const Box& domain);
VectorFn make_velocity(const std::string& name, std::span<const double> params);
bool velocity_is_steady(const std::string& name);

/// u = A exp(-lambda t) sin(pi (x-x0)/Lx) sin(pi (y-y0)/Ly) with constant
/// velocity a; f0 is chosen so that u solves the equation exactly.
ProblemData manufactured_problem(const Box& domain, double epsilon, Vec2 velocity,
                                 double amplitude, double lambda, double gamma = 30.0);

}  // namespace blowup
