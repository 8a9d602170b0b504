#include "blowup/problem.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace blowup {

namespace {

double param(std::span<const double> p, std::size_t i, double fallback) {
  return i < p.size() ? p[i] : fallback;
}

void require(std::span<const double> p, std::size_t min, std::size_t max, const std::string& name) {
  if (p.size() < min || p.size() > max)
    throw std::invalid_argument("expression '" + name + "': expected " + std::to_string(min) +
                                (min == max ? "" : ".." + std::to_string(max)) + " parameters, got " +
                                std::to_string(p.size()));
}

}  // namespace

void ProblemData::validate() const {
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
  if (!(gamma > 0.0)) throw std::invalid_argument("penalty gamma must be positive");
  if (!velocity) return;
  // Central differences at a few interior points.
  const double hx = 1e-5 * domain.width();
  const double hy = 1e-5 * domain.height();
  for (double fx : {0.21, 0.5, 0.77}) {
    for (double fy : {0.13, 0.5, 0.91}) {
      const double x = domain.x0 + fx * domain.width();
      const double y = domain.y0 + fy * domain.height();
      for (double t : {0.0, 0.5}) {
        const double dax = (velocity(x + hx, y, t).x - velocity(x - hx, y, t).x) / (2 * hx);
        const double day = (velocity(x, y + hy, t).y - velocity(x, y - hy, t).y) / (2 * hy);
        const Vec2 a = velocity(x, y, t);
        const double scale = 1.0 + std::abs(a.x) / domain.width() + std::abs(a.y) / domain.height();
        if (std::abs(dax + day) > 1e-5 * scale)
          throw std::invalid_argument("velocity field is not divergence free");
      }
    }
  }
}

ScalarFn make_scalar(const std::string& name, std::span<const double> p, const Box& domain) {
  if (name == "zero") {
    require(p, 0, 0, name);
    return [](double, double, double) { return 0.0; };
  }
  if (name == "constant") {
    require(p, 1, 1, name);
    const double c = p[0];
    return [c](double, double, double) { return c; };
  }
  if (name == "gaussian") {
    require(p, 2, 4, name);
    const double A = p[0], r = p[1], cx = param(p, 2, 0.0), cy = param(p, 3, 0.0);
    return [=](double x, double y, double) {
      const double dx = x - cx, dy = y - cy;
      return A * std::exp(-r * (dx * dx + dy * dy));
    };
  }
  if (name == "volcano") {
    require(p, 2, 2, name);
    const double A = p[0], r = p[1];
    return [=](double x, double y, double) {
      const double s = x * x + y * y;
      return A * s * std::exp(-r * s);
    };
  }
  if (name == "sine_product") {
    require(p, 1, 2, name);
    const double A = p[0], lambda = param(p, 1, 0.0);
    const double kx = std::numbers::pi / domain.width(), ky = std::numbers::pi / domain.height();
    const double x0 = domain.x0, y0 = domain.y0;
    return [=](double x, double y, double t) {
      return A * std::exp(-lambda * t) * std::sin(kx * (x - x0)) * std::sin(ky * (y - y0));
    };
  }
  throw std::invalid_argument("unknown scalar expression '" + name + "'");
}

VectorFn make_velocity(const std::string& name, std::span<const double> p) {
  if (name == "zero") {
    require(p, 0, 0, name);
    return {};
  }
  if (name == "constant") {
    require(p, 2, 2, name);
    const Vec2 a{p[0], p[1]};
    return [a](double, double, double) { return a; };
  }
  if (name == "rotation") {
    require(p, 1, 1, name);
    const double w = p[0];
    return [w](double x, double y, double) { return Vec2{-w * y, w * x}; };
  }
  if (name == "linear_in_time") {
    require(p, 4, 4, name);
    const double ax = p[0], ay = p[1], bx = p[2], by = p[3];
    return [=](double, double, double t) { return Vec2{ax + bx * t, ay + by * t}; };
  }
  throw std::invalid_argument("unknown velocity expression '" + name + "'");
}

bool velocity_is_steady(const std::string& name) { return name != "linear_in_time"; }

ProblemData manufactured_problem(const Box& domain, double epsilon, Vec2 velocity,
                                 double amplitude, double lambda, double gamma) {
  ProblemData data;
  data.domain = domain;
  data.epsilon = epsilon;
  data.gamma = gamma;
  if (velocity.x != 0.0 || velocity.y != 0.0)
    data.velocity = [velocity](double, double, double) { return velocity; };
  const double params[2] = {amplitude, lambda};
  data.exact = make_scalar("sine_product", params, domain);
  data.u0 = data.exact;
  const double kx = std::numbers::pi / domain.width(), ky = std::numbers::pi / domain.height();
  const double x0 = domain.x0, y0 = domain.y0;
  data.f0_steady = lambda == 0.0;
  // u_t - eps Lap u + a.grad u + f0 - u^2 = 0
  data.f0 = [=](double x, double y, double t) {
    const double e = amplitude * std::exp(-lambda * t);
    const double sx = std::sin(kx * (x - x0)), sy = std::sin(ky * (y - y0));
    const double u = e * sx * sy;
    const double ux = e * kx * std::cos(kx * (x - x0)) * sy;
    const double uy = e * ky * sx * std::cos(ky * (y - y0));
    const double lap = -(kx * kx + ky * ky) * u;
    return lambda * u + epsilon * lap - (velocity.x * ux + velocity.y * uy) + u * u;
  };
  return data;
}

}  // namespace blowup
