#include "blowup/ode_blowup.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "blowup/delta_equation.hpp"
#include "blowup/polynomial.hpp"

namespace blowup::ode {

namespace {

// Largest exponent passed to exp() before declaring overflow.
constexpr double kMaxExponent = 700.0;

bool is_pure_power(const std::vector<double>& c) {
  for (std::size_t j = 0; j + 1 < c.size(); ++j)
    if (c[j] != 0.0) return false;
  return c.back() == 1.0;
}

double binomial_falling(int j, int i) {
  // i! / (i-j)! / j!  (binomial coefficient)
  double r = 1.0;
  for (int m = 1; m <= j; ++m) r = r * (i - j + m) / m;
  return r;
}

}  // namespace

std::string to_string(Scheme scheme) {
  switch (scheme) {
    case Scheme::ExplicitEuler: return "explicit";
    case Scheme::ImplicitEuler: return "implicit";
    case Scheme::ImprovedEuler: return "improved";
  }
  return "unknown";
}

Scheme scheme_from_string(const std::string& name) {
  if (name == "explicit") return Scheme::ExplicitEuler;
  if (name == "implicit") return Scheme::ImplicitEuler;
  if (name == "improved") return Scheme::ImprovedEuler;
  throw std::invalid_argument("unknown scheme '" + name + "' (expected explicit|implicit|improved)");
}

std::string to_string(Termination termination) {
  switch (termination) {
    case Termination::DeltaFailed: return "delta_failed";
    case Termination::HorizonReached: return "horizon_reached";
    case Termination::Overflow: return "overflow";
  }
  return "unknown";
}

PolynomialOde::PolynomialOde(std::vector<double> coeffs, double u0,
                             std::optional<double> blowup_time)
    : coeffs_(std::move(coeffs)), u0_(u0), blowup_time_(blowup_time) {
  if (coeffs_.size() < 3) throw std::invalid_argument("PolynomialOde: degree must be >= 2");
  for (double c : coeffs_)
    if (!std::isfinite(c)) throw std::invalid_argument("PolynomialOde: non-finite coefficient");
  for (std::size_t j = 1; j + 1 < coeffs_.size(); ++j)
    if (coeffs_[j] < 0.0) throw std::invalid_argument("PolynomialOde: alpha_j must be >= 0 for 1 <= j < p");
  if (!(coeffs_.back() > 0.0)) throw std::invalid_argument("PolynomialOde: leading coefficient must be > 0");
  if (!std::isfinite(u0_)) throw std::invalid_argument("PolynomialOde: non-finite initial value");
  if (blowup_time_) {
    if (!(*blowup_time_ > 0.0)) throw std::invalid_argument("PolynomialOde: blow-up time must be > 0");
    if (is_pure_power(coeffs_) && u0_ > 0.0) {
      const int p = degree();
      const double closed = 1.0 / ((p - 1) * std::pow(u0_, p - 1));
      if (std::abs(*blowup_time_ - closed) > 1e-12 * closed)
        throw std::invalid_argument("PolynomialOde: blow-up time inconsistent with u' = u^p");
    }
  }
}

PolynomialOde PolynomialOde::power(int p, double u0) {
  if (p < 2) throw std::invalid_argument("PolynomialOde::power: p must be >= 2");
  std::vector<double> c(static_cast<std::size_t>(p) + 1, 0.0);
  c.back() = 1.0;
  std::optional<double> tstar;
  if (u0 > 0.0) tstar = 1.0 / ((p - 1) * std::pow(u0, p - 1));
  return PolynomialOde(std::move(c), u0, tstar);
}

double PolynomialOde::f(double u) const { return poly::evaluate(coeffs_, u); }

std::vector<double> PolynomialOde::scaled_derivative(int j) const {
  const int p = degree();
  if (j > p) return {0.0};
  std::vector<double> d(static_cast<std::size_t>(p - j) + 1);
  for (int i = j; i <= p; ++i) d[i - j] = binomial_falling(j, i) * coeffs_[i];
  return d;
}

std::optional<double> PolynomialOde::exact_solution(double t) const {
  if (!is_pure_power(coeffs_)) return std::nullopt;
  const int p = degree();
  const double base = std::pow(u0_, 1 - p) - (p - 1) * t;
  if (u0_ <= 0.0 || base <= 0.0) return std::nullopt;
  return std::pow(base, 1.0 / (1 - p));
}

double step(Scheme scheme, const PolynomialOde& f, double u_prev, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("step: tau must be > 0");
  if (!std::isfinite(u_prev)) throw std::invalid_argument("step: u_prev must be finite");
  double result = 0.0;
  switch (scheme) {
    case Scheme::ExplicitEuler:
      result = u_prev + tau * f.f(u_prev);
      break;
    case Scheme::ImprovedEuler: {
      const double fp = f.f(u_prev);
      result = u_prev + 0.5 * tau * (fp + f.f(u_prev + tau * fp));
      break;
    }
    case Scheme::ImplicitEuler: {
      // g(U) = U - tau f(U) - u_prev
      std::vector<double> g(f.coeffs().size());
      for (std::size_t j = 0; j < g.size(); ++j) g[j] = -tau * f.coeffs()[j];
      g[1] += 1.0;
      g[0] -= u_prev;
      const std::vector<double> dg = poly::derivative(g);

      double x = u_prev;
      bool converged = false;
      for (int it = 0; it < 50; ++it) {
        const double gx = poly::evaluate(g, x);
        const double dgx = poly::evaluate(dg, x);
        if (dgx == 0.0 || !std::isfinite(gx)) break;
        double dx = gx / dgx;
        // Damping: never move further than the current distance scale allows.
        const double cap = 0.5 * (1.0 + std::abs(x));
        if (std::abs(dx) > cap) dx = std::copysign(cap, dx);
        x -= dx;
        if (!std::isfinite(x)) break;
        if (std::abs(dx) <= 1e-14 * std::max(1.0, std::abs(x))) {
          converged = true;
          break;
        }
      }
      std::vector<double> roots;
      if (converged) {
        const double radius = std::abs(x - u_prev) * (1.0 + 1e-10) + 1e-300;
        roots = poly::real_roots(g, u_prev - radius, u_prev + radius);
        if (roots.empty()) roots.push_back(x);
      } else {
        double bound = 0.0;
        for (std::size_t j = 0; j + 1 < g.size(); ++j) bound = std::max(bound, std::abs(g[j] / g.back()));
        bound += 1.0;
        roots = poly::real_roots(g, -bound, bound);
      }
      if (roots.empty()) throw StepError(StepError::Kind::ImplicitNoRoot, "implicit Euler: no real root");
      result = *std::min_element(roots.begin(), roots.end(), [&](double a, double b) {
        return std::abs(a - u_prev) < std::abs(b - u_prev);
      });
      break;
    }
  }
  if (!std::isfinite(result)) throw StepError(StepError::Kind::Overflow, "step: non-finite result");
  return result;
}

double increment(Scheme scheme, const PolynomialOde& f, double u_prev, double u_next, double tau) {
  switch (scheme) {
    case Scheme::ExplicitEuler: return f.f(u_prev);
    case Scheme::ImplicitEuler: return f.f(u_next);
    case Scheme::ImprovedEuler: {
      const double fp = f.f(u_prev);
      return 0.5 * (fp + f.f(u_prev + tau * fp));
    }
  }
  return 0.0;
}

double residual_integral(const PolynomialOde& f, Scheme scheme, double u_prev, double u_next,
                         double tau) {
  std::vector<double> q = poly::compose_linear(f.coeffs(), u_prev, u_next - u_prev);
  q[0] -= increment(scheme, f, u_prev, u_next, tau);
  return tau * poly::abs_integral(q, 0.0, 1.0);
}

double signed_residual_integral(const PolynomialOde& f, Scheme scheme, double u_prev,
                                double u_next, double tau) {
  std::vector<double> q = poly::compose_linear(f.coeffs(), u_prev, u_next - u_prev);
  q[0] -= increment(scheme, f, u_prev, u_next, tau);
  double s = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) s += q[i] / static_cast<double>(i + 1);
  return tau * std::abs(s);
}

double growth_factor(const PolynomialOde& f, double u_prev, double u_next, double tau) {
  const std::vector<double> df = poly::derivative(f.coeffs());
  const std::vector<double> q = poly::compose_linear(df, u_prev, u_next - u_prev);
  const double exponent = tau * poly::abs_integral(q, 0.0, 1.0);
  if (!(exponent <= kMaxExponent)) throw StepError(StepError::Kind::Overflow, "growth factor overflow");
  return std::exp(exponent);
}

std::vector<double> derivative_integrals(const PolynomialOde& f, double u_prev, double u_next,
                                         double tau) {
  std::vector<double> out;
  for (int j = 2; j <= f.degree(); ++j) {
    const std::vector<double> q = poly::compose_linear(f.scaled_derivative(j), u_prev, u_next - u_prev);
    out.push_back(tau * poly::abs_integral(q, 0.0, 1.0));
  }
  return out;
}

std::optional<double> solve_delta(std::span<const double> reduced) {
  return smallest_root_above_one(reduced);
}

std::optional<double> solve_delta_ode(const PolynomialOde& f, double u_prev, double u_next,
                                      double tau, double growth, double phi_k) {
  const std::vector<double> integrals = derivative_integrals(f, u_prev, u_next, tau);
  std::vector<double> reduced(integrals.size());
  const double scale = growth * phi_k;
  double power = scale;
  for (std::size_t m = 0; m < integrals.size(); ++m) {
    reduced[m] = power * integrals[m];
    power *= scale;
  }
  for (double c : reduced)
    if (!std::isfinite(c)) return std::nullopt;
  return solve_delta(reduced);
}

bool lemma_sufficient(std::span<const double> c) {
  double sum = 0.0;
  double ej = 1.0;
  for (std::size_t j = 1; j <= c.size(); ++j) {
    ej *= std::numbers::e;
    sum += static_cast<double>(j) * c[j - 1] * ej;
  }
  // Boundary cases like C_1 = 1/e are evaluated with a rounding allowance.
  return sum <= 1.0 + 8.0 * std::numeric_limits<double>::epsilon();
}

namespace {

RunResult run(const PolynomialOde& f, Scheme scheme, double tau1, double tol0, bool relative,
              const RunOptions& options) {
  if (!(tau1 > 0.0)) throw std::invalid_argument("run: tau1 must be > 0");
  if (!(tol0 > 0.0)) throw std::invalid_argument("run: tol must be > 0");

  RunResult result;
  double t = 0.0;
  double u = f.u0();
  double prev_bound = 0.0;
  double tol = tol0;
  double tau = tau1;
  long k = 0;

  auto finish = [&](Termination why) {
    result.final_time = t;
    result.steps = k;
    result.final_value = u;
    result.final_bound = prev_bound;
    result.termination = why;
    return result;
  };

  while (true) {
    double u_next = 0.0;
    double resid = 0.0;
    double growth = 1.0;
    int failures = 0;
    while (true) {
      if (t + tau == t) return finish(Termination::Overflow);
      try {
        u_next = step(scheme, f, u, tau);
        resid = options.signed_residual ? signed_residual_integral(f, scheme, u, u_next, tau)
                                        : residual_integral(f, scheme, u, u_next, tau);
        if (!std::isfinite(resid)) throw StepError(StepError::Kind::Overflow, "residual overflow");
        if (resid > tol) {
          tau *= 0.5;
          continue;
        }
        growth = growth_factor(f, u, u_next, tau);
      } catch (const StepError&) {
        if (++failures > options.max_halvings) return finish(Termination::Overflow);
        tau *= 0.5;
        continue;
      }
      break;
    }
    const double phi_k = phi(prev_bound, resid);
    const std::optional<double> delta = solve_delta_ode(f, u, u_next, tau, growth, phi_k);
    if (!delta) return finish(Termination::DeltaFailed);
    const double bound = *delta * growth * phi_k;
    if (!std::isfinite(bound)) return finish(Termination::Overflow);

    ++k;
    if (options.record_slabs) {
      OdeSlab slab;
      slab.index = k;
      slab.t_start = t;
      slab.t_end = t + tau;
      slab.tau = tau;
      slab.u_prev = u;
      slab.u_next = u_next;
      slab.residual_int = resid;
      slab.growth = growth;
      slab.phi = phi_k;
      slab.delta = *delta;
      slab.bound = bound;
      slab.tol = tol;
      result.slabs.push_back(slab);
    }
    t += tau;
    u = u_next;
    prev_bound = bound;
    if (relative) tol *= growth;
    if (t >= options.horizon || k >= options.max_steps) return finish(Termination::HorizonReached);
  }
}

}  // namespace

RunResult run_algorithm1(const PolynomialOde& f, Scheme scheme, double tau1, double tol,
                         const RunOptions& options) {
  return run(f, scheme, tau1, tol, false, options);
}

RunResult run_algorithm2(const PolynomialOde& f, Scheme scheme, double tau1, double tol,
                         const RunOptions& options) {
  return run(f, scheme, tau1, tol, true, options);
}

double loglog_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("loglog_slope: need >= 2 pairs");
  double mx = 0.0, my = 0.0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw std::invalid_argument("loglog_slope: values must be > 0");
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxx += dx * dx;
    sxy += dx * (std::log(y[i]) - my);
  }
  if (sxx == 0.0) throw std::invalid_argument("loglog_slope: abscissae must not all coincide");
  return sxy / sxx;
}

RateFit fit_rate(std::span<const RateSample> samples, double blowup_time) {
  RateFit fit;
  fit.samples.assign(samples.begin(), samples.end());
  std::vector<double> n;
  for (const RateSample& s : samples) {
    const double lambda = std::abs(blowup_time - s.final_time);
    if (!(lambda > 0.0)) throw std::invalid_argument("fit_rate: lambda must be > 0");
    fit.lambdas.push_back(lambda);
    n.push_back(static_cast<double>(s.steps));
  }
  std::vector<double> distinct = n;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() < 2) throw std::invalid_argument("fit_rate: need samples with distinct N");
  fit.rate = -loglog_slope(n, fit.lambdas);
  return fit;
}

}  // namespace blowup::ode
