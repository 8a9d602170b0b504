#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

// Adaptive time stepping for scalar ODEs u' = f(u) with polynomial f whose
// solutions blow up in finite time, driven by a conditional a posteriori
// bound on the error of the piecewise-linear interpolant.
namespace blowup::ode {

enum class Scheme { ExplicitEuler, ImplicitEuler, ImprovedEuler };

std::string to_string(Scheme scheme);
Scheme scheme_from_string(const std::string& name);

/// f(u) = sum_j coeffs[j] u^j together with the initial value.
class PolynomialOde {
 public:
  PolynomialOde(std::vector<double> coeffs, double u0,
                std::optional<double> blowup_time = std::nullopt);

  /// f(u) = u^p, u(0) = u0, with the closed-form blow-up time when u0 > 0.
  static PolynomialOde power(int p, double u0);

  const std::vector<double>& coeffs() const { return coeffs_; }
  int degree() const { return static_cast<int>(coeffs_.size()) - 1; }
  double u0() const { return u0_; }
  const std::optional<double>& blowup_time() const { return blowup_time_; }

  double f(double u) const;
  /// Coefficients of f^{(j)}(u) / j!.
  std::vector<double> scaled_derivative(int j) const;
  /// Exact solution for f(u) = u^p (p >= 2, no other terms); nullopt otherwise.
  std::optional<double> exact_solution(double t) const;

 private:
  std::vector<double> coeffs_;
  double u0_;
  std::optional<double> blowup_time_;
};

class StepError : public std::runtime_error {
 public:
  enum class Kind { ImplicitNoRoot, Overflow };
  StepError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// One step of (U^k - U^{k-1}) / tau = F(U^{k-1}, U^k).
/// The implicit variant returns the real root closest to u_prev.
/// Throws StepError.
double step(Scheme scheme, const PolynomialOde& f, double u_prev, double tau);

/// The constant increment F(U^{k-1}, U^k) of the scheme on a slab.
double increment(Scheme scheme, const PolynomialOde& f, double u_prev, double u_next,
                 double tau);

/// int over the slab of |f(U(s)) - F| with U linear between u_prev and u_next.
double residual_integral(const PolynomialOde& f, Scheme scheme, double u_prev, double u_next,
                         double tau);

/// |int over the slab of (f(U(s)) - F)|. Only used for comparison runs.
double signed_residual_integral(const PolynomialOde& f, Scheme scheme, double u_prev,
                                double u_next, double tau);

/// exp(int over the slab of |f'(U(s))|). Throws StepError::Overflow when the
/// exponent is not representable.
double growth_factor(const PolynomialOde& f, double u_prev, double u_next, double tau);

/// phi_k = |e(t^{k-1})| estimate + residual integral.
inline double phi(double prev_bound, double residual_int) { return prev_bound + residual_int; }

/// int over the slab of |f^{(j)}(U(s))| / j!, for j = 2..p (entry j-2).
std::vector<double> derivative_integrals(const PolynomialOde& f, double u_prev, double u_next,
                                         double tau);

/// Smallest delta > 1 with sum_j (delta G phi)^{j-1} I_j - log(delta) = 0, or
/// nullopt when the step is too large for the condition to be met.
std::optional<double> solve_delta_ode(const PolynomialOde& f, double u_prev, double u_next,
                                      double tau, double growth, double phi);

/// Same equation from the reduced coefficients C_m (multiplying delta^m).
std::optional<double> solve_delta(std::span<const double> reduced);

/// Sufficient condition sum_j j C_j e^j <= 1 for a root in (1, inf).
bool lemma_sufficient(std::span<const double> c);

struct OdeSlab {
  long index = 0;
  double t_start = 0.0;
  double t_end = 0.0;
  double tau = 0.0;
  double u_prev = 0.0;
  double u_next = 0.0;
  double residual_int = 0.0;
  double growth = 1.0;
  double phi = 0.0;
  double delta = 1.0;
  double bound = 0.0;
  /// Tolerance in force when the slab was accepted.
  double tol = 0.0;
};

enum class Termination { DeltaFailed, HorizonReached, Overflow };

std::string to_string(Termination termination);

struct RunResult {
  std::vector<OdeSlab> slabs;  // empty when RunOptions::record_slabs is false
  double final_time = 0.0;
  long steps = 0;
  double final_value = 0.0;
  double final_bound = 0.0;
  Termination termination = Termination::DeltaFailed;
};

struct RunOptions {
  int max_halvings = 60;
  long max_steps = 200'000'000;
  double horizon = 1e300;
  bool record_slabs = true;
  /// Use signed_residual_integral in place of residual_integral.
  bool signed_residual = false;
};

/// Fixed absolute tolerance on the residual integral.
RunResult run_algorithm1(const PolynomialOde& f, Scheme scheme, double tau1, double tol,
                         const RunOptions& options = {});

/// As run_algorithm1 with the tolerance multiplied by G_k after every step.
RunResult run_algorithm2(const PolynomialOde& f, Scheme scheme, double tau1, double tol,
                         const RunOptions& options = {});

struct RateSample {
  double tol = 0.0;
  long steps = 0;
  double final_time = 0.0;
};

struct RateFit {
  std::vector<RateSample> samples;
  std::vector<double> lambdas;
  double rate = 0.0;
};

/// Negated least-squares slope of log |T* - T| against log N.
/// Requires at least two distinct N and T != T* in every sample.
RateFit fit_rate(std::span<const RateSample> samples, double blowup_time);

/// Least-squares slope of log y against log x.
double loglog_slope(std::span<const double> x, std::span<const double> y);

}  // namespace blowup::ode
