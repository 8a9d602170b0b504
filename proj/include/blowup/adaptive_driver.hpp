#pragma once

#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "blowup/estimator.hpp"
#include "blowup/imex_stepper.hpp"

namespace blowup {

struct AdaptConfig {
  double ttol_plus = 1.0;
  double ttol_minus = 0.01;
  double stol_plus = 1e-3;
  double stol_minus = 1e-9;
  double tau1 = 0.125;
  int degree = 5;
  int grid_nx = 4;
  int grid_ny = 4;
  BoundConstants constants;
  /// Cells at this level are not refined further.
  int max_level = 8;
  int max_halvings = 40;
  long max_steps = 1'000'000;
  /// The run stops once t reaches this time.
  double horizon = 1e300;

  /// ttol- = 0.01 ttol+, stol- = 1e-6 stol+.
  static AdaptConfig with_defaults(double ttol_plus, double stol_plus);
  void validate() const;
};

enum class StopReason { NoDelta, Overflow, Horizon, MaxSteps, InitialPhase };

std::string to_string(StopReason reason);

/// One accepted time level.
struct StepRecord {
  long k = 0;
  double t = 0.0;
  double tau = 0.0;
  double linf = 0.0;  ///< ||U_h(t^k)||_{L^inf}
  std::size_t cells = 0;
  std::size_t dofs = 0;
  int max_level = 0;
  double eta_T2_sq = 0.0;  ///< int eta_T2^2 over the slab ending at t^k
  double tol_scale = 1.0;  ///< product of the growth factors so far
};

struct AdaptResult {
  std::vector<StepRecord> trajectory;  ///< k = 0 .. N
  std::vector<LedgerRow> ledger;       ///< one row per accepted slab
  StopReason reason = StopReason::NoDelta;
  std::string message;
  long steps = 0;          ///< N
  double final_time = 0.0;
  double final_linf = 0.0;
  double psi = 0.0;        ///< Psi_N
  double jump_max = 0.0;
  double estimator = 0.0;  ///< final bound Psi_N + max jump term
  double tol_scale = 1.0;
  DgField u0;
  DgField u_final;
};

/// Called after every accepted step.
using StepObserver = std::function<void(const StepRecord&, const DgField&)>;

/// Space-time adaptivity driven by eta_T2 (time step) and eta_S1 (mesh),
/// with tolerances scaled by the growth factor of every accepted slab.
AdaptResult algorithm3_run(const ProblemData& data, const AdaptConfig& config,
                           const StepObserver& observer = {});

class DegenerateFit : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// t* from ||U|| = C / (t* - t) at two times.
double extrapolate_tstar(double t_prev, double norm_prev, double t_last, double norm_last);

/// p_k = log(n_k / n_{k-1}) / log((t* - t_{k-1}) / (t* - t_k)), k = 1..N.
std::vector<double> blowup_rate_sequence(std::span<const double> times, std::span<const double> norms,
                                         double t_star);

/// Log-log slope of the final norm against the number of steps.
double fit_norm_growth(std::span<const double> steps, std::span<const double> norms);

}  // namespace blowup
