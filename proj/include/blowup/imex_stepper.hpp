#pragma once

#include <memory>
#include <stdexcept>

#include "blowup/dg_space.hpp"
#include "blowup/problem.hpp"

namespace blowup {

class SolverFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite solution; the caller should shorten the step.
class FieldOverflow : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Everything one IMEX step produces on the new mesh.
struct ImexResult {
  DgField u;          ///< U^k
  DgField proj_prev;  ///< Pi^k U^{k-1}
  DgField proj_f;     ///< Pi^k f^{k-1}, f = f0 - u^2
  DgField A;          ///< A^k = -Pi^k f^{k-1} - (U^k - Pi^k U^{k-1}) / tau
  double relative_residual = 0.0;
};

/// (U^k - U^{k-1}, v)/tau + B(t^k; U^k, v) + K_h(U^k, v) + (f^{k-1}, v) = 0.
///
/// Operators are cached per mesh (and time, for unsteady velocity) and
/// factorizations per (mesh, tau), so repeated steps on an unchanged mesh
/// only cost the right-hand side and a back substitution.
class ImexSolver {
 public:
  explicit ImexSolver(ProblemData data);
  ~ImexSolver();
  ImexSolver(const ImexSolver&) = delete;
  ImexSolver& operator=(const ImexSolver&) = delete;

  const ProblemData& data() const { return data_; }

  /// U_h^0 = Pi^0 u0.
  DgField initial_field(SpacePtr space0) const;

  /// Advances U^{k-1} (on its own mesh) from t_prev by tau onto `target`.
  /// Throws FieldOverflow or SolverFailure.
  ImexResult step(const DgField& u_prev, double t_prev, double tau, SpacePtr target);

  /// Pi^k f^{k-1} with f^{k-1} = f0(t_prev) - (U^{k-1})^2 evaluated pointwise.
  DgField project_reaction(const DgField& u_prev, double t_prev, SpacePtr target) const;

  /// The field A with (A, v) = B(t; U, v) + K_h(U, v) for all v.
  DgField discrete_operator(const DgField& u, double t);

  /// B(t) + K_h on the space (cached).
  const SparseMatrix& operator_matrix(const SpacePtr& space, double t);

  /// Drops cached operators and factorizations.
  void clear_cache();

 private:
  struct Cache;
  ProblemData data_;
  std::unique_ptr<Cache> cache_;
};

/// max over the sample of |(A, v) - (B+K_h)(U, v)| / (|(A, v)| + |(B+K_h)(U, v)| + tiny)
/// for `samples` pseudo-random test fields v.
double a_consistency(const DgField& A, const DgField& u, const SparseMatrix& op, int samples,
                     unsigned seed);

}  // namespace blowup
