#include "blowup/imex_stepper.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>
#include <cmath>
#include <list>
#include <random>

namespace blowup {

namespace {

bool same_space(const SpacePtr& a, const SpacePtr& b) {
  if (a == b) return true;
  if (a->degree() != b->degree()) return false;
  if (a->mesh_ptr() == b->mesh_ptr()) return true;
  return a->mesh() == b->mesh();
}

/// Points per direction integrating the product of f0 - u^2 (degree 2p) and a
/// test function (degree p) exactly when f0 is polynomial of degree <= 2p.
int reaction_points(int degree) { return (3 * degree + 2) / 2 + 1; }

}  // namespace

struct ImexSolver::Cache {
  struct Factor {
    double tau = 0.0;
    std::unique_ptr<Eigen::SimplicialLDLT<SparseMatrix>> ldlt;
    std::unique_ptr<Eigen::SparseLU<SparseMatrix>> lu;
    SparseMatrix system;
  };
  struct Entry {
    SpacePtr space;
    double t = 0.0;
    SparseMatrix op;
    std::list<Factor> factors;
  };
  std::list<Entry> entries;  // most recent first
  static constexpr std::size_t kMaxEntries = 2;
  static constexpr std::size_t kMaxFactors = 3;
};

ImexSolver::ImexSolver(ProblemData data) : data_(std::move(data)), cache_(std::make_unique<Cache>()) {
  data_.validate();
}

ImexSolver::~ImexSolver() = default;

void ImexSolver::clear_cache() { cache_->entries.clear(); }

DgField ImexSolver::initial_field(SpacePtr space0) const {
  return l2_project_function(space0, [this](double x, double y) { return data_.initial(x, y); });
}

const SparseMatrix& ImexSolver::operator_matrix(const SpacePtr& space, double t) {
  auto& entries = cache_->entries;
  for (auto it = entries.begin(); it != entries.end(); ++it) {
    if (!same_space(it->space, space)) continue;
    if (!data_.velocity_steady && it->t != t) continue;
    entries.splice(entries.begin(), entries, it);
    return entries.front().op;
  }
  Cache::Entry e;
  e.space = space;
  e.t = t;
  DgForms f = assemble_forms(*space, data_, t);
  e.op = f.B + f.K;
  entries.push_front(std::move(e));
  if (entries.size() > Cache::kMaxEntries) entries.pop_back();
  return entries.front().op;
}

DgField ImexSolver::project_reaction(const DgField& u_prev, double t_prev, SpacePtr target) const {
  const int n = reaction_points(std::max(u_prev.space->degree(), target->degree()));
  auto reaction = [&](int src_cell, const BoxRule& r, std::span<double> vals) {
    evaluate_grid(u_prev, src_cell, r.xs, r.ys, Deriv::Value, vals);
    const std::size_t nx = r.xs.size();
    for (std::size_t q = 0; q < vals.size(); ++q) {
      const double f0 = data_.forcing(r.xs[q % nx], r.ys[q / nx], t_prev);
      vals[q] = f0 - vals[q] * vals[q];
    }
  };
  if (u_prev.space->mesh() == target->mesh()) {
    std::vector<int> identity(target->num_cells());
    for (std::size_t c = 0; c < identity.size(); ++c) identity[c] = static_cast<int>(c);
    return DgField(target, project_on_overlay(target->mesh(), identity, *target, n,
                                              [&](int o, const BoxRule& r, std::span<double> v) {
                                                reaction(o, r, v);
                                              }));
  }
  const CommonRefinement cr = common_refinement(u_prev.space->mesh(), target->mesh());
  return DgField(target, project_on_overlay(cr.overlay, cr.ancestor_b, *target, n,
                                            [&](int o, const BoxRule& r, std::span<double> v) {
                                              reaction(cr.ancestor_a[o], r, v);
                                            }));
}

ImexResult ImexSolver::step(const DgField& u_prev, double t_prev, double tau, SpacePtr target) {
  if (!(tau > 0.0)) throw std::invalid_argument("ImexSolver::step: tau must be positive");
  const double t = t_prev + tau;
  ImexResult res;
  res.proj_prev = l2_project_field(u_prev, target);
  res.proj_f = project_reaction(u_prev, t_prev, target);
  if (!res.proj_f.finite() || !res.proj_prev.finite())
    throw FieldOverflow("IMEX step: non-finite reaction term");

  const SparseMatrix& op = operator_matrix(target, t);
  Cache::Entry& entry = cache_->entries.front();
  Cache::Factor* factor = nullptr;
  for (auto it = entry.factors.begin(); it != entry.factors.end(); ++it) {
    if (it->tau == tau) {
      entry.factors.splice(entry.factors.begin(), entry.factors, it);
      factor = &entry.factors.front();
      break;
    }
  }
  if (!factor) {
    Cache::Factor f;
    f.tau = tau;
    SparseMatrix id(op.rows(), op.cols());
    id.setIdentity();
    f.system = op + id / tau;
    if (!data_.has_velocity()) {
      f.ldlt = std::make_unique<Eigen::SimplicialLDLT<SparseMatrix>>(f.system);
      if (f.ldlt->info() != Eigen::Success) throw SolverFailure("IMEX step: factorization failed");
    } else {
      f.lu = std::make_unique<Eigen::SparseLU<SparseMatrix>>();
      f.lu->compute(f.system);
      if (f.lu->info() != Eigen::Success) throw SolverFailure("IMEX step: factorization failed");
    }
    entry.factors.push_front(std::move(f));
    if (entry.factors.size() > Cache::kMaxFactors) entry.factors.pop_back();
    factor = &entry.factors.front();
  }

  const Eigen::VectorXd rhs = res.proj_prev.coeffs / tau - res.proj_f.coeffs;
  auto solve = [&](const Eigen::VectorXd& b) -> Eigen::VectorXd {
    return factor->ldlt ? Eigen::VectorXd(factor->ldlt->solve(b)) : Eigen::VectorXd(factor->lu->solve(b));
  };
  Eigen::VectorXd x = solve(rhs);
  if (!x.allFinite()) throw FieldOverflow("IMEX step: non-finite solution");
  const double bnorm = std::max(rhs.norm(), 1e-300);
  Eigen::VectorXd r = rhs - factor->system * x;
  double rel = r.norm() / bnorm;
  for (int it = 0; it < 3 && rel > 1e-12; ++it) {
    x += solve(r);
    r = rhs - factor->system * x;
    rel = r.norm() / bnorm;
  }
  if (!(rel <= 1e-10)) throw SolverFailure("IMEX step: linear solve did not reach 1e-10");
  res.relative_residual = rel;
  res.u = DgField(target, std::move(x));
  res.A = DgField(target, -res.proj_f.coeffs - (res.u.coeffs - res.proj_prev.coeffs) / tau);
  if (!res.A.finite()) throw FieldOverflow("IMEX step: non-finite A");
  return res;
}

DgField ImexSolver::discrete_operator(const DgField& u, double t) {
  const SparseMatrix& op = operator_matrix(u.space, t);
  return DgField(u.space, op * u.coeffs);
}

double a_consistency(const DgField& A, const DgField& u, const SparseMatrix& op, int samples,
                     unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  const Eigen::VectorXd bu = op * u.coeffs;
  double worst = 0.0;
  for (int s = 0; s < samples; ++s) {
    Eigen::VectorXd v(u.coeffs.size());
    for (auto& x : v) x = normal(rng);
    const double lhs = A.coeffs.dot(v);
    const double rhs = bu.dot(v);
    worst = std::max(worst, std::abs(lhs - rhs) / (std::abs(lhs) + std::abs(rhs) + 1e-300));
  }
  return worst;
}

}  // namespace blowup
