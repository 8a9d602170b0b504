#include "blowup/adaptive_driver.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "blowup/ode_blowup.hpp"

namespace blowup {

AdaptConfig AdaptConfig::with_defaults(double ttol_plus, double stol_plus) {
  AdaptConfig c;
  c.ttol_plus = ttol_plus;
  c.ttol_minus = 0.01 * ttol_plus;
  c.stol_plus = stol_plus;
  c.stol_minus = 1e-6 * stol_plus;
  return c;
}

void AdaptConfig::validate() const {
  auto pos = [](double v) { return std::isfinite(v) && v > 0.0; };
  if (!pos(ttol_plus) || !pos(ttol_minus) || !pos(stol_plus) || !pos(stol_minus))
    throw std::invalid_argument("tolerances must be positive");
  if (!(ttol_minus < ttol_plus)) throw std::invalid_argument("need ttol- < ttol+");
  if (!(stol_minus < stol_plus)) throw std::invalid_argument("need stol- < stol+");
  if (!pos(tau1)) throw std::invalid_argument("tau1 must be positive");
  if (degree < 0 || degree > 12) throw std::invalid_argument("degree must be in [0, 12]");
  if (grid_nx < 1 || grid_ny < 1) throw std::invalid_argument("grid must be at least 1x1");
  if (max_level < 0 || max_level > MeshForest::kMaxLevel) throw std::invalid_argument("bad max_level");
  if (max_halvings < 0 || max_steps < 1) throw std::invalid_argument("bad step limits");
  if (!(constants.C > 0.0) || !(constants.C_GN > 0.0)) throw std::invalid_argument("constants must be positive");
}

std::string to_string(StopReason reason) {
  switch (reason) {
    case StopReason::NoDelta: return "no_delta";
    case StopReason::Overflow: return "overflow";
    case StopReason::Horizon: return "horizon";
    case StopReason::MaxSteps: return "max_steps";
    case StopReason::InitialPhase: return "initial_phase";
  }
  return "unknown";
}

namespace {

struct Level {
  double t = 0.0;
  DgField u;
  DgField A;
  SpaceIndicator s1;
};

struct Trial {
  double tau = 0.0;
  ImexResult r;
  std::unique_ptr<SlabEstimator> est;
  double T2 = 0.0;
};

class Runner {
 public:
  Runner(const ProblemData& data, const AdaptConfig& cfg) : data_(data), cfg_(cfg), solver_(data) {}

  Trial trial(const Level& prev, double tau, const SpacePtr& target) {
    Trial tr;
    tr.tau = tau;
    tr.r = solver_.step(prev.u, prev.t, tau, target);
    SlabFields f;
    f.t_prev = prev.t;
    f.tau = tau;
    f.u_prev = &prev.u;
    f.A_prev = &prev.A;
    f.u_next = &tr.r.u;
    f.A_next = &tr.r.A;
    f.proj_f = &tr.r.proj_f;
    f.proj_prev = &tr.r.proj_prev;
    tr.est = std::make_unique<SlabEstimator>(f, data_, cfg_.constants);
    tr.T2 = tr.est->eta_T2_sq_integral();
    if (!std::isfinite(tr.T2)) throw FieldOverflow("non-finite time estimator");
    return tr;
  }

  Level initial(const SpacePtr& space) {
    Level l;
    l.t = 0.0;
    l.u = solver_.initial_field(space);
    l.A = solver_.discrete_operator(l.u, 0.0);
    l.s1 = eta_S1(l.u, l.A, data_, 0.0);
    return l;
  }

  /// Refines cells with indicator above stol+ (below max_level) and
  /// coarsens cells below stol-. Returns nullptr when nothing changes.
  std::shared_ptr<const MeshForest> adapt(const MeshForest& mesh, std::span<const double> ind,
                                          double stol_plus, double stol_minus) const {
    std::vector<int> refine;
    std::vector<CellKey> coarsen;
    const auto active = mesh.active();
    for (std::size_t c = 0; c < ind.size(); ++c) {
      if (ind[c] > stol_plus && active[c].level < cfg_.max_level) refine.push_back(static_cast<int>(c));
      else if (ind[c] < stol_minus && active[c].level > 0) coarsen.push_back(active[c]);
    }
    if (refine.empty() && coarsen.empty()) return nullptr;
    MeshForest next = mesh.refined(refine);
    std::vector<int> idx;
    for (const CellKey& k : coarsen) {
      const int i = next.index_of(k);
      if (i >= 0) idx.push_back(i);
    }
    if (!idx.empty()) next.coarsen(idx);
    if (next == mesh) return nullptr;
    return std::make_shared<const MeshForest>(std::move(next));
  }

  SpacePtr space_for(std::shared_ptr<const MeshForest> mesh) const { return make_space(std::move(mesh), cfg_.degree); }

  ImexSolver& solver() { return solver_; }

 private:
  const ProblemData& data_;
  const AdaptConfig& cfg_;
  ImexSolver solver_;
};

StepRecord record_of(long k, const Level& l, double tau, double T2, double scale) {
  StepRecord r;
  r.k = k;
  r.t = l.t;
  r.tau = tau;
  r.linf = linf_norm(l.u);
  r.cells = l.u.space->num_cells();
  r.dofs = static_cast<std::size_t>(l.u.coeffs.size());
  r.max_level = l.u.space->mesh().max_level();
  r.eta_T2_sq = T2;
  r.tol_scale = scale;
  return r;
}

}  // namespace

AdaptResult algorithm3_run(const ProblemData& data, const AdaptConfig& config, const StepObserver& observer) {
  config.validate();
  data.validate();
  AdaptResult out;
  Runner run(data, config);
  const BoundConstants& K = config.constants;

  double ttol_p = config.ttol_plus, ttol_m = config.ttol_minus;
  double stol_p = config.stol_plus, stol_m = config.stol_minus;
  double scale = 1.0;

  auto mesh0 = std::make_shared<const MeshForest>(data.domain, config.grid_nx, config.grid_ny);
  SpacePtr space0 = run.space_for(mesh0);
  double tau = config.tau1;
  int halvings = 0;

  // Initial phase: adapt zeta^0 and tau_1 until the first step meets both tolerances.
  Level l0 = run.initial(space0);
  std::optional<Trial> tr;
  SpaceIndicator s1;
  for (;;) {
    try {
      tr.emplace(run.trial(l0, tau, space0));
    } catch (const FieldOverflow&) {
      if (++halvings > config.max_halvings) {
        out.reason = StopReason::Overflow;
        out.message = "first step overflows at every admissible tau_1";
        out.u0 = l0.u;
        out.u_final = l0.u;
        return out;
      }
      tau *= 0.5;
      continue;
    }
    s1 = eta_S1(tr->r.u, tr->r.A, data, tau);
    const double s1max = *std::max_element(s1.per_cell.begin(), s1.per_cell.end());
    const bool time_fail = tr->T2 > ttol_p;
    if (!time_fail && !(s1max > stol_p)) break;
    auto next = run.adapt(*mesh0, s1.per_cell, stol_p, stol_m);
    bool changed = false;
    if (next) {
      mesh0 = next;
      space0 = run.space_for(mesh0);
      changed = true;
    }
    if (time_fail) {
      if (++halvings > config.max_halvings) {
        out.reason = StopReason::InitialPhase;
        out.message = "tau_1 halving limit reached in the initial phase";
        out.u0 = l0.u;
        out.u_final = l0.u;
        return out;
      }
      tau *= 0.5;
      changed = true;
    }
    if (!changed) break;  // spatial tolerance unreachable at max_level
    l0 = run.initial(space0);
  }

  out.u0 = l0.u;
  out.trajectory.push_back(record_of(0, l0, 0.0, 0.0, scale));
  if (observer) observer(out.trajectory.back(), l0.u);
  double psi = std::sqrt(K.C) * eta_I(l0.u, data);
  Level prev = std::move(l0);
  long k = 0;
  bool first = true;

  for (;;) {
    if (!first) {
      // tau_{j+1} = tau_j, then one halving or one doubling.
      try {
        tr.emplace(run.trial(prev, tau, prev.u.space));
        bool halved = false;
        if (tr->T2 > ttol_p) {
          tau *= 0.5;
          halved = true;
          tr.emplace(run.trial(prev, tau, prev.u.space));
        }
        if (!halved && tr->T2 < ttol_m) {
          tau *= 2.0;
          tr.emplace(run.trial(prev, tau, prev.u.space));
        }
        s1 = eta_S1(tr->r.u, tr->r.A, data, prev.t + tau);
        if (auto next = run.adapt(prev.u.space->mesh(), s1.per_cell, stol_p, stol_m)) {
          tr.emplace(run.trial(prev, tau, run.space_for(next)));
          s1 = eta_S1(tr->r.u, tr->r.A, data, prev.t + tau);
        }
      } catch (const FieldOverflow& e) {
        out.reason = StopReason::Overflow;
        out.message = e.what();
        break;
      }
    }
    first = false;

    const SlabIntegrals in = tr->est->integrals(prev.s1.value, s1.value);
    const PsiStep ps = psi_update(psi, in, tau, data.epsilon, K);
    if (!ps.delta) {
      out.reason = StopReason::NoDelta;
      break;
    }
    ++k;
    psi = ps.Psi;
    out.jump_max = std::max(out.jump_max, in.jump_max);
    scale *= ps.growth;
    ttol_p = config.ttol_plus * scale;
    ttol_m = config.ttol_minus * scale;
    stol_p = config.stol_plus * scale;
    stol_m = config.stol_minus * scale;

    Level next;
    next.t = prev.t + tau;
    next.u = std::move(tr->r.u);
    next.A = std::move(tr->r.A);
    next.s1 = std::move(s1);
    tr.reset();

    LedgerRow row;
    row.k = k;
    row.t = next.t;
    row.tau = tau;
    row.eta_S1 = next.s1.value;
    row.eta_A_sq = in.eta_A_sq;
    row.eta_B = in.eta_B;
    row.sigma_max = in.sigma_max;
    row.growth = ps.growth;
    row.delta = *ps.delta;
    row.Phi = ps.Phi;
    row.Psi = ps.Psi;
    out.ledger.push_back(row);
    out.trajectory.push_back(record_of(k, next, tau, in.eta_T2_sq, scale));
    if (observer) observer(out.trajectory.back(), next.u);
    prev = std::move(next);

    if (prev.t >= config.horizon) {
      out.reason = StopReason::Horizon;
      break;
    }
    if (k >= config.max_steps) {
      out.reason = StopReason::MaxSteps;
      break;
    }
  }

  out.steps = k;
  out.final_time = prev.t;
  out.final_linf = out.trajectory.back().linf;
  out.psi = psi;
  out.estimator = final_bound(psi, out.jump_max);
  out.tol_scale = scale;
  out.u_final = std::move(prev.u);
  return out;
}

double extrapolate_tstar(double t_prev, double norm_prev, double t_last, double norm_last) {
  const double d = norm_last - norm_prev;
  if (!(std::abs(d) > 0.0) || !std::isfinite(d)) throw DegenerateFit("extrapolate_tstar: equal norms");
  return (t_last * norm_last - t_prev * norm_prev) / d;
}

std::vector<double> blowup_rate_sequence(std::span<const double> times, std::span<const double> norms,
                                         double t_star) {
  if (times.size() != norms.size()) throw std::invalid_argument("blowup_rate_sequence: size mismatch");
  std::vector<double> p;
  for (std::size_t k = 1; k < times.size(); ++k) {
    if (!(t_star > times[k])) throw DegenerateFit("blowup_rate_sequence: t* not beyond the data");
    if (!(norms[k - 1] > 0.0) || !(norms[k] > 0.0)) throw DegenerateFit("blowup_rate_sequence: nonpositive norm");
    p.push_back(std::log(norms[k] / norms[k - 1]) / std::log((t_star - times[k - 1]) / (t_star - times[k])));
  }
  return p;
}

double fit_norm_growth(std::span<const double> steps, std::span<const double> norms) {
  if (steps.size() != norms.size() || steps.size() < 2)
    throw DegenerateFit("fit_norm_growth: need at least two points");
  return ode::loglog_slope(steps, norms);
}

}  // namespace blowup
