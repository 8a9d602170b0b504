#include "blowup/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "blowup/delta_equation.hpp"

namespace blowup {

namespace {

double edge_trace_points(const EdgeRule& r) { return static_cast<double>(std::max(r.xs.size(), r.ys.size())); }

}  // namespace

SpaceIndicator eta_S1(const DgField& u, const DgField& A, const ProblemData& data, double t) {
  const DgSpace& space = *u.space;
  const MeshForest& mesh = space.mesh();
  const int p = space.degree();
  const double eps = data.epsilon;
  SpaceIndicator out;
  out.per_cell.assign(space.num_cells(), 0.0);

  const int nv = p + 2;
  const std::size_t nq = static_cast<std::size_t>(nv) * nv;
  std::vector<double> a(nq), uxx(nq), uyy(nq), ux(nq), uy(nq);
  for (std::size_t c = 0; c < space.num_cells(); ++c) {
    const int cell = static_cast<int>(c);
    const Box box = mesh.box(cell);
    const BoxRule r = box_rule(box, nv);
    evaluate_grid(A, cell, r.xs, r.ys, Deriv::Value, a);
    evaluate_grid(u, cell, r.xs, r.ys, Deriv::Dxx, uxx);
    evaluate_grid(u, cell, r.xs, r.ys, Deriv::Dyy, uyy);
    if (data.has_velocity()) {
      evaluate_grid(u, cell, r.xs, r.ys, Deriv::Dx, ux);
      evaluate_grid(u, cell, r.xs, r.ys, Deriv::Dy, uy);
    }
    double s = 0.0;
    for (std::size_t q = 0; q < nq; ++q) {
      double res = a[q] + eps * (uxx[q] + uyy[q]);
      if (data.has_velocity()) {
        const Vec2 v = data.a(r.xs[q % nv], r.ys[q / nv], t);
        res -= v.x * ux[q] + v.y * uy[q];
      }
      s += r.w[q] * res * res;
    }
    const double h = box.diameter();
    out.per_cell[c] += h * h / eps * s;
  }

  const int ne = p + 2;
  std::vector<double> um(ne), up(ne), umx(ne), umy(ne), upx(ne), upy(ne);
  for (const Edge& e : mesh.edges()) {
    const EdgeRule r = edge_rule(e, ne);
    evaluate_grid(u, e.minus, r.xs, r.ys, Deriv::Value, um);
    const bool boundary = e.boundary();
    if (!boundary) {
      evaluate_grid(u, e.plus, r.xs, r.ys, Deriv::Value, up);
      evaluate_grid(u, e.minus, r.xs, r.ys, Deriv::Dx, umx);
      evaluate_grid(u, e.minus, r.xs, r.ys, Deriv::Dy, umy);
      evaluate_grid(u, e.plus, r.xs, r.ys, Deriv::Dx, upx);
      evaluate_grid(u, e.plus, r.xs, r.ys, Deriv::Dy, upy);
    }
    const double h = e.length;
    double s = 0.0;
    for (int q = 0; q < ne; ++q) {
      const double jump = um[q] - (boundary ? 0.0 : up[q]);
      double term = data.gamma * eps / h * jump * jump;
      if (!boundary) {
        const double gj = (umx[q] - upx[q]) * e.nx + (umy[q] - upy[q]) * e.ny;
        term += eps * h * gj * gj;
      }
      if (data.has_velocity()) {
        const double x = r.xs.size() == 1 ? r.xs[0] : r.xs[q];
        const double y = r.ys.size() == 1 ? r.ys[0] : r.ys[q];
        const Vec2 v = data.a(x, y, t);
        const double aj = (v.x * e.nx + v.y * e.ny) * jump;
        term += h / eps * aj * aj;
      }
      s += r.w[q] * term;
    }
    if (boundary) {
      out.per_cell[e.minus] += s;
    } else {
      out.per_cell[e.minus] += 0.5 * s;
      out.per_cell[e.plus] += 0.5 * s;
    }
  }
  double total = 0.0;
  for (double v : out.per_cell) total += v;
  out.value = std::sqrt(total);
  return out;
}

double eta_I(const DgField& u0h, const ProblemData& data) {
  const DgSpace& space = *u0h.space;
  const int n = space.degree() + 3;
  const std::size_t nq = static_cast<std::size_t>(n) * n;
  std::vector<double> v(nq);
  double err = 0.0;
  for (std::size_t c = 0; c < space.num_cells(); ++c) {
    const BoxRule r = box_rule(space.mesh().box(static_cast<int>(c)), n);
    evaluate_grid(u0h, static_cast<int>(c), r.xs, r.ys, Deriv::Value, v);
    for (std::size_t q = 0; q < nq; ++q) {
      const double d = data.initial(r.xs[q % n], r.ys[q / n]) - v[q];
      err += r.w[q] * d * d;
    }
  }
  const double jump = edge_norms(u0h).weighted;
  return std::sqrt(err + jump * jump);
}

SlabEstimator::SlabEstimator(const SlabFields& f, const ProblemData& data, BoundConstants constants)
    : t_prev_(f.t_prev), tau_(f.tau), data_(data), constants_(constants) {
  if (!f.u_prev || !f.A_prev || !f.u_next || !f.A_next || !f.proj_f || !f.proj_prev)
    throw std::invalid_argument("SlabEstimator: missing field");
  if (!(tau_ > 0.0)) throw std::invalid_argument("SlabEstimator: tau must be positive");
  const int p = std::max(f.u_prev->space->degree(), f.u_next->space->degree());
  const CommonRefinement cr = common_refinement(f.u_prev->space->mesh(), f.u_next->space->mesh());
  overlay_ = std::make_shared<const MeshForest>(cr.overlay);
  const SpacePtr so = make_space(overlay_, p);
  const DgField up = inject(*f.u_prev, so);
  const DgField un = inject(*f.u_next, so);
  const DgField ap = inject(*f.A_prev, so);
  const DgField an = inject(*f.A_next, so);
  const DgField pf = inject(*f.proj_f, so);
  const DgField pu = inject(*f.proj_prev, so);
  const double eps = data_.epsilon;

  n_vol_ = 2 * p + 1;
  const std::size_t nq = static_cast<std::size_t>(n_vol_) * n_vol_;
  const std::size_t ncell = overlay_->num_active();
  cell_h_.resize(ncell);
  qx_.resize(ncell * nq);
  qy_.resize(ncell * nq);
  qw_.resize(ncell * nq);
  up_.resize(ncell * nq);
  un_.resize(ncell * nq);
  dA_.resize(ncell * nq);
  f0prev_.resize(ncell * nq);
  std::vector<double> tmp_a(nq), tmp_b(nq), tmp_pf(nq), tmp_pu(nq);
  double s2 = 0.0;
  for (std::size_t c = 0; c < ncell; ++c) {
    const int cell = static_cast<int>(c);
    const Box box = overlay_->box(cell);
    cell_h_[c] = box.diameter();
    const BoxRule r = box_rule(box, n_vol_);
    const std::size_t off = c * nq;
    std::span<double> sup(up_.data() + off, nq), sun(un_.data() + off, nq);
    evaluate_grid(up, cell, r.xs, r.ys, Deriv::Value, sup);
    evaluate_grid(un, cell, r.xs, r.ys, Deriv::Value, sun);
    evaluate_grid(ap, cell, r.xs, r.ys, Deriv::Value, tmp_a);
    evaluate_grid(an, cell, r.xs, r.ys, Deriv::Value, tmp_b);
    evaluate_grid(pf, cell, r.xs, r.ys, Deriv::Value, tmp_pf);
    evaluate_grid(pu, cell, r.xs, r.ys, Deriv::Value, tmp_pu);
    double cell_s2 = 0.0;
    for (std::size_t q = 0; q < nq; ++q) {
      const double x = r.xs[q % n_vol_], y = r.ys[q / n_vol_];
      qx_[off + q] = x;
      qy_[off + q] = y;
      qw_[off + q] = r.w[q];
      dA_[off + q] = tmp_b[q] - tmp_a[q];
      f0prev_[off + q] = data_.forcing(x, y, t_prev_);
      const double fprev = f0prev_[off + q] - sup[q] * sup[q];
      const double res = fprev - tmp_pf[q] - (sup[q] - tmp_pu[q]) / tau_;
      cell_s2 += r.w[q] * res * res;
    }
    s2 += cell_h_[c] * cell_h_[c] / eps * cell_s2;
  }
  eta_S2_ = std::sqrt(s2);

  n_samp_ = linf_samples(p);
  const std::size_t ns = static_cast<std::size_t>(n_samp_) * n_samp_;
  sup_.resize(ncell * ns);
  sun_.resize(ncell * ns);
  for (std::size_t c = 0; c < ncell; ++c) {
    const Box b = overlay_->box(static_cast<int>(c));
    const auto xs = sample_points(b.x0, b.x1, n_samp_);
    const auto ys = sample_points(b.y0, b.y1, n_samp_);
    evaluate_grid(up, static_cast<int>(c), xs, ys, Deriv::Value,
                  std::span<double>(sup_.data() + c * ns, ns));
    evaluate_grid(un, static_cast<int>(c), xs, ys, Deriv::Value,
                  std::span<double>(sun_.data() + c * ns, ns));
  }

  const int ne = p + 1;
  std::vector<double> a(std::max(ne, n_samp_)), b(a.size());
  auto jumps = [&](const DgField& u, const Edge& e, const EdgeRule& r, std::vector<double>& out) {
    const std::size_t n = static_cast<std::size_t>(edge_trace_points(r));
    evaluate_grid(u, e.minus, r.xs, r.ys, Deriv::Value, std::span<double>(a.data(), n));
    if (!e.boundary()) evaluate_grid(u, e.plus, r.xs, r.ys, Deriv::Value, std::span<double>(b.data(), n));
    out.resize(n);
    for (std::size_t q = 0; q < n; ++q) out[q] = a[q] - (e.boundary() ? 0.0 : b[q]);
  };
  double s4 = 0.0;
  edges_.resize(overlay_->edges().size());
  for (std::size_t i = 0; i < edges_.size(); ++i) {
    const Edge& e = overlay_->edges()[i];
    EdgeData& d = edges_[i];
    d.h = e.length;
    const EdgeRule r = edge_rule(e, ne);
    d.w = r.w;
    jumps(up, e, r, d.jp);
    jumps(un, e, r, d.jn);
    const EdgeRule sr = edge_samples(e, n_samp_);
    jumps(up, e, sr, d.sjp);
    jumps(un, e, sr, d.sjn);
    double s = 0.0;
    for (int q = 0; q < ne; ++q) {
      const double j = (d.jn[q] - d.jp[q]) / tau_;
      s += d.w[q] * j * j;
    }
    s4 += d.h * s;
  }
  eta_S4_ = std::sqrt(s4);

  patch_.resize(ncell);
  for (std::size_t c = 0; c < ncell; ++c) patch_[c] = overlay_->edge_patch(static_cast<int>(c));
}

double SlabEstimator::eta_T1(double t) const {
  if (!data_.has_velocity() || data_.velocity_steady) return 0.0;
  const double l1 = lk(t), l0 = 1.0 - l1;
  const double t1 = t_prev_ + tau_;
  double s = 0.0;
  for (std::size_t q = 0; q < qw_.size(); ++q) {
    const Vec2 a = data_.a(qx_[q], qy_[q], t);
    const Vec2 ap = data_.a(qx_[q], qy_[q], t_prev_);
    const Vec2 an = data_.a(qx_[q], qy_[q], t1);
    const double vx = l0 * (ap.x - a.x) * up_[q] + l1 * (an.x - a.x) * un_[q];
    const double vy = l0 * (ap.y - a.y) * up_[q] + l1 * (an.y - a.y) * un_[q];
    s += qw_[q] * (vx * vx + vy * vy);
  }
  return std::sqrt(s / data_.epsilon);
}

double SlabEstimator::eta_T2(double t) const {
  const double l1 = lk(t), l0 = 1.0 - l1;
  const bool steady = !data_.f0 || data_.f0_steady;
  double s = 0.0;
  for (std::size_t q = 0; q < qw_.size(); ++q) {
    const double u = l0 * up_[q] + l1 * un_[q];
    const double f0t = steady ? f0prev_[q] : data_.forcing(qx_[q], qy_[q], t);
    const double v = (f0prev_[q] - up_[q] * up_[q]) - (f0t - u * u) + l0 * dA_[q];
    s += qw_[q] * v * v;
  }
  return std::sqrt(s);
}

std::vector<double> SlabEstimator::edge_linf(double t) const {
  const double l1 = lk(t), l0 = 1.0 - l1;
  std::vector<double> out(edges_.size());
  for (std::size_t i = 0; i < edges_.size(); ++i) {
    double m = 0.0;
    const EdgeData& d = edges_[i];
    for (std::size_t q = 0; q < d.sjp.size(); ++q) m = std::max(m, std::abs(l0 * d.sjp[q] + l1 * d.sjn[q]));
    out[i] = m;
  }
  return out;
}

double SlabEstimator::sigma_omega(double t) const {
  const double l1 = lk(t), l0 = 1.0 - l1;
  double m = 0.0;
  for (std::size_t q = 0; q < sup_.size(); ++q) m = std::max(m, std::abs(l0 * sup_[q] + l1 * sun_[q]));
  double j = 0.0;
  for (double v : edge_linf(t)) j = std::max(j, v);
  return 2.0 * m + constants_.C * j;
}

double SlabEstimator::eta_S3(double t) const {
  const double l1 = lk(t), l0 = 1.0 - l1;
  const std::vector<double> linf = edge_linf(t);
  std::vector<double> weighted(edges_.size());
  for (std::size_t i = 0; i < edges_.size(); ++i) {
    const EdgeData& d = edges_[i];
    double s = 0.0;
    for (std::size_t q = 0; q < d.w.size(); ++q) {
      const double j = l0 * d.jp[q] + l1 * d.jn[q];
      s += d.w[q] * j * j;
    }
    weighted[i] = d.h * s;
  }
  const std::size_t ns = static_cast<std::size_t>(n_samp_) * n_samp_;
  double total = 0.0;
  for (std::size_t c = 0; c < patch_.size(); ++c) {
    double umax = 0.0;
    for (std::size_t q = c * ns; q < (c + 1) * ns; ++q)
      umax = std::max(umax, std::abs(l0 * sup_[q] + l1 * sun_[q]));
    double jmax = 0.0, jsum = 0.0;
    for (int e : patch_[c]) {
      jmax = std::max(jmax, linf[e]);
      jsum += weighted[e];
    }
    const double sigma = 2.0 * umax + jmax;
    total += sigma * sigma * jsum;
  }
  return std::sqrt(total);
}

double SlabEstimator::jump_term(double t) const {
  const double l1 = lk(t), l0 = 1.0 - l1;
  double total = 0.0;
  for (const EdgeData& d : edges_) {
    double s = 0.0;
    for (std::size_t q = 0; q < d.w.size(); ++q) {
      const double j = l0 * d.jp[q] + l1 * d.jn[q];
      s += d.w[q] * j * j;
    }
    total += d.h * s;
  }
  return std::sqrt(total);
}

double SlabEstimator::eta_T2_sq_integral() const {
  const GaussRule g = gauss_legendre(4, t_prev_, t_prev_ + tau_);
  double s = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double v = eta_T2(g.nodes[i]);
    s += g.weights[i] * v * v;
  }
  return s;
}

SlabIntegrals SlabEstimator::integrals(double eta_S1_prev, double eta_S1_next) const {
  SlabIntegrals out;
  const double t1 = t_prev_ + tau_;
  const GaussRule g3 = gauss_legendre(3, t_prev_, t1);
  for (std::size_t i = 0; i < g3.size(); ++i) {
    const double t = g3.nodes[i];
    const double l1 = lk(t);
    const double a = (1.0 - l1) * eta_S1_prev + l1 * eta_S1_next + eta_S2_ + eta_T1(t);
    out.eta_A_sq += g3.weights[i] * a * a;
    out.jump_max = std::max(out.jump_max, jump_term(t));
  }
  out.jump_max = std::max({out.jump_max, jump_term(t_prev_), jump_term(t1)});
  const GaussRule g4 = gauss_legendre(4, t_prev_, t1);
  for (std::size_t i = 0; i < g4.size(); ++i) {
    const double t = g4.nodes[i];
    const double t2 = eta_T2(t);
    const double sig = sigma_omega(t);
    out.eta_B += g4.weights[i] * (eta_S3(t) + eta_S4_ + t2);
    out.eta_T2_sq += g4.weights[i] * t2 * t2;
    out.sigma += g4.weights[i] * sig;
    out.sigma_max = std::max(out.sigma_max, sig);
  }
  out.sigma_max = std::max({out.sigma_max, sigma_omega(t_prev_), sigma_omega(t1)});
  return out;
}

std::optional<double> solve_delta_pde(double tau, double growth, double Phi, double epsilon,
                                      double C_GN) {
  const double c = C_GN * C_GN / epsilon * tau * growth * growth * Phi * Phi;
  if (!std::isfinite(c)) return std::nullopt;
  const double coeffs[2] = {0.0, c};
  return smallest_root_above_one(coeffs);
}

PsiStep psi_update(double psi_prev, const SlabIntegrals& in, double tau, double epsilon,
                   BoundConstants constants) {
  PsiStep out;
  out.Phi = std::sqrt(psi_prev * psi_prev + constants.C * in.eta_A_sq) + constants.C * in.eta_B;
  out.growth = std::exp(in.sigma);
  out.delta = solve_delta_pde(tau, out.growth, out.Phi, epsilon, constants.C_GN);
  if (out.delta) out.Psi = *out.delta * out.growth * out.Phi;
  return out;
}

std::string ledger_header() {
  return "k,t,tau,eta_S1,int_eta_A_sq,int_eta_B,sigma_max,growth,delta,Phi,Psi";
}

std::string ledger_line(const LedgerRow& r) {
  std::ostringstream out;
  out.imbue(std::locale::classic());
  out << std::setprecision(17) << r.k << ',' << r.t << ',' << r.tau << ',' << r.eta_S1 << ','
      << r.eta_A_sq << ',' << r.eta_B << ',' << r.sigma_max << ',' << r.growth << ',' << r.delta
      << ',' << r.Phi << ',' << r.Psi;
  return out.str();
}

}  // namespace blowup
