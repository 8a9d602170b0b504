#include "blowup/dg_space.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

namespace blowup {

namespace {

/// 1D tables of the orthonormal Legendre family at physical points mapped
/// into [a, b]; derivative tables include the chain-rule factor.
struct Table1d {
  int n_basis = 0;
  std::size_t n_points = 0;
  std::vector<double> v, d1, d2;  // [q * n_basis + k]

  void fill(int degree, double a, double b, std::span<const double> pts, int need) {
    n_basis = degree + 1;
    n_points = pts.size();
    v.assign(n_points * n_basis, 0.0);
    if (need >= 1) d1.assign(n_points * n_basis, 0.0);
    if (need >= 2) d2.assign(n_points * n_basis, 0.0);
    const double s = 2.0 / (b - a);
    for (std::size_t q = 0; q < n_points; ++q) {
      const double xi = std::clamp(s * (pts[q] - a) - 1.0, -1.0, 1.0);
      std::span<double> vv(v.data() + q * n_basis, n_basis);
      std::span<double> dd = need >= 1 ? std::span<double>(d1.data() + q * n_basis, n_basis)
                                       : std::span<double>();
      std::span<double> ee = need >= 2 ? std::span<double>(d2.data() + q * n_basis, n_basis)
                                       : std::span<double>();
      legendre_orthonormal(degree, xi, vv, dd, ee);
      for (double& d : dd) d *= s;
      for (double& e : ee) e *= s * s;
    }
  }
  const double* row(const std::vector<double>& t, std::size_t q) const { return t.data() + q * n_basis; }
};

thread_local Table1d tls_tx, tls_ty;
thread_local std::vector<double> tls_tmp;

}  // namespace

DgSpace::DgSpace(std::shared_ptr<const MeshForest> mesh, int degree)
    : mesh_(std::move(mesh)), degree_(degree) {
  if (!mesh_) throw std::invalid_argument("DgSpace: null mesh");
  if (degree < 0 || degree > 12) throw std::invalid_argument("DgSpace: degree out of range");
}

SpacePtr make_space(std::shared_ptr<const MeshForest> mesh, int degree) {
  return std::make_shared<const DgSpace>(std::move(mesh), degree);
}

DgField::DgField(SpacePtr s) : space(std::move(s)) {
  coeffs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(space->num_dofs()));
}

DgField::DgField(SpacePtr s, Eigen::VectorXd c) : space(std::move(s)), coeffs(std::move(c)) {
  if (coeffs.size() != static_cast<Eigen::Index>(space->num_dofs()))
    throw std::invalid_argument("DgField: coefficient count does not match the space");
}

double DgField::value(int cell, double x, double y) const {
  double out = 0.0;
  const double xs[1] = {x}, ys[1] = {y};
  evaluate_grid(*this, cell, xs, ys, Deriv::Value, std::span<double>(&out, 1));
  return out;
}

void basis_at(const DgSpace& space, int cell, double x, double y, BasisPoint& out, bool want_grad) {
  const Box b = space.mesh().box(cell);
  const int P = space.degree() + 1;
  const double sx = 2.0 / b.width(), sy = 2.0 / b.height();
  const double xi = std::clamp(sx * (x - b.x0) - 1.0, -1.0, 1.0);
  const double eta = std::clamp(sy * (y - b.y0) - 1.0, -1.0, 1.0);
  double lx[16], ly[16], dlx[16], dly[16];
  legendre_orthonormal(P - 1, xi, std::span<double>(lx, P), std::span<double>(dlx, P));
  legendre_orthonormal(P - 1, eta, std::span<double>(ly, P), std::span<double>(dly, P));
  const double s = 2.0 / std::sqrt(b.area());
  const std::size_t nb = static_cast<std::size_t>(P) * P;
  out.v.resize(nb);
  if (want_grad) {
    out.dx.resize(nb);
    out.dy.resize(nb);
  }
  for (int bb = 0; bb < P; ++bb) {
    for (int a = 0; a < P; ++a) {
      const std::size_t i = a + static_cast<std::size_t>(P) * bb;
      out.v[i] = s * lx[a] * ly[bb];
      if (want_grad) {
        out.dx[i] = s * sx * dlx[a] * ly[bb];
        out.dy[i] = s * lx[a] * sy * dly[bb];
      }
    }
  }
}

void evaluate_grid(const DgSpace& space, int cell, std::span<const double> c,
                   std::span<const double> xs, std::span<const double> ys, Deriv op,
                   std::span<double> out) {
  const Box b = space.mesh().box(cell);
  const int p = space.degree();
  const int P = p + 1;
  const int need_x = op == Deriv::Dx ? 1 : op == Deriv::Dxx ? 2 : 0;
  const int need_y = op == Deriv::Dy ? 1 : op == Deriv::Dyy ? 2 : 0;
  Table1d& tx = tls_tx;
  Table1d& ty = tls_ty;
  tx.fill(p, b.x0, b.x1, xs, need_x);
  ty.fill(p, b.y0, b.y1, ys, need_y);
  const auto& X = need_x == 0 ? tx.v : need_x == 1 ? tx.d1 : tx.d2;
  const auto& Y = need_y == 0 ? ty.v : need_y == 1 ? ty.d1 : ty.d2;
  const double s = 2.0 / std::sqrt(b.area());
  const std::size_t nx = xs.size(), ny = ys.size();
  // tmp[bb * nx + qx] = sum_a c[a + P bb] X(qx, a)
  std::vector<double>& tmp = tls_tmp;
  tmp.assign(static_cast<std::size_t>(P) * nx, 0.0);
  for (int bb = 0; bb < P; ++bb) {
    const double* cb = c.data() + static_cast<std::size_t>(P) * bb;
    for (std::size_t qx = 0; qx < nx; ++qx) {
      const double* xr = tx.row(X, qx);
      double acc = 0.0;
      for (int a = 0; a < P; ++a) acc += cb[a] * xr[a];
      tmp[bb * nx + qx] = acc;
    }
  }
  for (std::size_t qy = 0; qy < ny; ++qy) {
    const double* yr = ty.row(Y, qy);
    for (std::size_t qx = 0; qx < nx; ++qx) {
      double acc = 0.0;
      for (int bb = 0; bb < P; ++bb) acc += tmp[bb * nx + qx] * yr[bb];
      out[qx + nx * qy] = s * acc;
    }
  }
}

void evaluate_grid(const DgField& u, int cell, std::span<const double> xs,
                   std::span<const double> ys, Deriv op, std::span<double> out) {
  const auto blk = u.block(cell);
  evaluate_grid(*u.space, cell, std::span<const double>(blk.data(), blk.size()), xs, ys, op, out);
}

void integrate_grid(const DgSpace& space, int cell, std::span<const double> xs,
                    std::span<const double> ys, std::span<const double> g, std::span<double> out) {
  const Box b = space.mesh().box(cell);
  const int p = space.degree();
  const int P = p + 1;
  Table1d& tx = tls_tx;
  Table1d& ty = tls_ty;
  tx.fill(p, b.x0, b.x1, xs, 0);
  ty.fill(p, b.y0, b.y1, ys, 0);
  const double s = 2.0 / std::sqrt(b.area());
  const std::size_t nx = xs.size(), ny = ys.size();
  // tmp[bb * nx + qx] = sum_qy g(qx, qy) Y(qy, bb)
  std::vector<double>& tmp = tls_tmp;
  tmp.assign(static_cast<std::size_t>(P) * nx, 0.0);
  for (std::size_t qy = 0; qy < ny; ++qy) {
    const double* yr = ty.row(ty.v, qy);
    for (int bb = 0; bb < P; ++bb)
      for (std::size_t qx = 0; qx < nx; ++qx) tmp[bb * nx + qx] += g[qx + nx * qy] * yr[bb];
  }
  for (int bb = 0; bb < P; ++bb) {
    for (int a = 0; a < P; ++a) {
      double acc = 0.0;
      for (std::size_t qx = 0; qx < nx; ++qx) acc += tmp[bb * nx + qx] * tx.row(tx.v, qx)[a];
      out[a + static_cast<std::size_t>(P) * bb] += s * acc;
    }
  }
}

BoxRule box_rule(const Box& box, int n) {
  const GaussRule rx = gauss_legendre(n, box.x0, box.x1);
  const GaussRule ry = gauss_legendre(n, box.y0, box.y1);
  BoxRule r;
  r.xs = rx.nodes;
  r.ys = ry.nodes;
  r.w.resize(static_cast<std::size_t>(n) * n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) r.w[i + static_cast<std::size_t>(n) * j] = rx.weights[i] * ry.weights[j];
  return r;
}

EdgeRule edge_rule(const Edge& e, int n) {
  EdgeRule r;
  const bool vertical = e.side == Side::West || e.side == Side::East;
  if (vertical) {
    const GaussRule g = gauss_legendre(n, e.ya, e.yb);
    r.xs = {e.xa};
    r.ys = g.nodes;
    r.w = g.weights;
  } else {
    const GaussRule g = gauss_legendre(n, e.xa, e.xb);
    r.xs = g.nodes;
    r.ys = {e.ya};
    r.w = g.weights;
  }
  return r;
}

std::vector<double> sample_points(double a, double b, int n) {
  std::vector<double> pts(n);
  if (n == 1) {
    pts[0] = 0.5 * (a + b);
    return pts;
  }
  for (int i = 0; i < n; ++i) pts[i] = a + (b - a) * i / (n - 1);
  pts.back() = b;
  return pts;
}

EdgeRule edge_samples(const Edge& e, int n) {
  EdgeRule r;
  const bool vertical = e.side == Side::West || e.side == Side::East;
  if (vertical) {
    r.xs = {e.xa};
    r.ys = sample_points(e.ya, e.yb, n);
  } else {
    r.xs = sample_points(e.xa, e.xb, n);
    r.ys = {e.ya};
  }
  r.w.assign(n, 1.0);
  return r;
}

DgField l2_project_function(SpacePtr space, const std::function<double(double, double)>& g,
                            int points) {
  if (points <= 0) points = space->degree() + 2;
  DgField out(space);
  const std::size_t nq = static_cast<std::size_t>(points) * points;
  std::vector<double> vals(nq);
  for (std::size_t c = 0; c < space->num_cells(); ++c) {
    const BoxRule r = box_rule(space->mesh().box(static_cast<int>(c)), points);
    for (int j = 0; j < points; ++j)
      for (int i = 0; i < points; ++i) {
        const std::size_t q = i + static_cast<std::size_t>(points) * j;
        vals[q] = r.w[q] * g(r.xs[i], r.ys[j]);
      }
    auto blk = out.block(static_cast<int>(c));
    integrate_grid(*space, static_cast<int>(c), r.xs, r.ys, vals,
                   std::span<double>(blk.data(), blk.size()));
  }
  return out;
}

Eigen::VectorXd project_on_overlay(const MeshForest& overlay, std::span<const int> target_of,
                                   const DgSpace& target, int points, const OverlayIntegrand& g) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(target.num_dofs()));
  const std::size_t nq = static_cast<std::size_t>(points) * points;
  std::vector<double> vals(nq);
  const int nb = target.dofs_per_cell();
  for (std::size_t o = 0; o < overlay.num_active(); ++o) {
    const BoxRule r = box_rule(overlay.box(static_cast<int>(o)), points);
    g(static_cast<int>(o), r, vals);
    for (std::size_t q = 0; q < nq; ++q) vals[q] *= r.w[q];
    const int tc = target_of[o];
    integrate_grid(target, tc, r.xs, r.ys, vals,
                   std::span<double>(out.data() + static_cast<std::size_t>(tc) * nb, nb));
  }
  return out;
}

DgField l2_project_field(const DgField& field, SpacePtr target) {
  if (field.space->mesh() == target->mesh() && field.space->degree() == target->degree())
    return DgField(target, field.coeffs);
  const CommonRefinement cr = common_refinement(field.space->mesh(), target->mesh());
  const int n = std::max(field.space->degree(), target->degree()) + 1;
  Eigen::VectorXd c = project_on_overlay(
      cr.overlay, cr.ancestor_b, *target, n,
      [&](int o, const BoxRule& r, std::span<double> vals) {
        evaluate_grid(field, cr.ancestor_a[o], r.xs, r.ys, Deriv::Value, vals);
      });
  return DgField(target, std::move(c));
}

DgField inject(const DgField& field, SpacePtr finer) {
  const MeshForest& src = field.space->mesh();
  const MeshForest& dst = finer->mesh();
  if (src == dst && field.space->degree() == finer->degree()) return DgField(finer, field.coeffs);
  const int n = std::max(field.space->degree(), finer->degree()) + 1;
  DgField out(finer);
  std::vector<double> vals(static_cast<std::size_t>(n) * n);
  const auto cells = dst.active();
  for (std::size_t c = 0; c < cells.size(); ++c) {
    const int a = active_ancestor(src, cells[c]);
    if (a < 0) throw std::invalid_argument("inject: target mesh does not refine the source mesh");
    auto blk = out.block(static_cast<int>(c));
    if (src.active()[a] == cells[c] && field.space->degree() == finer->degree()) {
      blk = field.block(a);
      continue;
    }
    const BoxRule r = box_rule(dst.box(cells[c]), n);
    evaluate_grid(field, a, r.xs, r.ys, Deriv::Value, vals);
    for (std::size_t q = 0; q < vals.size(); ++q) vals[q] *= r.w[q];
    integrate_grid(*finer, static_cast<int>(c), r.xs, r.ys, vals,
                   std::span<double>(blk.data(), blk.size()));
  }
  return out;
}

DgForms assemble_forms(const DgSpace& space, const ProblemData& data, double t) {
  const MeshForest& mesh = space.mesh();
  const int nb = space.dofs_per_cell();
  const int p = space.degree();
  const double eps = data.epsilon;
  const double gamma = data.gamma;
  const bool convection = data.has_velocity();

  std::vector<Eigen::Triplet<double>> tb, tk;
  tb.reserve(mesh.num_active() * nb * nb * 3);
  tk.reserve(mesh.num_active() * nb * nb * 4);
  auto scatter = [nb](std::vector<Eigen::Triplet<double>>& trip, int row_cell, int col_cell,
                      const Eigen::MatrixXd& m, int row_off, int col_off) {
    for (int j = 0; j < nb; ++j)
      for (int i = 0; i < nb; ++i) {
        const double v = m(row_off + i, col_off + j);
        if (v != 0.0) trip.emplace_back(row_cell * nb + i, col_cell * nb + j, v);
      }
  };

  // Volume terms: int (eps grad U - a U) . grad v.
  const int nv = p + 2;
  const std::size_t nqv = static_cast<std::size_t>(nv) * nv;
  Eigen::MatrixXd V(nqv, nb), Gx(nqv, nb), Gy(nqv, nb);
  BasisPoint bp;
  for (std::size_t c = 0; c < mesh.num_active(); ++c) {
    const int cell = static_cast<int>(c);
    const BoxRule r = box_rule(mesh.box(cell), nv);
    Eigen::VectorXd w(nqv), ax(nqv), ay(nqv);
    for (int j = 0; j < nv; ++j)
      for (int i = 0; i < nv; ++i) {
        const std::size_t q = i + static_cast<std::size_t>(nv) * j;
        basis_at(space, cell, r.xs[i], r.ys[j], bp);
        for (int k = 0; k < nb; ++k) {
          V(q, k) = bp.v[k];
          Gx(q, k) = bp.dx[k];
          Gy(q, k) = bp.dy[k];
        }
        w[q] = r.w[q];
        if (convection) {
          const Vec2 a = data.a(r.xs[i], r.ys[j], t);
          ax[q] = a.x;
          ay[q] = a.y;
        }
      }
    Eigen::MatrixXd local = eps * (Gx.transpose() * w.asDiagonal() * Gx +
                                   Gy.transpose() * w.asDiagonal() * Gy);
    if (convection) {
      // row = test i, column = trial j: - int U_j (a . grad v_i)
      local -= Gx.transpose() * (w.cwiseProduct(ax)).asDiagonal() * V +
               Gy.transpose() * (w.cwiseProduct(ay)).asDiagonal() * V;
    }
    scatter(tb, cell, cell, local, 0, 0);
  }

  // Face terms.
  const int ne = p + 2;
  BasisPoint bm, bpl;
  for (const Edge& e : mesh.edges()) {
    if (!(e.length > 0.0)) throw AssemblyDegenerate("assemble_forms: edge of zero length");
    const EdgeRule r = edge_rule(e, ne);
    const double pen = gamma * eps / e.length;
    const bool boundary = e.boundary();
    const int size = boundary ? nb : 2 * nb;
    Eigen::MatrixXd lb = Eigen::MatrixXd::Zero(size, size);
    Eigen::MatrixXd lk = Eigen::MatrixXd::Zero(size, size);
    Eigen::VectorXd J(size), D(size), Up(size);
    for (int q = 0; q < ne; ++q) {
      const double x = r.xs.size() == 1 ? r.xs[0] : r.xs[q];
      const double y = r.ys.size() == 1 ? r.ys[0] : r.ys[q];
      const double w = r.w[q];
      basis_at(space, e.minus, x, y, bm);
      for (int k = 0; k < nb; ++k) {
        J[k] = bm.v[k];
        D[k] = eps * (e.nx * bm.dx[k] + e.ny * bm.dy[k]);
      }
      if (!boundary) {
        basis_at(space, e.plus, x, y, bpl);
        for (int k = 0; k < nb; ++k) {
          J[nb + k] = -bpl.v[k];
          D[k] *= 0.5;
          D[nb + k] = 0.5 * eps * (e.nx * bpl.dx[k] + e.ny * bpl.dy[k]);
        }
      }
      lb.noalias() += (w * pen) * J * J.transpose();
      lk.noalias() -= w * (J * D.transpose() + D * J.transpose());
      if (convection) {
        const Vec2 a = data.a(x, y, t);
        const double an = a.x * e.nx + a.y * e.ny;
        if (an >= 0.0) {
          // outflow of the minus cell: U^- (a.n) (v^- - v^+)
          Up.setZero();
          for (int k = 0; k < nb; ++k) Up[k] = bm.v[k];
          lb.noalias() += (w * an) * J * Up.transpose();
        } else if (!boundary) {
          // outflow of the plus cell: U^+ (a.n^+) (v^+ - v^-) = U^+ (a.n) (v^- - v^+)
          Up.setZero();
          for (int k = 0; k < nb; ++k) Up[nb + k] = bpl.v[k];
          lb.noalias() += (w * an) * J * Up.transpose();
        }
      }
    }
    scatter(tb, e.minus, e.minus, lb, 0, 0);
    scatter(tk, e.minus, e.minus, lk, 0, 0);
    if (!boundary) {
      scatter(tb, e.minus, e.plus, lb, 0, nb);
      scatter(tb, e.plus, e.minus, lb, nb, 0);
      scatter(tb, e.plus, e.plus, lb, nb, nb);
      scatter(tk, e.minus, e.plus, lk, 0, nb);
      scatter(tk, e.plus, e.minus, lk, nb, 0);
      scatter(tk, e.plus, e.plus, lk, nb, nb);
    }
  }

  const auto n = static_cast<Eigen::Index>(space.num_dofs());
  DgForms forms;
  forms.B.resize(n, n);
  forms.K.resize(n, n);
  forms.B.setFromTriplets(tb.begin(), tb.end());
  forms.K.setFromTriplets(tk.begin(), tk.end());
  return forms;
}

double l2_norm(const DgField& u) { return u.coeffs.norm(); }

std::vector<double> cell_linf(const DgField& u) {
  const int ns = linf_samples(u.space->degree());
  std::vector<double> out(u.space->num_cells());
  std::vector<double> vals(static_cast<std::size_t>(ns) * ns);
  for (std::size_t c = 0; c < out.size(); ++c) {
    const Box b = u.space->mesh().box(static_cast<int>(c));
    const auto xs = sample_points(b.x0, b.x1, ns);
    const auto ys = sample_points(b.y0, b.y1, ns);
    evaluate_grid(u, static_cast<int>(c), xs, ys, Deriv::Value, vals);
    double m = 0.0;
    for (double v : vals) m = std::max(m, std::abs(v));
    out[c] = m;
  }
  return out;
}

double linf_norm(const DgField& u) {
  double m = 0.0;
  for (double v : cell_linf(u)) m = std::max(m, v);
  return m;
}

FieldNorms norms(const DgField& u) {
  FieldNorms n;
  n.l2 = l2_norm(u);
  n.linf = linf_norm(u);
  const int nq = u.space->degree() + 1;
  std::vector<double> gx(static_cast<std::size_t>(nq) * nq), gy(gx.size());
  double h1 = 0.0;
  for (std::size_t c = 0; c < u.space->num_cells(); ++c) {
    const BoxRule r = box_rule(u.space->mesh().box(static_cast<int>(c)), nq);
    evaluate_grid(u, static_cast<int>(c), r.xs, r.ys, Deriv::Dx, gx);
    evaluate_grid(u, static_cast<int>(c), r.xs, r.ys, Deriv::Dy, gy);
    for (std::size_t q = 0; q < gx.size(); ++q) h1 += r.w[q] * (gx[q] * gx[q] + gy[q] * gy[q]);
  }
  n.h1_semi = std::sqrt(h1);
  return n;
}

EdgeJumpNorms edge_norms(const DgField& u) {
  const MeshForest& mesh = u.space->mesh();
  const int p = u.space->degree();
  const int nq = p + 1;
  const int ns = linf_samples(p);
  std::vector<double> a(std::max(nq, ns)), b(std::max(nq, ns));
  double l2 = 0.0, weighted = 0.0, linf = 0.0;
  for (const Edge& e : mesh.edges()) {
    const EdgeRule r = edge_rule(e, nq);
    evaluate_grid(u, e.minus, r.xs, r.ys, Deriv::Value, std::span<double>(a.data(), nq));
    if (!e.boundary())
      evaluate_grid(u, e.plus, r.xs, r.ys, Deriv::Value, std::span<double>(b.data(), nq));
    double s = 0.0;
    for (int q = 0; q < nq; ++q) {
      const double j = a[q] - (e.boundary() ? 0.0 : b[q]);
      s += r.w[q] * j * j;
    }
    l2 += s;
    weighted += e.length * s;
    const EdgeRule sr = edge_samples(e, ns);
    evaluate_grid(u, e.minus, sr.xs, sr.ys, Deriv::Value, std::span<double>(a.data(), ns));
    if (!e.boundary())
      evaluate_grid(u, e.plus, sr.xs, sr.ys, Deriv::Value, std::span<double>(b.data(), ns));
    for (int q = 0; q < ns; ++q)
      linf = std::max(linf, std::abs(a[q] - (e.boundary() ? 0.0 : b[q])));
  }
  return {std::sqrt(l2), linf, std::sqrt(weighted)};
}

DgField difference_on_overlay(const DgField& u, const DgField& v) {
  const CommonRefinement cr = common_refinement(u.space->mesh(), v.space->mesh());
  auto mesh = std::make_shared<const MeshForest>(cr.overlay);
  SpacePtr space = make_space(mesh, std::max(u.space->degree(), v.space->degree()));
  DgField a = inject(u, space);
  DgField b = inject(v, space);
  return DgField(space, a.coeffs - b.coeffs);
}

std::string field_csv(const DgField& u) {
  std::ostringstream out;
  out.imbue(std::locale::classic());
  out << std::setprecision(17);
  out << "x,y,value\n";
  const int ns = linf_samples(u.space->degree());
  std::vector<double> vals(static_cast<std::size_t>(ns) * ns);
  for (std::size_t c = 0; c < u.space->num_cells(); ++c) {
    const Box b = u.space->mesh().box(static_cast<int>(c));
    const auto xs = sample_points(b.x0, b.x1, ns);
    const auto ys = sample_points(b.y0, b.y1, ns);
    evaluate_grid(u, static_cast<int>(c), xs, ys, Deriv::Value, vals);
    for (int j = 0; j < ns; ++j)
      for (int i = 0; i < ns; ++i)
        out << xs[i] << ',' << ys[j] << ',' << vals[i + static_cast<std::size_t>(ns) * j] << '\n';
  }
  return out.str();
}

}  // namespace blowup
