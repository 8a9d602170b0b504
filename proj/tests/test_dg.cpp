#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>
#include <cmath>
#include <memory>
#include <random>

#include "blowup/dg_space.hpp"
#include "blowup/quadrature.hpp"

using namespace blowup;

namespace {

std::shared_ptr<MeshForest> hanging_mesh(Box box) {
  auto m = std::make_shared<MeshForest>(box, 2, 2);
  const int c[] = {0};
  m->refine(c);
  const int d[] = {m->index_of(CellKey{0, 0, 0}.child(3))};
  m->refine(d);
  return m;
}

ProblemData diffusion(Box box) {
  ProblemData d;
  d.domain = box;
  d.epsilon = 1.0;
  d.gamma = 30.0;
  return d;
}

Eigen::MatrixXd dense(const SparseMatrix& m) { return Eigen::MatrixXd(m); }

// int_K g phi_i with a high order tensor Gauss rule, as an independent check.
double moment(const DgSpace& s, int cell, int i, const std::function<double(double, double)>& g) {
  const BoxRule r = box_rule(s.mesh().box(cell), 12);
  BasisPoint bp;
  double sum = 0.0;
  for (std::size_t iy = 0; iy < r.ys.size(); ++iy)
    for (std::size_t ix = 0; ix < r.xs.size(); ++ix) {
      basis_at(s, cell, r.xs[ix], r.ys[iy], bp, false);
      sum += r.w[ix + r.xs.size() * iy] * g(r.xs[ix], r.ys[iy]) * bp.v[i];
    }
  return sum;
}

}  // namespace

TEST(Dg, BasisIsOrthonormal) {
  auto mesh = std::make_shared<MeshForest>(Box{-1, 0, 2, 0.5}, 1, 1);
  auto s = make_space(mesh, 3);
  const int nb = s->dofs_per_cell();
  for (int i = 0; i < nb; ++i)
    for (int j = 0; j < nb; ++j) {
      BasisPoint bp;
      const double m = moment(*s, 0, i, [&](double x, double y) {
        basis_at(*s, 0, x, y, bp, false);
        return bp.v[j];
      });
      EXPECT_NEAR(m, i == j ? 1.0 : 0.0, 1e-12);
    }
}

TEST(Dg, SingleCellConstantPenalty) {
  auto mesh = std::make_shared<MeshForest>(Box{0, 0, 1, 1}, 1, 1);
  auto s = make_space(mesh, 0);
  const DgForms f = assemble_forms(*s, diffusion(mesh->domain()), 0.0);
  EXPECT_NEAR(dense(f.B + f.K)(0, 0), 4 * 30.0, 1e-12);
}

TEST(Dg, HangingEdgePenalty) {
  auto mesh = std::make_shared<MeshForest>(Box{0, 0, 2, 1}, 2, 1);
  const int c[] = {0};
  mesh->refine(c);
  auto s = make_space(mesh, 0);
  const DgForms f = assemble_forms(*s, diffusion(mesh->domain()), 0.0);
  // u = 1 on the SE child [0.5,1]x[0,0.5], zero elsewhere; four edges of
  // length 1/2 each contribute gamma / h_E * |E| = 30.
  DgField u(s);
  const int se = mesh->index_of(CellKey{0, 0, 0}.child(1));
  u.block(se)[0] = 0.5;
  const double energy = u.coeffs.dot((f.B + f.K) * u.coeffs);
  EXPECT_NEAR(energy, 120.0, 1e-10);
}

class Coercive : public ::testing::TestWithParam<int> {};

TEST_P(Coercive, SymmetricPositiveDefinite) {
  const int p = GetParam();
  auto mesh = hanging_mesh(Box{0, 0, 1, 1});
  auto s = make_space(mesh, p);
  const DgForms f = assemble_forms(*s, diffusion(mesh->domain()), 0.0);
  const Eigen::MatrixXd A = dense(f.B + f.K);
  EXPECT_LT((A - A.transpose()).cwiseAbs().maxCoeff(), 1e-9 * A.cwiseAbs().maxCoeff());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
  EXPECT_GT(es.eigenvalues().minCoeff(), 0.0);
}

INSTANTIATE_TEST_SUITE_P(Degrees, Coercive, ::testing::Values(1, 2, 3, 5));

TEST(Dg, ConvectionSkewPart) {
  // Upwind convection with a divergence-free velocity: (C v, v) is
  // 1/2 sum |a.n| [v]^2 >= 0.
  auto mesh = hanging_mesh(Box{0, 0, 1, 1});
  auto s = make_space(mesh, 2);
  ProblemData d = diffusion(mesh->domain());
  const DgForms f0 = assemble_forms(*s, d, 0.0);
  d.velocity = [](double, double, double) { return Vec2{1.0, -0.5}; };
  const DgForms f1 = assemble_forms(*s, d, 0.0);
  const Eigen::MatrixXd C = dense(f1.B) - dense(f0.B);
  std::mt19937 rng(3);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::VectorXd v(C.rows());
    for (auto& x : v) x = nd(rng);
    EXPECT_GE(v.dot(C * v), -1e-10);
  }
}

TEST(Dg, ConsistencyOnExactPolynomial) {
  // u = x(1-x)y(1-y) lies in the space for p = 2 and is continuous with zero
  // trace, so (B + K) U equals the projection of -eps Lap u + a.grad u.
  auto mesh = hanging_mesh(Box{0, 0, 1, 1});
  auto s = make_space(mesh, 2);
  ProblemData d = diffusion(mesh->domain());
  d.epsilon = 0.7;
  d.velocity = [](double, double, double) { return Vec2{1.0, 0.5}; };
  auto u = [](double x, double y) { return x * (1 - x) * y * (1 - y); };
  auto Lu = [&](double x, double y) {
    const double lap = -2 * y * (1 - y) - 2 * x * (1 - x);
    const double ux = (1 - 2 * x) * y * (1 - y), uy = x * (1 - x) * (1 - 2 * y);
    return -d.epsilon * lap + 1.0 * ux + 0.5 * uy;
  };
  const DgField U = l2_project_function(s, u);
  const DgField rhs = l2_project_function(s, Lu);
  const DgForms f = assemble_forms(*s, d, 0.0);
  const Eigen::VectorXd lhs = (f.B + f.K) * U.coeffs;
  EXPECT_LT((lhs - rhs.coeffs).cwiseAbs().maxCoeff(), 1e-11);
}

TEST(Dg, ProjectionReproducesPolynomials) {
  auto mesh = hanging_mesh(Box{-1, -1, 1, 1});
  auto s = make_space(mesh, 3);
  auto g = [](double x, double y) { return 1 + x - 2 * x * x * y + std::pow(x, 3) * std::pow(y, 3); };
  const DgField U = l2_project_function(s, g);
  for (std::size_t c = 0; c < mesh->num_active(); ++c) {
    const Box b = mesh->box(static_cast<int>(c));
    const double x = b.x0 + 0.3 * b.width(), y = b.y0 + 0.8 * b.height();
    EXPECT_NEAR(U.value(static_cast<int>(c), x, y), g(x, y), 1e-12);
  }
}

TEST(Dg, ProjectionOrthogonality) {
  auto mesh = hanging_mesh(Box{0, 0, 1, 1});
  auto s = make_space(mesh, 2);
  auto g = [](double x, double y) { return std::exp(x - y) * std::sin(3 * x); };
  const DgField U = l2_project_function(s, g, 12);
  for (std::size_t c = 0; c < mesh->num_active(); ++c) {
    const int cell = static_cast<int>(c);
    for (int i = 0; i < s->dofs_per_cell(); ++i) {
      const double r = moment(*s, cell, i, [&](double x, double y) { return g(x, y) - U.value(cell, x, y); });
      EXPECT_NEAR(r, 0.0, 1e-12);
    }
  }
}

TEST(Dg, ProjectionIdempotentAndTransfers) {
  auto coarse = std::make_shared<MeshForest>(Box{0, 0, 1, 1}, 2, 2);
  auto fine = hanging_mesh(Box{0, 0, 1, 1});
  auto sc = make_space(coarse, 2);
  auto sf = make_space(fine, 2);
  const DgField U = l2_project_function(sc, [](double x, double y) { return std::cos(4 * x * y); });
  const DgField same = l2_project_field(U, sc);
  EXPECT_LT((same.coeffs - U.coeffs).cwiseAbs().maxCoeff(), 1e-13);
  const DgField up = inject(U, sf);
  const DgField up2 = l2_project_field(U, sf);
  EXPECT_LT((up.coeffs - up2.coeffs).cwiseAbs().maxCoeff(), 1e-13);
  const DgField back = l2_project_field(up, sc);
  EXPECT_LT((back.coeffs - U.coeffs).cwiseAbs().maxCoeff(), 1e-13);
  EXPECT_NEAR(l2_norm(up), l2_norm(U), 1e-13);
}

TEST(Dg, ContinuousFieldHasNoJumps) {
  auto mesh = hanging_mesh(Box{0, 0, 1, 1});
  auto s = make_space(mesh, 2);
  const DgField U = l2_project_function(s, [](double x, double y) { return x * (1 - x) * y * (1 - y); });
  const EdgeJumpNorms j = edge_norms(U);
  EXPECT_LT(j.l2, 1e-13);
  EXPECT_LT(j.linf, 1e-13);
  EXPECT_LT(j.weighted, 1e-13);
  // A constant jumps only across the boundary, where [u] = u n.
  const DgField one = l2_project_function(s, [](double, double) { return 1.0; });
  EXPECT_NEAR(edge_norms(one).l2, 2.0, 1e-12);
  EXPECT_NEAR(edge_norms(one).linf, 1.0, 1e-12);
}

TEST(Dg, Norms) {
  auto mesh = hanging_mesh(Box{0, 0, 2, 1});
  auto s = make_space(mesh, 1);
  const DgField one = l2_project_function(s, [](double, double) { return 1.0; });
  EXPECT_NEAR(l2_norm(one), std::sqrt(2.0), 1e-13);
  const DgField xy = l2_project_function(s, [](double x, double y) { return x - 3 * y; });
  const FieldNorms n = norms(xy);
  EXPECT_NEAR(n.linf, 3.0, 1e-12);
  EXPECT_NEAR(n.h1_semi, std::sqrt(10.0 * 2.0), 1e-12);
  // int_0^2 int_0^1 (x - 3y)^2 = 8/3 - 6 + 6 = 8/3
  EXPECT_NEAR(n.l2, std::sqrt(8.0 / 3.0), 1e-12);
}

TEST(Dg, DifferenceOnOverlay) {
  auto a = std::make_shared<MeshForest>(Box{0, 0, 1, 1}, 2, 2);
  auto b = hanging_mesh(Box{0, 0, 1, 1});
  auto g = [](double x, double y) { return x * y; };
  const DgField ua = l2_project_function(make_space(a, 1), g);
  const DgField ub = l2_project_function(make_space(b, 1), g);
  EXPECT_LT(l2_norm(difference_on_overlay(ua, ub)), 1e-13);
}
