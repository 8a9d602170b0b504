#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "blowup/problem.hpp"
#include "blowup/quad_mesh.hpp"
#include "blowup/quadrature.hpp"

namespace blowup {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor>;

/// Discontinuous tensor polynomials of degree p in each variable on the active
/// cells of a mesh. On a cell K = [x0,x1]x[y0,y1] the basis is
///     phi_ab(x, y) = 2 / sqrt(|K|) L_a(xi) L_b(eta),   index a + (p+1) b,
/// with L_k the orthonormal Legendre polynomials on [-1,1]; it is orthonormal
/// in L2(K), so the mass matrix is the identity.
class DgSpace {
 public:
  DgSpace(std::shared_ptr<const MeshForest> mesh, int degree);

  const MeshForest& mesh() const { return *mesh_; }
  const std::shared_ptr<const MeshForest>& mesh_ptr() const { return mesh_; }
  int degree() const { return degree_; }
  int dofs_per_cell() const { return (degree_ + 1) * (degree_ + 1); }
  std::size_t num_cells() const { return mesh_->num_active(); }
  std::size_t num_dofs() const { return num_cells() * static_cast<std::size_t>(dofs_per_cell()); }

 private:
  std::shared_ptr<const MeshForest> mesh_;
  int degree_;
};

using SpacePtr = std::shared_ptr<const DgSpace>;

SpacePtr make_space(std::shared_ptr<const MeshForest> mesh, int degree);

/// Coefficient vector over a space.
struct DgField {
  SpacePtr space;
  Eigen::VectorXd coeffs;

  DgField() = default;
  explicit DgField(SpacePtr s);
  DgField(SpacePtr s, Eigen::VectorXd c);

  auto block(int cell) const {
    return coeffs.segment(static_cast<Eigen::Index>(cell) * space->dofs_per_cell(),
                          space->dofs_per_cell());
  }
  auto block(int cell) {
    return coeffs.segment(static_cast<Eigen::Index>(cell) * space->dofs_per_cell(),
                          space->dofs_per_cell());
  }

  /// Value at a physical point inside the given active cell.
  double value(int cell, double x, double y) const;
  bool finite() const { return coeffs.allFinite(); }
};

/// Values and gradients of every basis function of one cell at a point.
struct BasisPoint {
  std::vector<double> v, dx, dy;
};

/// Fills basis values (and gradients when want_grad) of a cell at (x, y).
void basis_at(const DgSpace& space, int cell, double x, double y, BasisPoint& out,
              bool want_grad = true);

enum class Deriv { Value, Dx, Dy, Dxx, Dyy };

/// Evaluates the polynomial of a cell on the tensor grid xs x ys of physical
/// points (which may lie on the cell boundary); out[ix + xs.size() * iy].
void evaluate_grid(const DgSpace& space, int cell, std::span<const double> coeffs,
                   std::span<const double> xs, std::span<const double> ys, Deriv op,
                   std::span<double> out);
void evaluate_grid(const DgField& u, int cell, std::span<const double> xs,
                   std::span<const double> ys, Deriv op, std::span<double> out);

/// out[i] += sum_q g[q] phi_i(q) over the tensor grid xs x ys, for the basis
/// of the given cell; g already carries the quadrature weights.
void integrate_grid(const DgSpace& space, int cell, std::span<const double> xs,
                    std::span<const double> ys, std::span<const double> g, std::span<double> out);

/// Tensor Gauss rule on a box with n points per direction; weights are stored
/// in the grid order of evaluate_grid.
struct BoxRule {
  std::vector<double> xs, ys, w;
};
BoxRule box_rule(const Box& box, int n);

/// Gauss points along an edge with n points, or uniform samples.
struct EdgeRule {
  std::vector<double> xs, ys, w;  // for vertical edges xs has one entry, else ys
};
EdgeRule edge_rule(const Edge& e, int n);
EdgeRule edge_samples(const Edge& e, int n);

/// Uniform sample points on [a, b] including both end points.
std::vector<double> sample_points(double a, double b, int n);

/// Number of uniform samples per direction used for L-infinity norms.
inline int linf_samples(int degree) { return 2 * degree + 3; }

/// L2 projection of g onto the space, with n Gauss points per direction on
/// each cell (default p + 2, exact for integrands of degree 2p + 3).
DgField l2_project_function(SpacePtr space, const std::function<double(double, double)>& g,
                            int points = 0);

/// Callback on an overlay cell: fill vals with the integrand on the rule's
/// grid (unweighted). `overlay_cell` indexes the overlay mesh.
using OverlayIntegrand =
    std::function<void(int overlay_cell, const BoxRule& rule, std::span<double> vals)>;

/// Computes (g, phi_i) for every basis function of `target` where g is given
/// piecewise on the cells of an overlay mesh that refines the target mesh.
/// `target_of` maps overlay cells to target cells.
Eigen::VectorXd project_on_overlay(const MeshForest& overlay, std::span<const int> target_of,
                                   const DgSpace& target, int points,
                                   const OverlayIntegrand& g);

/// Exact L2 projection of a field onto another space over the same root
/// grid, integrated on the common refinement with p + 1 points per direction.
DgField l2_project_field(const DgField& field, SpacePtr target);

/// Transfers a field onto a finer mesh (every target cell lies in an active
/// cell of the source mesh); exact and cheaper than l2_project_field.
DgField inject(const DgField& field, SpacePtr finer);

/// Matrices of B(t; ., .) and K_h(., .): entry (i, j) is the form with trial
/// function j and test function i.
struct DgForms {
  SparseMatrix B;
  SparseMatrix K;
};

class AssemblyDegenerate : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

DgForms assemble_forms(const DgSpace& space, const ProblemData& data, double t);

struct FieldNorms {
  double l2 = 0.0;
  double h1_semi = 0.0;  // broken
  double linf = 0.0;     // sampled
};
FieldNorms norms(const DgField& u);
double l2_norm(const DgField& u);
double linf_norm(const DgField& u);

/// Sampled max |u| per cell.
std::vector<double> cell_linf(const DgField& u);

struct EdgeJumpNorms {
  double l2 = 0.0;    // (sum over edges of ||[u]||_E^2)^(1/2)
  double linf = 0.0;  // sampled
  double weighted = 0.0;  // (sum h_E ||[u]||_E^2)^(1/2)
};
/// Jump norms over all edges of the field's mesh, including boundary edges
/// where [u] = u n.
EdgeJumpNorms edge_norms(const DgField& u);

/// u - v on the common refinement, returned on its space.
DgField difference_on_overlay(const DgField& u, const DgField& v);

/// Per active cell, the sample lattice values as "x,y,value" CSV lines with a header.
std::string field_csv(const DgField& u);

}  // namespace blowup
