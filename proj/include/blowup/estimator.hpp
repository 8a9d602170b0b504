#pragma once

#include <optional>
#include <string>
#include <vector>

#include "blowup/dg_space.hpp"
#include "blowup/problem.hpp"

namespace blowup {

/// The unknown constants of the bound; both are set to one in practice.
struct BoundConstants {
  double C = 1.0;
  double C_GN = 1.0;
};

/// eta_{S1} at one time level, with the per-cell squared contributions used
/// for marking: volume terms go to their cell, face terms are split half/half
/// between the two neighbours (boundary faces wholly to their cell).
struct SpaceIndicator {
  double value = 0.0;            ///< eta_{S1}
  std::vector<double> per_cell;  ///< eta_{S1}^2 |_K, sums to value^2
};

SpaceIndicator eta_S1(const DgField& u, const DgField& A, const ProblemData& data, double t);

/// Initial condition estimator: (||u0 - U^0||^2 + sum_E h_E ||[U^0]||_E^2)^(1/2).
double eta_I(const DgField& u0h, const ProblemData& data);

/// Inputs for one time slab (t_prev, t_prev + tau]: fields on the old mesh
/// (u_prev, A_prev) and on the new one (the rest).
struct SlabFields {
  double t_prev = 0.0;
  double tau = 0.0;
  const DgField* u_prev = nullptr;
  const DgField* A_prev = nullptr;
  const DgField* u_next = nullptr;
  const DgField* A_next = nullptr;
  const DgField* proj_f = nullptr;     ///< Pi^k f^{k-1}
  const DgField* proj_prev = nullptr;  ///< Pi^k U^{k-1}
};

struct SlabIntegrals {
  double eta_A_sq = 0.0;   ///< int eta_A^2
  double eta_B = 0.0;      ///< int eta_B
  double sigma = 0.0;      ///< int sigma_Omega
  double eta_T2_sq = 0.0;  ///< int eta_{T2}^2
  double sigma_max = 0.0;  ///< max of sigma_Omega over the sampled times
  double jump_max = 0.0;   ///< max of (sum_E h_E ||[U_h(t)]||^2)^(1/2) over sampled times
};

/// Estimator terms of one slab, evaluated on the common refinement of the
/// two meshes. U_h(t) is the linear interpolant of U^{k-1} and U^k.
class SlabEstimator {
 public:
  SlabEstimator(const SlabFields& fields, const ProblemData& data, BoundConstants constants = {});

  double t_prev() const { return t_prev_; }
  double tau() const { return tau_; }
  const MeshForest& overlay() const { return *overlay_; }

  double eta_S2() const { return eta_S2_; }
  double eta_S4() const { return eta_S4_; }
  double eta_T1(double t) const;
  double eta_S3(double t) const;
  double eta_T2(double t) const;
  double sigma_omega(double t) const;
  /// (sum over overlay edges of h_E ||[U_h(t)]||_E^2)^(1/2)
  double jump_term(double t) const;

  /// int eta_T2^2 with 4-point Gauss in time.
  double eta_T2_sq_integral() const;

  /// Time integrals over the slab: 3-point Gauss for eta_A^2, 4-point for
  /// eta_B, sigma_Omega and eta_T2^2.
  SlabIntegrals integrals(double eta_S1_prev, double eta_S1_next) const;

 private:
  struct EdgeData {
    double h = 0.0;
    std::vector<double> w, jp, jn;    // Gauss weights and jumps of U^{k-1}, U^k
    std::vector<double> sjp, sjn;     // jumps at the uniform samples
  };
  double lk(double t) const { return (t - t_prev_) / tau_; }
  std::vector<double> edge_linf(double t) const;

  double t_prev_, tau_;
  ProblemData data_;
  BoundConstants constants_;
  std::shared_ptr<const MeshForest> overlay_;
  int n_vol_ = 0;
  std::vector<double> cell_h_;
  // Per overlay cell, volume Gauss grid data (n_vol_^2 entries per cell).
  std::vector<double> qx_, qy_, qw_, up_, un_, dA_, f0prev_;
  // Per overlay cell, uniform sample grid values.
  int n_samp_ = 0;
  std::vector<double> sup_, sun_;
  std::vector<EdgeData> edges_;
  std::vector<std::vector<int>> patch_;
  double eta_S2_ = 0.0;
  double eta_S4_ = 0.0;
};

/// Smallest delta > 1 with c delta^2 = log delta, c = C_GN^2 tau G^2 Phi^2 / eps;
/// nullopt when c > 1/(2e). Returns 1 when c = 0.
std::optional<double> solve_delta_pde(double tau, double growth, double Phi, double epsilon,
                                      double C_GN = 1.0);

struct PsiStep {
  double Phi = 0.0;
  double growth = 1.0;  ///< exp(int sigma_Omega)
  std::optional<double> delta;
  double Psi = 0.0;  ///< meaningful only when delta exists
};

/// Phi_k = sqrt(Psi_{k-1}^2 + C int eta_A^2) + C int eta_B, where the first
/// slab passes sqrt(C) eta_I as Psi_0; then delta_k and Psi_k = delta G Phi.
PsiStep psi_update(double psi_prev, const SlabIntegrals& integrals, double tau, double epsilon,
                   BoundConstants constants = {});

/// Psi_N + max over sampled times of the jump term.
inline double final_bound(double psi_N, double jump_max) { return psi_N + jump_max; }

/// One line of the per-step estimator ledger.
struct LedgerRow {
  long k = 0;
  double t = 0.0;
  double tau = 0.0;
  double eta_S1 = 0.0;
  double eta_A_sq = 0.0;
  double eta_B = 0.0;
  double sigma_max = 0.0;
  double growth = 1.0;
  double delta = 1.0;
  double Phi = 0.0;
  double Psi = 0.0;
};

std::string ledger_header();
std::string ledger_line(const LedgerRow& row);

}  // namespace blowup
