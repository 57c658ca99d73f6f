#pragma once

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "fenn/space.hpp"

namespace fenn {

using SparseMat = Eigen::SparseMatrix<double>;

/// Assembled Stokes saddle-point blocks with Dirichlet conditions eliminated
/// symmetrically: rows/columns of A at constrained DOFs are unit, the moved
/// column contributions live in f and g, and B's constrained columns are
/// zeroed. A_bc / B_bc keep the raw constrained columns so f and g can be
/// rebuilt for a different angle of attack without reassembly.
struct StokesSystem {
  SparseMat A;  // N_u x N_u, eta-scaled vector Laplacian
  SparseMat B;  // N_p x N_u, negative divergence
  Eigen::VectorXd f;
  Eigen::VectorXd g;
  double eta = 1.0;
  double lambda_deg = 0.0;

  std::vector<int> dirichlet_dofs;   // ascending
  Eigen::VectorXd bc_values;         // aligned with dirichlet_dofs
  SparseMat A_bc;                    // N_u x n_bc raw columns
  SparseMat B_bc;                    // N_p x n_bc raw columns

  int num_velocity_dofs() const { return static_cast<int>(A.rows()); }
  int num_pressure_dofs() const { return static_cast<int>(B.rows()); }

  /// Recomputes f, g and bc_values for a new angle of attack; A and B are
  /// angle-independent.
  void set_angle(const TaylorHoodSpace& space, double new_lambda_deg);

  /// Zeroes the entries of v at Dirichlet DOFs (in place).
  void zero_dirichlet(Eigen::VectorXd& v) const;
};

StokesSystem assemble_stokes(const TaylorHoodSpace& space, double eta, double lambda_deg);

/// Sparse trilinear form values c(v_k; v_j, v_i) = \int (v_k . grad v_j) . v_i
/// over velocity basis fields, stored per (i,j,k) triple. Entries exist only
/// for DOFs sharing a triangle.
class ConvectionTensor {
 public:
  struct Entry {
    int i, j, k;
    double v;
  };

  ConvectionTensor() = default;
  ConvectionTensor(int n, std::vector<Entry> entries)
      : n_(n), entries_(std::move(entries)) {}

  int dim() const { return n_; }
  bool empty() const { return entries_.empty(); }
  const std::vector<Entry>& entries() const { return entries_; }

  /// out_i = sum_{j,k} C[i,j,k] u_j w_k, i.e. C(w) * u.
  Eigen::VectorXd contract(const Eigen::VectorXd& u, const Eigen::VectorXd& w) const;
  /// out_j = sum_{i,k} C[i,j,k] a_i w_k  (adjoint of `contract` in u).
  Eigen::VectorXd adjoint_u(const Eigen::VectorXd& a, const Eigen::VectorXd& w) const;
  /// out_k = sum_{i,j} C[i,j,k] a_i u_j  (adjoint of `contract` in w).
  Eigen::VectorXd adjoint_w(const Eigen::VectorXd& a, const Eigen::VectorXd& u) const;

  /// Dense convection matrix C(w) (desk scale only; for oracles/Newton).
  Eigen::MatrixXd materialize(const Eigen::VectorXd& w) const;

 private:
  int n_ = 0;
  std::vector<Entry> entries_;
};

ConvectionTensor assemble_convection(const TaylorHoodSpace& space);

/// u with prescribed boundary values substituted at Dirichlet DOFs.
Eigen::VectorXd mask_dirichlet(const StokesSystem& sys, const Eigen::VectorXd& u);

using ResidualPair = std::pair<Eigen::VectorXd, Eigen::VectorXd>;

/// r_u = A u + B^T p - f,  r_p = B u - g.
ResidualPair residual_stokes(const StokesSystem& sys, const Eigen::VectorXd& u,
                             const Eigen::VectorXd& p);

/// Stokes residual plus the convection contribution C(u_hat) * u with rows at
/// Dirichlet DOFs zeroed, where u_hat = mask_dirichlet(sys, u).
ResidualPair residual_navier_stokes(const StokesSystem& sys, const ConvectionTensor& ct,
                                    const Eigen::VectorXd& u, const Eigen::VectorXd& p);

/// Directional derivative of residual_navier_stokes at (u, .) in (du, dp).
ResidualPair ns_jacobian_action(const StokesSystem& sys, const ConvectionTensor& ct,
                                const Eigen::VectorXd& u, const Eigen::VectorXd& du,
                                const Eigen::VectorXd& dp);

/// Adjoint of ns_jacobian_action: given cotangents (a_u, a_p) on the residual,
/// returns gradients with respect to (u, p).
ResidualPair ns_jacobian_adjoint(const StokesSystem& sys, const ConvectionTensor& ct,
                                 const Eigen::VectorXd& u, const Eigen::VectorXd& a_u,
                                 const Eigen::VectorXd& a_p);

/// Scalar P2 mass matrix over all scalar nodes (for L2 velocity norms).
SparseMat assemble_p2_mass(const TaylorHoodSpace& space);
/// P1 mass matrix over vertices (for L2 pressure norms).
SparseMat assemble_p1_mass(const TaylorHoodSpace& space);

void write_matrix_market(const SparseMat& m, const std::string& path);

}  // namespace fenn
