#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fenn/assembly.hpp"

namespace fenn {

/// Block-diagonal saddle-point preconditioner built from dense Cholesky
/// factors A = L L^T and -S = M M^T with S = -B A^{-1} B^T. All
/// applications go through triangular solves; inverses are never formed.
class Preconditioner {
 public:
  Preconditioner(Eigen::MatrixXd l, Eigen::MatrixXd m);

  const Eigen::MatrixXd& L() const { return l_; }
  const Eigen::MatrixXd& M() const { return m_; }

  Eigen::VectorXd solve_L(const Eigen::VectorXd& v) const;    // L x = v
  Eigen::VectorXd solve_Lt(const Eigen::VectorXd& v) const;   // L^T x = v
  Eigen::VectorXd solve_M(const Eigen::VectorXd& v) const;
  Eigen::VectorXd solve_Mt(const Eigen::VectorXd& v) const;

  Eigen::VectorXd apply_Lt(const Eigen::VectorXd& v) const;   // L^T v
  Eigen::VectorXd apply_Mt(const Eigen::VectorXd& v) const;

 private:
  Eigen::MatrixXd l_;
  Eigen::MatrixXd m_;
};

/// Throws on Cholesky breakdown, naming the offending block.
Preconditioner build_preconditioner(const StokesSystem& sys);

/// Preconditioned Stokes residual in the transformed variables
/// (u~, p~) = (L^T u, M^T p):
///   r~_u = u~ + L^{-1} B^T M^{-T} p~ - L^{-1} f
///   r~_p = M^{-1} B L^{-T} u~ - M^{-1} g
ResidualPair preconditioned_residual_stokes(const Preconditioner& pre,
                                            const StokesSystem& sys,
                                            const Eigen::VectorXd& ut,
                                            const Eigen::VectorXd& pt);

/// As above with the convection block L^{-1} C(u_hat) L^{-T} added,
/// u = L^{-T} u~.
ResidualPair preconditioned_residual_ns(const Preconditioner& pre, const StokesSystem& sys,
                                        const ConvectionTensor& ct,
                                        const Eigen::VectorXd& ut,
                                        const Eigen::VectorXd& pt);

/// Physical coefficients from transformed ones: u = L^{-T} u~, p = M^{-T} p~.
ResidualPair recover_physical(const Preconditioner& pre, const Eigen::VectorXd& ut,
                              const Eigen::VectorXd& pt);

struct SpectralReport {
  std::vector<double> eigenvalues;       // of Y = Z^2, ascending
  double max_cluster_distance = 0;       // to {1, 3/2 +- sqrt(5)/2}
  double annihilator_norm = 0;           // ||(Y-I)((Y-3/2 I)^2 - 5/4 I)||_F
  double y_norm = 0;                     // ||Y||_F
  double projection_defect = 0;          // ||P^2 - P||_F / ||P||_F, P = C^T C
  double cct_identity_defect = 0;        // ||C C^T - I||_F
};

/// Dense eigen-analysis of Y = Z^2 for the coupled identity/off-diagonal
/// block operator. Refuses problems with more than `max_dim` total DOFs
/// (default keeps the dense eigensolve under control).
SpectralReport spectral_check(const Preconditioner& pre, const StokesSystem& sys,
                              int max_dim = 3000);

std::string spectral_report_json(const SpectralReport& report);

}  // namespace fenn
