#include "fenn/precond.hpp"

#include <cmath>
#include <stdexcept>

#include <json.hpp>

namespace fenn {

Preconditioner::Preconditioner(Eigen::MatrixXd l, Eigen::MatrixXd m)
    : l_(std::move(l)), m_(std::move(m)) {}

Eigen::VectorXd Preconditioner::solve_L(const Eigen::VectorXd& v) const {
  return l_.triangularView<Eigen::Lower>().solve(v);
}
Eigen::VectorXd Preconditioner::solve_Lt(const Eigen::VectorXd& v) const {
  return l_.transpose().triangularView<Eigen::Upper>().solve(v);
}
Eigen::VectorXd Preconditioner::solve_M(const Eigen::VectorXd& v) const {
  return m_.triangularView<Eigen::Lower>().solve(v);
}
Eigen::VectorXd Preconditioner::solve_Mt(const Eigen::VectorXd& v) const {
  return m_.transpose().triangularView<Eigen::Upper>().solve(v);
}
Eigen::VectorXd Preconditioner::apply_Lt(const Eigen::VectorXd& v) const {
  return l_.transpose().triangularView<Eigen::Upper>() * v;
}
Eigen::VectorXd Preconditioner::apply_Mt(const Eigen::VectorXd& v) const {
  return m_.transpose().triangularView<Eigen::Upper>() * v;
}

Preconditioner build_preconditioner(const StokesSystem& sys) {
  const Eigen::MatrixXd a_dense(sys.A);
  Eigen::LLT<Eigen::MatrixXd> llt_a(a_dense);
  if (llt_a.info() != Eigen::Success) {
    throw std::runtime_error("build_preconditioner: Cholesky of A failed (A not positive definite)");
  }
  Eigen::MatrixXd l = llt_a.matrixL();

  // -S = B A^{-1} B^T formed via triangular solves against L.
  Eigen::MatrixXd bt(sys.B.transpose());
  Eigen::MatrixXd x = l.triangularView<Eigen::Lower>().solve(bt);  // X = L^{-1} B^T
  Eigen::MatrixXd neg_s = x.transpose() * x;
  Eigen::LLT<Eigen::MatrixXd> llt_s(neg_s);
  if (llt_s.info() != Eigen::Success) {
    throw std::runtime_error(
        "build_preconditioner: Cholesky of -S = B A^{-1} B^T failed (Schur block not positive "
        "definite)");
  }
  return Preconditioner(std::move(l), llt_s.matrixL());
}

ResidualPair preconditioned_residual_stokes(const Preconditioner& pre,
                                            const StokesSystem& sys,
                                            const Eigen::VectorXd& ut,
                                            const Eigen::VectorXd& pt) {
  if (ut.size() != sys.A.rows() || pt.size() != sys.B.rows()) {
    throw std::runtime_error("preconditioned_residual_stokes: dimension mismatch");
  }
  const Eigen::VectorXd p = pre.solve_Mt(pt);
  const Eigen::VectorXd u = pre.solve_Lt(ut);
  Eigen::VectorXd ru = ut + pre.solve_L(sys.B.transpose() * p - sys.f);
  Eigen::VectorXd rp = pre.solve_M(sys.B * u - sys.g);
  return {std::move(ru), std::move(rp)};
}

ResidualPair preconditioned_residual_ns(const Preconditioner& pre, const StokesSystem& sys,
                                        const ConvectionTensor& ct,
                                        const Eigen::VectorXd& ut,
                                        const Eigen::VectorXd& pt) {
  auto [ru, rp] = preconditioned_residual_stokes(pre, sys, ut, pt);
  if (!ct.empty()) {
    const Eigen::VectorXd u = pre.solve_Lt(ut);
    const Eigen::VectorXd uhat = mask_dirichlet(sys, u);
    Eigen::VectorXd conv = ct.contract(u, uhat);
    sys.zero_dirichlet(conv);
    ru += pre.solve_L(conv);
  }
  return {std::move(ru), std::move(rp)};
}

ResidualPair recover_physical(const Preconditioner& pre, const Eigen::VectorXd& ut,
                              const Eigen::VectorXd& pt) {
  return {pre.solve_Lt(ut), pre.solve_Mt(pt)};
}

SpectralReport spectral_check(const Preconditioner& pre, const StokesSystem& sys,
                              int max_dim) {
  const int nu = sys.num_velocity_dofs();
  const int np = sys.num_pressure_dofs();
  const int n = nu + np;
  if (n > max_dim) {
    throw std::runtime_error("spectral_check: problem too large for a dense eigensolve (" +
                             std::to_string(n) + " > " + std::to_string(max_dim) + " DOFs)");
  }

  // C = M^{-1} B L^{-T} via two dense triangular solves.
  Eigen::MatrixXd bt(sys.B.transpose());
  Eigen::MatrixXd x = pre.L().triangularView<Eigen::Lower>().solve(bt);  // L^{-1} B^T
  Eigen::MatrixXd c =
      pre.M().triangularView<Eigen::Lower>().solve(Eigen::MatrixXd(x.transpose()));

  Eigen::MatrixXd z = Eigen::MatrixXd::Zero(n, n);
  z.topLeftCorner(nu, nu).setIdentity();
  z.topRightCorner(nu, np) = c.transpose();
  z.bottomLeftCorner(np, nu) = c;
  const Eigen::MatrixXd y = z * z;

  SpectralReport report;
  report.y_norm = y.norm();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(y, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) {
    throw std::runtime_error("spectral_check: eigensolver failed");
  }
  report.eigenvalues.assign(es.eigenvalues().data(), es.eigenvalues().data() + n);

  const double root = std::sqrt(5.0) / 2.0;
  const double clusters[3] = {1.0, 1.5 - root, 1.5 + root};
  double max_dist = 0;
  for (double ev : report.eigenvalues) {
    double d = std::abs(ev - clusters[0]);
    d = std::min(d, std::abs(ev - clusters[1]));
    d = std::min(d, std::abs(ev - clusters[2]));
    max_dist = std::max(max_dist, d);
  }
  report.max_cluster_distance = max_dist;

  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd shifted = y - 1.5 * id;
  report.annihilator_norm = ((y - id) * (shifted * shifted - 1.25 * id)).norm();

  const Eigen::MatrixXd proj = c.transpose() * c;
  report.projection_defect = (proj * proj - proj).norm() / proj.norm();
  report.cct_identity_defect =
      (c * c.transpose() - Eigen::MatrixXd::Identity(np, np)).norm();
  return report;
}

std::string spectral_report_json(const SpectralReport& report) {
  nlohmann::json j;
  j["eigenvalues"] = report.eigenvalues;
  j["max_cluster_distance"] = report.max_cluster_distance;
  j["annihilator_norm"] = report.annihilator_norm;
  j["y_frobenius_norm"] = report.y_norm;
  j["projection_defect"] = report.projection_defect;
  j["cct_identity_defect"] = report.cct_identity_defect;
  j["cluster_values"] = {1.0, 1.5 - std::sqrt(5.0) / 2.0, 1.5 + std::sqrt(5.0) / 2.0};
  return j.dump(2);
}

}  // namespace fenn
