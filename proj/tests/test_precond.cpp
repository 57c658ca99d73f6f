#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "fenn/precond.hpp"
#include "helpers.hpp"

using namespace fenn;

namespace {

StokesSystem tiny_system(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  StokesSystem sys;
  sys.A = a.sparseView();
  sys.B = b.sparseView();
  sys.f = Eigen::VectorXd::Zero(a.rows());
  sys.g = Eigen::VectorXd::Zero(b.rows());
  return sys;
}

Eigen::VectorXd random_vector(int n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = normal(rng);
  return v;
}

}  // namespace

TEST_CASE("hand-sized factorizations have closed forms") {
  Eigen::MatrixXd a(2, 2);
  a << 4, 0, 0, 9;
  Eigen::MatrixXd b(1, 2);
  b << 2, 3;
  const Preconditioner pre = build_preconditioner(tiny_system(a, b));
  CHECK(pre.L()(0, 0) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(pre.L()(1, 1) == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(pre.L()(0, 1) == 0.0);
  CHECK(pre.L()(1, 0) == 0.0);
  // -S = 2^2/4 + 3^2/9 = 2.
  CHECK(pre.M()(0, 0) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-14));
}

TEST_CASE("identity viscous block with orthonormal divergence rows gives M = I") {
  Eigen::MatrixXd b(2, 3);
  b << 1, 0, 0, 0, 1, 0;
  const Preconditioner pre = build_preconditioner(tiny_system(Eigen::MatrixXd::Identity(3, 3), b));
  CHECK((pre.M() - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("factor reconstruction on an assembled system") {
  const TaylorHoodSpace space = fenn::testing::desk_space(2);
  const StokesSystem sys = assemble_stokes(space, 1.0, 10.0);
  const Preconditioner pre = build_preconditioner(sys);

  const Eigen::MatrixXd a(sys.A);
  const Eigen::MatrixXd llt = pre.L() * pre.L().transpose();
  CHECK((llt - a).norm() <= 1e-10 * a.norm());

  const Eigen::MatrixXd bt = Eigen::MatrixXd(sys.B).transpose();
  const Eigen::MatrixXd schur =
      bt.transpose() * Eigen::LLT<Eigen::MatrixXd>(a).solve(bt);
  const Eigen::MatrixXd mmt = pre.M() * pre.M().transpose();
  CHECK((mmt - schur).norm() <= 1e-8 * schur.norm());

  for (int i = 0; i < pre.L().rows(); ++i) CHECK(pre.L()(i, i) > 0);
  for (int i = 0; i < pre.M().rows(); ++i) CHECK(pre.M()(i, i) > 0);
}

TEST_CASE("non-positive blocks are rejected with the offending block named") {
  CHECK_THROWS_WITH_AS(
      build_preconditioner(tiny_system(-Eigen::MatrixXd::Identity(2, 2), Eigen::MatrixXd::Ones(1, 2))),
      doctest::Contains("Cholesky of A"), std::runtime_error);
  CHECK_THROWS_WITH_AS(
      build_preconditioner(tiny_system(Eigen::MatrixXd::Identity(2, 2), Eigen::MatrixXd::Zero(1, 2))),
      doctest::Contains("Schur"), std::runtime_error);
}

TEST_CASE("transformed residual equals the left-preconditioned plain residual") {
  const TaylorHoodSpace space = fenn::testing::desk_space(2);
  const StokesSystem sys = assemble_stokes(space, 1.0, 25.0);
  const ConvectionTensor ct = assemble_convection(space);
  const Preconditioner pre = build_preconditioner(sys);
  const int nu = sys.num_velocity_dofs(), np = sys.num_pressure_dofs();

  const Eigen::VectorXd ut = random_vector(nu, 7), pt = random_vector(np, 8);
  const Eigen::VectorXd u = pre.solve_Lt(ut), p = pre.solve_Mt(pt);

  {
    const auto [r1u, r1p] = preconditioned_residual_stokes(pre, sys, ut, pt);
    const auto [ru, rp] = residual_stokes(sys, u, p);
    const Eigen::VectorXd r2u = pre.solve_L(ru), r2p = pre.solve_M(rp);
    CHECK((r1u - r2u).cwiseAbs().maxCoeff() <= 1e-12 * (1 + r2u.cwiseAbs().maxCoeff()));
    CHECK((r1p - r2p).cwiseAbs().maxCoeff() <= 1e-12 * (1 + r2p.cwiseAbs().maxCoeff()));
  }
  {
    const auto [r1u, r1p] = preconditioned_residual_ns(pre, sys, ct, ut, pt);
    const auto [ru, rp] = residual_navier_stokes(sys, ct, u, p);
    const Eigen::VectorXd r2u = pre.solve_L(ru), r2p = pre.solve_M(rp);
    CHECK((r1u - r2u).cwiseAbs().maxCoeff() <= 1e-12 * (1 + r2u.cwiseAbs().maxCoeff()));
    CHECK((r1p - r2p).cwiseAbs().maxCoeff() <= 1e-12 * (1 + r2p.cwiseAbs().maxCoeff()));
  }
  {
    // Empty convection tensor reduces to the Stokes map.
    const ConvectionTensor empty;
    const auto [r1u, r1p] = preconditioned_residual_ns(pre, sys, empty, ut, pt);
    const auto [r2u, r2p] = preconditioned_residual_stokes(pre, sys, ut, pt);
    CHECK((r1u - r2u).cwiseAbs().maxCoeff() == 0.0);
    CHECK((r1p - r2p).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("zero data and zero coefficients give a zero residual") {
  const TaylorHoodSpace space = fenn::testing::desk_space(2);
  StokesSystem sys = assemble_stokes(space, 1.0, 25.0);
  const Preconditioner pre = build_preconditioner(sys);
  sys.f.setZero();
  sys.g.setZero();
  const auto [ru, rp] = preconditioned_residual_stokes(
      pre, sys, Eigen::VectorXd::Zero(sys.num_velocity_dofs()),
      Eigen::VectorXd::Zero(sys.num_pressure_dofs()));
  CHECK(ru.cwiseAbs().maxCoeff() == 0.0);
  CHECK(rp.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("physical recovery inverts the transform") {
  const TaylorHoodSpace space = fenn::testing::desk_space(2);
  const StokesSystem sys = assemble_stokes(space, 1.0, 25.0);
  const Preconditioner pre = build_preconditioner(sys);
  const int nu = sys.num_velocity_dofs(), np = sys.num_pressure_dofs();

  const Eigen::VectorXd u = random_vector(nu, 41), p = random_vector(np, 42);
  const auto [ur, pr] = recover_physical(pre, pre.apply_Lt(u), pre.apply_Mt(p));
  CHECK((ur - u).cwiseAbs().maxCoeff() <= 1e-12 * u.cwiseAbs().maxCoeff());
  CHECK((pr - p).cwiseAbs().maxCoeff() <= 1e-12 * p.cwiseAbs().maxCoeff());

  const auto [z, zp] = recover_physical(pre, Eigen::VectorXd::Zero(nu), Eigen::VectorXd::Zero(np));
  CHECK(z.cwiseAbs().maxCoeff() == 0.0);
  CHECK(zp.cwiseAbs().maxCoeff() == 0.0);

  const Eigen::VectorXd ut = random_vector(nu, 43);
  const auto [u2, p2] = recover_physical(pre, ut, Eigen::VectorXd::Zero(np));
  CHECK((pre.apply_Lt(u2) - ut).cwiseAbs().maxCoeff() <= 1e-12 * ut.cwiseAbs().maxCoeff());
}

TEST_CASE("squared coupling operator clusters at three eigenvalues") {
  const double lo = 1.5 - std::sqrt(5.0) / 2.0, hi = 1.5 + std::sqrt(5.0) / 2.0;
  for (int res : {2, 3}) {
    const TaylorHoodSpace space = fenn::testing::desk_space(res);
    const StokesSystem sys = assemble_stokes(space, 1.0, 15.0);
    const Preconditioner pre = build_preconditioner(sys);
    const SpectralReport report = spectral_check(pre, sys);

    CAPTURE(res);
    REQUIRE(report.eigenvalues.size() ==
            static_cast<std::size_t>(sys.num_velocity_dofs() + sys.num_pressure_dofs()));
    CHECK(report.max_cluster_distance <= 1e-8);
    CHECK(report.annihilator_norm <= 1e-8 * std::pow(report.y_norm, 3));
    CHECK(report.projection_defect <= 1e-8);
    CHECK(report.cct_identity_defect <= 1e-8);
    for (double ev : report.eigenvalues) {
      const double d =
          std::min({std::abs(ev - 1.0), std::abs(ev - lo), std::abs(ev - hi)});
      CHECK(d <= 1e-8);
    }
  }
}

TEST_CASE("decoupled system is flagged by the spectral check") {
  const TaylorHoodSpace space = fenn::testing::desk_space(2);
  StokesSystem sys = assemble_stokes(space, 1.0, 15.0);
  const Preconditioner pre = build_preconditioner(sys);
  sys.B.setZero();  // C = 0: spectrum collapses to {0, 1}, the lemma fails
  const SpectralReport report = spectral_check(pre, sys);
  CHECK(report.max_cluster_distance > 0.1);
  CHECK(report.cct_identity_defect > 0.5);
}

TEST_CASE("oversized problems are refused") {
  const TaylorHoodSpace space = fenn::testing::desk_space(2);
  const StokesSystem sys = assemble_stokes(space, 1.0, 15.0);
  const Preconditioner pre = build_preconditioner(sys);
  CHECK_THROWS_WITH_AS(spectral_check(pre, sys, 100), doctest::Contains("too large"),
                       std::runtime_error);
}

TEST_CASE("spectral report serializes to JSON") {
  SpectralReport r;
  r.eigenvalues = {1.0, 2.0};
  r.max_cluster_distance = 1e-9;
  const std::string json = spectral_report_json(r);
  CHECK(json.find("eigenvalues") != std::string::npos);
  CHECK(json.find("max_cluster_distance") != std::string::npos);
}
